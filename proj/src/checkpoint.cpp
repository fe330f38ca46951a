#include "seg4d/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "seg4d/errors.hpp"

namespace seg4d {
namespace {

static_assert(std::endian::native == std::endian::little, "checkpoint writer assumes a little-endian host");

constexpr char kMagic[8] = {'S', 'E', 'G', '4', 'D', 'C', 'K', 'P'};

class Writer {
public:
    template <typename V>
    void put(V v) {
        const auto* p = reinterpret_cast<const std::uint8_t*>(&v);
        bytes_.insert(bytes_.end(), p, p + sizeof(V));
    }
    void put_bytes(const void* data, std::size_t n) {
        const auto* p = static_cast<const std::uint8_t*>(data);
        bytes_.insert(bytes_.end(), p, p + n);
    }
    std::vector<std::uint8_t> take() { return std::move(bytes_); }

private:
    std::vector<std::uint8_t> bytes_;
};

class Reader {
public:
    explicit Reader(const std::vector<std::uint8_t>& b) : bytes_(b) {}
    template <typename V>
    V get() {
        V v;
        get_bytes(&v, sizeof(V));
        return v;
    }
    void get_bytes(void* dst, std::size_t n) {
        if (n > bytes_.size() - pos_) throw IoError("checkpoint truncated at byte " + std::to_string(pos_));
        std::memcpy(dst, bytes_.data() + pos_, n);
        pos_ += n;
    }
    bool done() const { return pos_ == bytes_.size(); }

private:
    const std::vector<std::uint8_t>& bytes_;
    std::size_t pos_ = 0;
};

}  // namespace

const NamedTensor* Checkpoint::find(const std::string& name) const {
    for (const auto& t : tensors) {
        if (t.name == name) return &t;
    }
    return nullptr;
}

const NamedTensor& Checkpoint::at(const std::string& name) const {
    const auto* t = find(name);
    if (!t) throw StructuralError("checkpoint has no tensor named " + name);
    return *t;
}

std::vector<std::uint8_t> Checkpoint::serialize() const {
    Writer w;
    w.put_bytes(kMagic, sizeof(kMagic));
    w.put<std::uint32_t>(kFormatVersion);
    const std::string meta = metadata.dump();
    w.put<std::uint64_t>(meta.size());
    w.put_bytes(meta.data(), meta.size());
    w.put<std::uint32_t>(static_cast<std::uint32_t>(tensors.size()));
    for (const auto& t : tensors) {
        std::uint64_t count = 1;
        for (auto d : t.shape) count *= d;
        if (count != t.data.size()) throw StructuralError("tensor " + t.name + ": shape does not match payload");
        w.put<std::uint32_t>(static_cast<std::uint32_t>(t.name.size()));
        w.put_bytes(t.name.data(), t.name.size());
        w.put<std::uint32_t>(static_cast<std::uint32_t>(t.shape.size()));
        for (auto d : t.shape) w.put<std::uint64_t>(d);
        w.put_bytes(t.data.data(), t.data.size() * sizeof(float));
    }
    return w.take();
}

Checkpoint Checkpoint::deserialize(const std::vector<std::uint8_t>& bytes) {
    Reader r(bytes);
    char magic[8];
    r.get_bytes(magic, sizeof(magic));
    if (std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) throw IoError("not a checkpoint (bad magic)");
    const auto version = r.get<std::uint32_t>();
    if (version != kFormatVersion) throw IoError("unsupported checkpoint version " + std::to_string(version));
    Checkpoint ck;
    const auto meta_len = r.get<std::uint64_t>();
    if (meta_len > bytes.size()) throw IoError("checkpoint metadata length out of range");
    std::string meta(meta_len, '\0');
    r.get_bytes(meta.data(), meta_len);
    try {
        ck.metadata = nlohmann::json::parse(meta);
    } catch (const nlohmann::json::exception& e) {
        throw IoError(std::string("checkpoint metadata: ") + e.what());
    }
    const auto n = r.get<std::uint32_t>();
    for (std::uint32_t i = 0; i < n; ++i) {
        NamedTensor t;
        t.name.resize(r.get<std::uint32_t>());
        r.get_bytes(t.name.data(), t.name.size());
        const auto rank = r.get<std::uint32_t>();
        std::uint64_t count = 1;
        for (std::uint32_t d = 0; d < rank; ++d) {
            t.shape.push_back(r.get<std::uint64_t>());
            count *= t.shape.back();
        }
        if (count > bytes.size()) throw IoError("tensor " + t.name + ": payload larger than file");
        t.data.resize(count);
        r.get_bytes(t.data.data(), count * sizeof(float));
        ck.tensors.push_back(std::move(t));
    }
    if (!r.done()) throw IoError("trailing bytes after checkpoint payload");
    return ck;
}

void Checkpoint::save(const std::filesystem::path& path) const {
    const auto bytes = serialize();
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("short write to " + path.string());
}

Checkpoint Checkpoint::load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::vector<std::uint8_t> bytes{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
    return deserialize(bytes);
}

std::uint64_t fnv1a64(const void* data, std::size_t bytes, std::uint64_t seed) {
    const auto* p = static_cast<const std::uint8_t*>(data);
    std::uint64_t h = seed;
    for (std::size_t i = 0; i < bytes; ++i) {
        h ^= p[i];
        h *= 1099511628211ULL;
    }
    return h;
}

}  // namespace seg4d
