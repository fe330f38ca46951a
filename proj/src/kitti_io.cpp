#include "seg4d/kitti_io.hpp"

#include <algorithm>
#include <bit>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>

#include "seg4d/errors.hpp"

namespace seg4d::io {
namespace {

static_assert(std::endian::native == std::endian::little, "scan/label readers assume a little-endian host");

std::vector<char> slurp(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void dump(const std::filesystem::path& path, const void* data, std::size_t bytes) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out.write(static_cast<const char*>(data), static_cast<std::streamsize>(bytes));
    if (!out) throw IoError("short write to " + path.string());
}

}  // namespace

Scan read_scan(const std::filesystem::path& path) {
    const auto bytes = slurp(path);
    if (bytes.size() % (4 * sizeof(float)) != 0) {
        throw IoError(path.string() + ": size " + std::to_string(bytes.size()) + " is not a multiple of 16");
    }
    const std::size_t n = bytes.size() / (4 * sizeof(float));
    std::vector<float> raw(n * 4);
    std::memcpy(raw.data(), bytes.data(), bytes.size());
    Scan scan;
    scan.coords.reserve(n);
    scan.remission.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        scan.coords.emplace_back(raw[4 * i], raw[4 * i + 1], raw[4 * i + 2]);
        scan.remission.push_back(raw[4 * i + 3]);
    }
    return scan;
}

void write_scan(const std::filesystem::path& path, const Scan& scan) {
    if (scan.coords.size() != scan.remission.size()) throw InvalidInput("scan coords/remission length mismatch");
    std::vector<float> raw(scan.coords.size() * 4);
    for (std::size_t i = 0; i < scan.coords.size(); ++i) {
        raw[4 * i] = static_cast<float>(scan.coords[i].x());
        raw[4 * i + 1] = static_cast<float>(scan.coords[i].y());
        raw[4 * i + 2] = static_cast<float>(scan.coords[i].z());
        raw[4 * i + 3] = scan.remission[i];
    }
    dump(path, raw.data(), raw.size() * sizeof(float));
}

std::vector<std::uint32_t> read_labels(const std::filesystem::path& path) {
    const auto bytes = slurp(path);
    if (bytes.size() % sizeof(std::uint32_t) != 0) {
        throw IoError(path.string() + ": size is not a multiple of 4");
    }
    std::vector<std::uint32_t> words(bytes.size() / sizeof(std::uint32_t));
    std::memcpy(words.data(), bytes.data(), bytes.size());
    for (auto& w : words) w &= 0xFFFFu;
    return words;
}

void write_labels(const std::filesystem::path& path, const std::vector<std::uint32_t>& semantic,
                  const std::vector<std::uint32_t>& instance) {
    if (!instance.empty() && instance.size() != semantic.size()) {
        throw InvalidInput("label/instance length mismatch");
    }
    std::vector<std::uint32_t> words(semantic.size());
    for (std::size_t i = 0; i < semantic.size(); ++i) {
        if (semantic[i] > 0xFFFFu) throw InvalidInput("semantic id does not fit in 16 bits");
        const std::uint32_t inst = instance.empty() ? 0u : instance[i];
        words[i] = (inst << 16) | semantic[i];
    }
    dump(path, words.data(), words.size() * sizeof(std::uint32_t));
}

std::vector<Pose> read_poses(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    std::vector<Pose> poses;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        std::istringstream ss(line);
        Pose p = Pose::Identity();
        for (int r = 0; r < 3; ++r) {
            for (int c = 0; c < 4; ++c) {
                if (!(ss >> p(r, c))) {
                    throw IoError(path.string() + ":" + std::to_string(line_no) + ": expected 12 numbers");
                }
            }
        }
        poses.push_back(p);
    }
    return poses;
}

void write_poses(const std::filesystem::path& path, const std::vector<Pose>& poses) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    char buf[64];
    for (const auto& p : poses) {
        for (int r = 0; r < 3; ++r) {
            for (int c = 0; c < 4; ++c) {
                std::snprintf(buf, sizeof(buf), "%.17g", p(r, c));
                out << buf << ((r == 2 && c == 3) ? '\n' : ' ');
            }
        }
    }
}

Frame frame_from_scan(const Scan& scan, const Pose& pose, int frame_index) {
    Frame f;
    f.coords = scan.coords;
    f.features.resize(scan.coords.size(), 1);
    for (std::size_t i = 0; i < scan.remission.size(); ++i) f.features(i, 0) = scan.remission[i];
    f.pose = pose;
    f.frame_index = frame_index;
    return f;
}

Scan scan_from_frame(const Frame& frame) {
    Scan s;
    s.coords = frame.coords;
    s.remission.resize(frame.size(), 0.0f);
    if (frame.features.cols() > 0) {
        for (std::size_t i = 0; i < frame.size(); ++i) s.remission[i] = frame.features(i, 0);
    }
    return s;
}

std::string frame_file_stem(int frame_index) {
    if (frame_index < 0 || frame_index > 999999) throw InvalidInput("frame index out of file-name range");
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%06d", frame_index);
    return buf;
}

std::vector<Frame> read_sequence(const std::filesystem::path& dir, const std::function<int(std::uint32_t)>& map_label) {
    namespace fs = std::filesystem;
    if (!fs::is_directory(dir / "velodyne")) throw IoError(dir.string() + ": no velodyne directory");
    std::vector<fs::path> scans;
    for (const auto& e : fs::directory_iterator(dir / "velodyne")) {
        if (e.path().extension() == ".bin") scans.push_back(e.path());
    }
    std::sort(scans.begin(), scans.end());
    std::vector<Pose> poses;
    if (fs::exists(dir / "poses.txt")) {
        poses = read_poses(dir / "poses.txt");
        if (poses.size() < scans.size()) {
            throw IoError(dir.string() + ": " + std::to_string(poses.size()) + " poses for " +
                          std::to_string(scans.size()) + " scans");
        }
    }
    const bool labelled = fs::is_directory(dir / "labels");
    std::vector<Frame> frames;
    frames.reserve(scans.size());
    for (std::size_t t = 0; t < scans.size(); ++t) {
        const std::string stem = scans[t].stem().string();
        int index = 0;
        try {
            std::size_t pos = 0;
            index = std::stoi(stem, &pos);
            if (pos != stem.size()) throw std::invalid_argument(stem);
        } catch (const std::exception&) {
            throw IoError(scans[t].string() + ": scan file name is not a frame number");
        }
        Frame f = frame_from_scan(read_scan(scans[t]), poses.empty() ? Pose::Identity() : poses[t], index);
        if (labelled) {
            const auto raw = read_labels(dir / "labels" / (stem + ".label"));
            if (raw.size() != f.size()) {
                throw IoError(stem + ": " + std::to_string(raw.size()) + " labels for " + std::to_string(f.size()) +
                              " points");
            }
            std::vector<int> labels(raw.size());
            for (std::size_t i = 0; i < raw.size(); ++i) {
                labels[i] = map_label ? map_label(raw[i]) : static_cast<int>(raw[i]);
            }
            f.labels = std::move(labels);
        }
        f.validate();
        frames.push_back(std::move(f));
    }
    return frames;
}

void write_sequence(const std::filesystem::path& dir, const std::vector<Frame>& frames) {
    namespace fs = std::filesystem;
    fs::create_directories(dir / "velodyne");
    std::vector<Pose> poses;
    bool labelled = false;
    for (const auto& f : frames) labelled = labelled || f.labels.has_value();
    if (labelled) fs::create_directories(dir / "labels");
    for (const auto& f : frames) {
        const std::string stem = frame_file_stem(f.frame_index);
        write_scan(dir / "velodyne" / (stem + ".bin"), scan_from_frame(f));
        if (labelled) {
            if (!f.labels) throw InvalidInput("write_sequence: frame " + stem + " has no labels");
            std::vector<std::uint32_t> raw(f.labels->begin(), f.labels->end());
            write_labels(dir / "labels" / (stem + ".label"), raw);
        }
        poses.push_back(f.pose);
    }
    write_poses(dir / "poses.txt", poses);
}

void write_predictions(const std::filesystem::path& dir, int frame_index, const std::vector<int>& classes) {
    std::filesystem::create_directories(dir);
    std::vector<std::uint32_t> raw(classes.size());
    for (std::size_t i = 0; i < classes.size(); ++i) {
        if (classes[i] < 0) throw InvalidInput("write_predictions: negative class id");
        raw[i] = static_cast<std::uint32_t>(classes[i]);
    }
    write_labels(dir / (frame_file_stem(frame_index) + ".label"), raw);
}

std::vector<int> read_predictions(const std::filesystem::path& file) {
    const auto raw = read_labels(file);
    return std::vector<int>(raw.begin(), raw.end());
}

}  // namespace seg4d::io
