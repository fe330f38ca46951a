#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

namespace seg4d {

// Versioned binary container of named float32 tensors plus JSON metadata.
//
// Byte layout (all integers little-endian):
//   8 bytes   magic "SEG4DCKP"
//   u32       format version (currently 1)
//   u64       metadata length L, then L bytes of UTF-8 JSON
//   u32       tensor count N, then N records of
//               u32 name length, name bytes,
//               u32 rank R, R x u64 dims,
//               prod(dims) x float32, row-major
struct NamedTensor {
    std::string name;
    std::vector<std::uint64_t> shape;
    std::vector<float> data;

    bool operator==(const NamedTensor&) const = default;
};

struct Checkpoint {
    static constexpr std::uint32_t kFormatVersion = 1;

    nlohmann::json metadata = nlohmann::json::object();
    std::vector<NamedTensor> tensors;

    const NamedTensor* find(const std::string& name) const;
    const NamedTensor& at(const std::string& name) const;

    std::vector<std::uint8_t> serialize() const;
    static Checkpoint deserialize(const std::vector<std::uint8_t>& bytes);

    void save(const std::filesystem::path& path) const;
    static Checkpoint load(const std::filesystem::path& path);
};

// FNV-1a over raw bytes; used for bit-identity checks.
std::uint64_t fnv1a64(const void* data, std::size_t bytes, std::uint64_t seed = 1469598103934665603ULL);

}  // namespace seg4d
