#pragma once

#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

namespace seg4d {

// Human-readable key-value configuration:
//
//   # comment
//   voxel_unit = 0.25
//   train_sequences = 10
//
// Keys are unique; malformed lines and bad values raise UsageError.
class KeyValueConfig {
public:
    KeyValueConfig() = default;

    static KeyValueConfig parse(const std::string& text, const std::string& origin = "<string>");
    static KeyValueConfig load(const std::filesystem::path& path);

    bool has(const std::string& key) const { return values_.count(key) != 0; }
    void set(const std::string& key, const std::string& value) { values_[key] = value; }
    const std::map<std::string, std::string>& entries() const { return values_; }

    std::string get_string(const std::string& key, const std::string& fallback) const;
    double get_double(const std::string& key, double fallback) const;
    long long get_int(const std::string& key, long long fallback) const;
    bool get_bool(const std::string& key, bool fallback) const;
    std::vector<double> get_doubles(const std::string& key, const std::vector<double>& fallback) const;

    // Throws UsageError naming the first key not in `known`.
    void require_known(const std::set<std::string>& known) const;

    std::string dump() const;

private:
    std::map<std::string, std::string> values_;
    std::string origin_;
};

}  // namespace seg4d
