#pragma once

#include <cstdint>
#include <set>
#include <string>
#include <vector>

namespace seg4d {

// Dense class ids 0..n-1 with an optional set of ids excluded from loss and IoU.
class ClassMap {
public:
    ClassMap() = default;
    ClassMap(std::vector<std::string> names, std::set<int> ignore_ids);

    std::size_t size() const { return names_.size(); }
    const std::vector<std::string>& names() const { return names_; }
    const std::set<int>& ignore_ids() const { return ignore_; }
    const std::string& name(int id) const { return names_.at(static_cast<std::size_t>(id)); }
    bool valid(int id) const { return id >= 0 && static_cast<std::size_t>(id) < names_.size(); }
    bool ignored(int id) const { return ignore_.count(id) != 0; }
    int id_of(const std::string& name) const;  // -1 when absent

    bool operator==(const ClassMap&) const = default;

private:
    std::vector<std::string> names_;
    std::set<int> ignore_;
};

// {ground, static-object, moving-object}; nothing ignored.
ClassMap synthetic_class_map();

// 26 entries: "unlabeled" (ignored) followed by the 25 multi-scan classes.
ClassMap semantic_kitti_multiscan_class_map();

// Raw SemanticKITTI semantic id (lower 16 bits of a .label word) to the dense
// multi-scan id. Unknown ids map to 0 (unlabeled).
int semantic_kitti_learning_map(std::uint32_t raw_semantic);

}  // namespace seg4d
