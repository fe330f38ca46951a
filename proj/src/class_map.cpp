#include "seg4d/class_map.hpp"

#include <algorithm>
#include <unordered_map>

#include "seg4d/errors.hpp"

namespace seg4d {

ClassMap::ClassMap(std::vector<std::string> names, std::set<int> ignore_ids)
    : names_(std::move(names)), ignore_(std::move(ignore_ids)) {
    for (int id : ignore_) {
        if (!valid(id)) throw InvalidInput("ignore id " + std::to_string(id) + " is not a valid class id");
    }
}

int ClassMap::id_of(const std::string& name) const {
    auto it = std::find(names_.begin(), names_.end(), name);
    return it == names_.end() ? -1 : static_cast<int>(it - names_.begin());
}

ClassMap synthetic_class_map() { return ClassMap({"ground", "static-object", "moving-object"}, {}); }

ClassMap semantic_kitti_multiscan_class_map() {
    return ClassMap({"unlabeled",           "car",
                     "bicycle",             "motorcycle",
                     "truck",               "other-vehicle",
                     "person",              "bicyclist",
                     "motorcyclist",        "road",
                     "parking",             "sidewalk",
                     "other-ground",        "building",
                     "fence",               "vegetation",
                     "trunk",               "terrain",
                     "pole",                "traffic-sign",
                     "moving-car",          "moving-bicyclist",
                     "moving-person",       "moving-motorcyclist",
                     "moving-other-vehicle", "moving-truck"},
                    {0});
}

int semantic_kitti_learning_map(std::uint32_t raw) {
    static const std::unordered_map<std::uint32_t, int> table = {
        {0, 0},    {1, 0},    {10, 1},   {11, 2},   {13, 5},   {15, 3},   {16, 5},   {18, 4},
        {20, 5},   {30, 6},   {31, 7},   {32, 8},   {40, 9},   {44, 10},  {48, 11},  {49, 12},
        {50, 13},  {51, 14},  {52, 0},   {60, 9},   {70, 15},  {71, 16},  {72, 17},  {80, 18},
        {81, 19},  {99, 0},   {252, 20}, {253, 21}, {254, 22}, {255, 23}, {256, 24}, {257, 24},
        {258, 25}, {259, 24},
    };
    auto it = table.find(raw);
    return it == table.end() ? 0 : it->second;
}

}  // namespace seg4d
