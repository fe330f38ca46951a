#include "seg4d/voxel_grid.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

namespace seg4d {

VoxelKey quantize(const Vec3& coord, double unit) {
    VoxelKey key{};
    for (int a = 0; a < 3; ++a) {
        const double q = std::floor(coord[a] / unit);
        if (q < std::numeric_limits<std::int32_t>::min() || q > std::numeric_limits<std::int32_t>::max()) {
            throw InvalidInput("coordinate out of voxel index range");
        }
        key[a] = static_cast<std::int32_t>(q);
    }
    return key;
}

std::vector<Vec3> VoxelGrid::cell_coords() const {
    std::vector<Vec3> out;
    out.reserve(keys.size());
    for (const auto& k : keys) out.emplace_back(k[0], k[1], k[2]);
    return out;
}

Vec3 VoxelGrid::cell_center(std::size_t cell) const {
    const auto& k = keys[cell];
    return Vec3((k[0] + 0.5) * unit, (k[1] + 0.5) * unit, (k[2] + 0.5) * unit);
}

VoxelGrid voxelize(const Frame& frame, double unit) {
    if (!(unit > 0.0) || !std::isfinite(unit)) throw InvalidInput("voxel unit must be positive");
    if (frame.size() == 0) throw InvalidInput("cannot voxelize an empty frame");
    if (frame.features.rows() != frame.size()) throw InvalidInput("frame features/coords length mismatch");
    if (frame.labels && frame.labels->size() != frame.size()) throw InvalidInput("frame labels/coords length mismatch");

    const std::size_t n = frame.size();
    std::vector<VoxelKey> point_keys(n);
    for (std::size_t i = 0; i < n; ++i) {
        const Vec3& c = frame.coords[i];
        if (!c.allFinite()) throw InvalidInput("non-finite coordinate at point " + std::to_string(i));
        point_keys[i] = quantize(c, unit);
    }

    // Stable sort of point indices by key gives sorted cells and ascending members.
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return point_keys[a] < point_keys[b]; });

    VoxelGrid grid;
    grid.unit = unit;
    grid.point_cell.assign(n, 0);
    for (std::size_t pos = 0; pos < n; ++pos) {
        const std::size_t p = order[pos];
        if (grid.keys.empty() || grid.keys.back() != point_keys[p]) {
            grid.keys.push_back(point_keys[p]);
            grid.members.emplace_back();
        }
        grid.members.back().push_back(p);
        grid.point_cell[p] = grid.keys.size() - 1;
    }

    const std::size_t width = frame.features.cols();
    grid.features.resize(grid.keys.size(), width);
    grid.index.reserve(grid.keys.size());
    std::vector<int> labels;
    if (frame.labels) labels.resize(grid.keys.size());

    for (std::size_t cell = 0; cell < grid.keys.size(); ++cell) {
        grid.index.emplace(grid.keys[cell], cell);
        const auto& mem = grid.members[cell];
        std::vector<double> acc(width, 0.0);
        for (std::size_t p : mem) {
            auto f = frame.features.row(p);
            for (std::size_t c = 0; c < width; ++c) acc[c] += f[c];
        }
        for (std::size_t c = 0; c < width; ++c) {
            grid.features(cell, c) = static_cast<float>(acc[c] / static_cast<double>(mem.size()));
        }
        if (frame.labels) {
            std::map<int, std::size_t> votes;
            for (std::size_t p : mem) ++votes[(*frame.labels)[p]];
            int best = votes.begin()->first;
            std::size_t best_count = 0;
            for (const auto& [id, count] : votes) {
                if (count > best_count) {  // ascending id order keeps the smallest id on ties
                    best = id;
                    best_count = count;
                }
            }
            labels[cell] = best;
        }
    }
    if (frame.labels) grid.labels = std::move(labels);
    return grid;
}

Matrix<float> devoxelize(const VoxelGrid& grid, const std::map<VoxelKey, std::vector<float>>& per_cell) {
    std::size_t width = per_cell.empty() ? 0 : per_cell.begin()->second.size();
    Matrix<float> cells(grid.size(), width);
    for (std::size_t cell = 0; cell < grid.size(); ++cell) {
        auto it = per_cell.find(grid.keys[cell]);
        if (it == per_cell.end()) {
            const auto& k = grid.keys[cell];
            throw StructuralError("devoxelize: no value for cell (" + std::to_string(k[0]) + ", " +
                                  std::to_string(k[1]) + ", " + std::to_string(k[2]) + ")");
        }
        if (it->second.size() != width) throw StructuralError("devoxelize: inconsistent cell value widths");
        std::copy(it->second.begin(), it->second.end(), cells.row(cell).begin());
    }
    return devoxelize(grid, cells);
}

}  // namespace seg4d
