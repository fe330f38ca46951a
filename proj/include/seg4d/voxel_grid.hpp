#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <unordered_map>
#include <vector>

#include "seg4d/errors.hpp"
#include "seg4d/frame.hpp"
#include "seg4d/tensor.hpp"

namespace seg4d {

using VoxelKey = std::array<std::int32_t, 3>;

struct VoxelKeyHash {
    std::size_t operator()(const VoxelKey& k) const noexcept {
        // Classic three-prime spatial hash; deterministic across runs.
        const auto x = static_cast<std::uint64_t>(static_cast<std::uint32_t>(k[0])) * 73856093ULL;
        const auto y = static_cast<std::uint64_t>(static_cast<std::uint32_t>(k[1])) * 19349669ULL;
        const auto z = static_cast<std::uint64_t>(static_cast<std::uint32_t>(k[2])) * 83492791ULL;
        return static_cast<std::size_t>(x ^ y ^ z);
    }
};

// floor(coord / unit) per axis.
VoxelKey quantize(const Vec3& coord, double unit);

// Sparse voxelization of one frame. Cells are stored in ascending lexicographic
// key order; `index` maps a key back to its row. Every point belongs to exactly
// one cell (`point_cell`), and `members` lists the points of each cell in
// ascending order.
struct VoxelGrid {
    double unit = 0.0;
    std::vector<VoxelKey> keys;
    Matrix<float> features;  // mean of member features
    std::vector<std::vector<std::size_t>> members;
    std::optional<std::vector<int>> labels;  // majority vote, ties -> smallest id
    std::vector<std::size_t> point_cell;
    std::unordered_map<VoxelKey, std::size_t, VoxelKeyHash> index;

    std::size_t size() const { return keys.size(); }
    std::size_t point_count() const { return point_cell.size(); }
    std::optional<std::size_t> find(const VoxelKey& key) const {
        auto it = index.find(key);
        if (it == index.end()) return std::nullopt;
        return it->second;
    }
    // Integer cell coordinates as doubles (rows follow `keys`).
    std::vector<Vec3> cell_coords() const;
    // Metric centre of a cell.
    Vec3 cell_center(std::size_t cell) const;
};

VoxelGrid voxelize(const Frame& frame, double unit);

// Nearest-cell copy: point p receives row point_cell[p] of `per_cell`.
template <typename T>
Matrix<T> devoxelize(const VoxelGrid& grid, const Matrix<T>& per_cell) {
    if (per_cell.rows() != grid.size()) {
        throw StructuralError("devoxelize: " + std::to_string(per_cell.rows()) + " cell values for " +
                              std::to_string(grid.size()) + " cells");
    }
    Matrix<T> out(grid.point_count(), per_cell.cols());
    for (std::size_t p = 0; p < grid.point_count(); ++p) {
        auto src = per_cell.row(grid.point_cell[p]);
        std::copy(src.begin(), src.end(), out.row(p).begin());
    }
    return out;
}

// Adjoint of devoxelize: sums point rows into their cells.
template <typename T>
Matrix<T> devoxelize_backward(const VoxelGrid& grid, const Matrix<T>& per_point_grad) {
    Matrix<T> out(grid.size(), per_point_grad.cols());
    for (std::size_t p = 0; p < grid.point_count(); ++p) {
        auto dst = out.row(grid.point_cell[p]);
        auto src = per_point_grad.row(p);
        for (std::size_t c = 0; c < src.size(); ++c) dst[c] += src[c];
    }
    return out;
}

// Keyed variant; throws StructuralError naming the first cell without a value.
Matrix<float> devoxelize(const VoxelGrid& grid, const std::map<VoxelKey, std::vector<float>>& per_cell);

}  // namespace seg4d
