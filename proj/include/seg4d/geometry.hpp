#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "seg4d/frame.hpp"
#include "seg4d/tensor.hpp"

namespace seg4d {

// Approximate Euclid distance between current (rows) and previous (columns)
// coordinates, computed through the Gram expansion
//   (|c_i|^2 + |c_j|^2 - 2 c_i.c_j) / gamma^2
// and clamped at zero. Note the value is a *squared* normalized distance;
// the interpolation weights consume it without a square root.
struct CrossFrameDistances {
    Matrix<double> values;
    double gamma = 128.0;
};

CrossFrameDistances cross_frame_distances(std::span<const Vec3> current, std::span<const Vec3> previous,
                                          double gamma);

// k nearest previous-frame entries for every current point, stored flat with
// stride k. Within a point's list distances are non-decreasing; ties go to the
// smaller previous index. When the previous frame has fewer than k points
// every point gets all of them and `shortfall()` reports the gap.
struct NeighborSet {
    std::size_t k = 0;
    std::size_t num_points = 0;
    std::vector<std::uint32_t> count;  // valid entries per point
    std::vector<std::uint32_t> index;  // num_points * k
    std::vector<double> distance;      // num_points * k
    std::vector<double> weight;        // num_points * k, filled by interpolation_weights

    std::size_t shortfall() const { return num_points == 0 || count.empty() ? 0 : k - count.front(); }
    std::size_t slot(std::size_t point, std::size_t j) const { return point * k + j; }
};

// Dense reference path: row-wise selection on the full matrix.
NeighborSet knn_previous(const CrossFrameDistances& distances, std::size_t k);

// Exact kNN over a uniform bucket grid. Squared Euclidean distance times
// `scale` (1/gamma^2 for the TVI distance, 1 for metric distances). Produces
// the same NeighborSet as the dense path, including tie order.
class KnnIndex {
public:
    explicit KnnIndex(std::span<const Vec3> reference, double bucket_size = 0.0);

    std::size_t size() const { return points_.size(); }
    double bucket_size() const { return bucket_; }

    NeighborSet query(std::span<const Vec3> queries, std::size_t k, double scale = 1.0) const;

private:
    std::int64_t bucket_of(double v, int axis) const;

    std::vector<Vec3> points_;
    double bucket_ = 1.0;
    Vec3 origin_ = Vec3::Zero();
    std::array<std::int64_t, 3> dims_{1, 1, 1};
    std::vector<std::uint32_t> cell_start_;  // CSR offsets, size = cells + 1
    std::vector<std::uint32_t> cell_items_;  // point indices, ascending within a cell
};

// Grid-accelerated equivalent of knn_previous(cross_frame_distances(...), k).
NeighborSet knn_previous_grid(std::span<const Vec3> current, std::span<const Vec3> previous, double gamma,
                              std::size_t k);

// w = (alpha - min(d, alpha)) * beta, written into neighbors.weight.
NeighborSet interpolation_weights(NeighborSet neighbors, double alpha, double beta);

inline double interpolation_weight(double d, double alpha, double beta) {
    return (alpha - (d < alpha ? d : alpha)) * beta;
}

}  // namespace seg4d
