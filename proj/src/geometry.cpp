#include "seg4d/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "seg4d/errors.hpp"

namespace seg4d {
namespace {

struct Candidate {
    double d;
    std::uint32_t idx;
    bool operator<(const Candidate& o) const { return d < o.d || (d == o.d && idx < o.idx); }
};

// Keeps the best `k` candidates sorted ascending.
class TopK {
public:
    explicit TopK(std::size_t k) : k_(k) { items_.reserve(k + 1); }
    void offer(Candidate c) {
        if (items_.size() == k_ && !(c < items_.back())) return;
        auto pos = std::upper_bound(items_.begin(), items_.end(), c);
        items_.insert(pos, c);
        if (items_.size() > k_) items_.pop_back();
    }
    bool full() const { return items_.size() == k_; }
    double worst() const { return items_.back().d; }
    const std::vector<Candidate>& items() const { return items_; }
    void clear() { items_.clear(); }

private:
    std::size_t k_;
    std::vector<Candidate> items_;
};

void check_inputs(std::span<const Vec3> current, std::span<const Vec3> previous) {
    if (current.empty()) throw InvalidInput("current coordinate set is empty");
    if (previous.empty()) throw StructuralError("previous frame is empty; substitute the current frame");
    for (std::size_t i = 0; i < current.size(); ++i) {
        if (!current[i].allFinite()) throw InvalidInput("non-finite current coordinate at point " + std::to_string(i));
    }
    for (std::size_t j = 0; j < previous.size(); ++j) {
        if (!previous[j].allFinite()) throw InvalidInput("non-finite previous coordinate at point " + std::to_string(j));
    }
}

NeighborSet make_set(std::size_t num_points, std::size_t k) {
    NeighborSet set;
    set.k = k;
    set.num_points = num_points;
    set.count.assign(num_points, 0);
    set.index.assign(num_points * k, 0);
    set.distance.assign(num_points * k, 0.0);
    set.weight.assign(num_points * k, 0.0);
    return set;
}

}  // namespace

CrossFrameDistances cross_frame_distances(std::span<const Vec3> current, std::span<const Vec3> previous,
                                          double gamma) {
    if (!(gamma > 0.0)) throw InvalidInput("gamma must be positive");
    check_inputs(current, previous);
    const std::size_t n = current.size();
    const std::size_t m = previous.size();
    std::vector<double> cur_sq(n), prev_sq(m);
    for (std::size_t i = 0; i < n; ++i) cur_sq[i] = current[i].squaredNorm();
    for (std::size_t j = 0; j < m; ++j) prev_sq[j] = previous[j].squaredNorm();

    CrossFrameDistances out;
    out.gamma = gamma;
    out.values.resize(n, m);
    const double inv = 1.0 / (gamma * gamma);
    for (std::size_t i = 0; i < n; ++i) {
        auto row = out.values.row(i);
        for (std::size_t j = 0; j < m; ++j) {
            const double v = (cur_sq[i] + prev_sq[j] - 2.0 * current[i].dot(previous[j])) * inv;
            row[j] = v > 0.0 ? v : 0.0;
        }
    }
    return out;
}

NeighborSet knn_previous(const CrossFrameDistances& distances, std::size_t k) {
    if (k < 1) throw InvalidInput("k must be at least 1");
    const std::size_t n = distances.values.rows();
    const std::size_t m = distances.values.cols();
    if (m == 0) throw StructuralError("previous frame is empty; substitute the current frame");
    NeighborSet set = make_set(n, k);
    const std::size_t take = std::min(k, m);
    std::vector<Candidate> row_items(m);
    for (std::size_t i = 0; i < n; ++i) {
        auto row = distances.values.row(i);
        for (std::size_t j = 0; j < m; ++j) row_items[j] = {row[j], static_cast<std::uint32_t>(j)};
        std::partial_sort(row_items.begin(), row_items.begin() + static_cast<std::ptrdiff_t>(take), row_items.end());
        set.count[i] = static_cast<std::uint32_t>(take);
        for (std::size_t j = 0; j < take; ++j) {
            set.index[set.slot(i, j)] = row_items[j].idx;
            set.distance[set.slot(i, j)] = row_items[j].d;
        }
    }
    return set;
}

KnnIndex::KnnIndex(std::span<const Vec3> reference, double bucket_size) : points_(reference.begin(), reference.end()) {
    if (points_.empty()) throw StructuralError("cannot index an empty point set");
    Vec3 lo = points_.front(), hi = points_.front();
    for (const auto& p : points_) {
        if (!p.allFinite()) throw InvalidInput("non-finite coordinate in kNN reference set");
        lo = lo.cwiseMin(p);
        hi = hi.cwiseMax(p);
    }
    origin_ = lo;
    const Vec3 extent = hi - lo;
    const double n = static_cast<double>(points_.size());
    if (bucket_size > 0.0) {
        bucket_ = bucket_size;
    } else {
        // Surface-like scans: spacing from the horizontal footprint.
        const double area = std::max(extent.x(), 1e-9) * std::max(extent.y(), 1e-9);
        bucket_ = 2.0 * std::sqrt(area / n);
        if (!(bucket_ > 0.0) || !std::isfinite(bucket_)) bucket_ = 1.0;
        bucket_ = std::max(bucket_, 1e-6 * (1.0 + extent.maxCoeff()));
    }
    const double cap = 8.0 * n + 64.0;
    for (;;) {
        double cells = 1.0;
        for (int a = 0; a < 3; ++a) {
            dims_[a] = static_cast<std::int64_t>(std::floor(extent[a] / bucket_)) + 1;
            cells *= static_cast<double>(dims_[a]);
        }
        if (cells <= cap) break;
        bucket_ *= 1.5;
    }

    const std::size_t num_cells = static_cast<std::size_t>(dims_[0] * dims_[1] * dims_[2]);
    std::vector<std::uint32_t> cell_of(points_.size());
    cell_start_.assign(num_cells + 1, 0);
    for (std::size_t i = 0; i < points_.size(); ++i) {
        std::int64_t b[3];
        for (int a = 0; a < 3; ++a) b[a] = std::clamp<std::int64_t>(bucket_of(points_[i][a], a), 0, dims_[a] - 1);
        cell_of[i] = static_cast<std::uint32_t>((b[0] * dims_[1] + b[1]) * dims_[2] + b[2]);
        ++cell_start_[cell_of[i] + 1];
    }
    std::partial_sum(cell_start_.begin(), cell_start_.end(), cell_start_.begin());
    cell_items_.resize(points_.size());
    std::vector<std::uint32_t> fill(cell_start_.begin(), cell_start_.end() - 1);
    for (std::size_t i = 0; i < points_.size(); ++i) cell_items_[fill[cell_of[i]]++] = static_cast<std::uint32_t>(i);
}

std::int64_t KnnIndex::bucket_of(double v, int axis) const {
    return static_cast<std::int64_t>(std::floor((v - origin_[axis]) / bucket_));
}

NeighborSet KnnIndex::query(std::span<const Vec3> queries, std::size_t k, double scale) const {
    if (k < 1) throw InvalidInput("k must be at least 1");
    NeighborSet set = make_set(queries.size(), k);
    const std::size_t take = std::min(k, points_.size());
    TopK best(take);

    for (std::size_t qi = 0; qi < queries.size(); ++qi) {
        const Vec3& q = queries[qi];
        if (!q.allFinite()) throw InvalidInput("non-finite query coordinate at point " + std::to_string(qi));
        best.clear();
        std::int64_t qb[3];
        std::int64_t r_start = 0, r_end = 0;
        for (int a = 0; a < 3; ++a) {
            qb[a] = bucket_of(q[a], a);
            const std::int64_t outside = qb[a] < 0 ? -qb[a] : (qb[a] >= dims_[a] ? qb[a] - dims_[a] + 1 : 0);
            r_start = std::max(r_start, outside);
            r_end = std::max({r_end, qb[a], dims_[a] - 1 - qb[a]});
        }

        auto visit_cell = [&](std::int64_t bx, std::int64_t by, std::int64_t bz) {
            const std::size_t cell = static_cast<std::size_t>((bx * dims_[1] + by) * dims_[2] + bz);
            for (std::uint32_t s = cell_start_[cell]; s < cell_start_[cell + 1]; ++s) {
                const std::uint32_t j = cell_items_[s];
                const Vec3 diff = q - points_[j];
                const double d2 = diff.x() * diff.x() + diff.y() * diff.y() + diff.z() * diff.z();
                best.offer({d2, j});
            }
        };

        for (std::int64_t r = r_start; r <= r_end; ++r) {
            const std::int64_t x0 = std::max<std::int64_t>(qb[0] - r, 0), x1 = std::min(qb[0] + r, dims_[0] - 1);
            const std::int64_t y0 = std::max<std::int64_t>(qb[1] - r, 0), y1 = std::min(qb[1] + r, dims_[1] - 1);
            for (std::int64_t bx = x0; bx <= x1; ++bx) {
                for (std::int64_t by = y0; by <= y1; ++by) {
                    const bool xy_shell = std::abs(bx - qb[0]) == r || std::abs(by - qb[1]) == r;
                    if (xy_shell) {
                        const std::int64_t z0 = std::max<std::int64_t>(qb[2] - r, 0);
                        const std::int64_t z1 = std::min(qb[2] + r, dims_[2] - 1);
                        for (std::int64_t bz = z0; bz <= z1; ++bz) visit_cell(bx, by, bz);
                    } else {
                        if (qb[2] - r >= 0 && qb[2] - r < dims_[2]) visit_cell(bx, by, qb[2] - r);
                        if (r > 0 && qb[2] + r >= 0 && qb[2] + r < dims_[2]) visit_cell(bx, by, qb[2] + r);
                    }
                }
            }
            if (best.full()) {
                // Unvisited points lie farther than r buckets along some axis.
                const double bound = static_cast<double>(r) * bucket_;
                if (best.worst() < bound * bound * (1.0 - 1e-9)) break;
            }
        }

        set.count[qi] = static_cast<std::uint32_t>(take);
        const auto& items = best.items();
        for (std::size_t j = 0; j < take; ++j) {
            set.index[set.slot(qi, j)] = items[j].idx;
            set.distance[set.slot(qi, j)] = items[j].d * scale;
        }
    }
    return set;
}

NeighborSet knn_previous_grid(std::span<const Vec3> current, std::span<const Vec3> previous, double gamma,
                              std::size_t k) {
    if (!(gamma > 0.0)) throw InvalidInput("gamma must be positive");
    check_inputs(current, previous);
    KnnIndex index(previous);
    return index.query(current, k, 1.0 / (gamma * gamma));
}

NeighborSet interpolation_weights(NeighborSet neighbors, double alpha, double beta) {
    if (!(alpha > 0.0) || !(beta > 0.0)) throw InvalidInput("alpha and beta must be positive");
    for (std::size_t i = 0; i < neighbors.num_points; ++i) {
        for (std::size_t j = 0; j < neighbors.count[i]; ++j) {
            const std::size_t s = neighbors.slot(i, j);
            neighbors.weight[s] = interpolation_weight(neighbors.distance[s], alpha, beta);
        }
    }
    return neighbors;
}

}  // namespace seg4d
