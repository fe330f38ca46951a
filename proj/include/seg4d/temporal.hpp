#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "seg4d/errors.hpp"
#include "seg4d/geometry.hpp"
#include "seg4d/mlp.hpp"
#include "seg4d/tensor.hpp"

namespace seg4d {

// ---------------------------------------------------------------------------
// Cross-frame global attention: channel-wise max-pool over the previous
// frame's features, an mlp, and a sigmoid give one mask that scales every
// current-frame feature row.
// ---------------------------------------------------------------------------

template <typename T>
struct CfgaCache {
    Matrix<T> current;
    Matrix<T> mask;  // 1 x C
    std::vector<std::size_t> argmax;
    std::size_t previous_rows = 0;
    MlpCache<T> mlp;
};

template <typename T>
Matrix<T> cfga_forward(const Matrix<T>& current, const Matrix<T>& previous, const Mlp<T>& mlp,
                       std::type_identity_t<CfgaCache<T>>* cache = nullptr) {
    const std::size_t width = current.cols();
    if (previous.cols() != width || mlp.input_width() != width || mlp.output_width() != width) {
        throw StructuralError("cfga: channel widths differ (current " + std::to_string(width) + ", previous " +
                              std::to_string(previous.cols()) + ", mlp " + std::to_string(mlp.input_width()) +
                              "->" + std::to_string(mlp.output_width()) + ")");
    }
    if (previous.rows() == 0) throw StructuralError("cfga: previous frame has no features");

    Matrix<T> pooled(1, width);
    std::vector<std::size_t> argmax(width, 0);
    for (std::size_t c = 0; c < width; ++c) pooled(0, c) = previous(0, c);
    for (std::size_t r = 1; r < previous.rows(); ++r) {
        auto row = previous.row(r);
        for (std::size_t c = 0; c < width; ++c) {
            if (row[c] > pooled(0, c)) {
                pooled(0, c) = row[c];
                argmax[c] = r;
            }
        }
    }
    MlpCache<T> local;
    Matrix<T> mask = mlp_forward(mlp, pooled, cache ? &cache->mlp : &local);
    for (auto& v : mask.storage()) v = T(1) / (T(1) + std::exp(-v));

    Matrix<T> out(current.rows(), width);
    for (std::size_t r = 0; r < current.rows(); ++r) {
        auto src = current.row(r);
        auto dst = out.row(r);
        for (std::size_t c = 0; c < width; ++c) dst[c] = src[c] * mask(0, c);
    }
    if (cache) {
        cache->current = current;
        cache->mask = mask;
        cache->argmax = std::move(argmax);
        cache->previous_rows = previous.rows();
    }
    return out;
}

template <typename T>
struct CfgaGrads {
    Matrix<T> d_current;
    Matrix<T> d_previous;
};

template <typename T>
CfgaGrads<T> cfga_backward(Mlp<T>& mlp, const CfgaCache<T>& cache, const Matrix<T>& upstream) {
    const std::size_t width = cache.mask.cols();
    CfgaGrads<T> g;
    g.d_current.resize(upstream.rows(), width);
    Matrix<T> d_mask(1, width);
    for (std::size_t r = 0; r < upstream.rows(); ++r) {
        auto up = upstream.row(r);
        auto cur = cache.current.row(r);
        auto dc = g.d_current.row(r);
        for (std::size_t c = 0; c < width; ++c) {
            dc[c] = up[c] * cache.mask(0, c);
            d_mask(0, c) += up[c] * cur[c];
        }
    }
    for (std::size_t c = 0; c < width; ++c) {
        const T m = cache.mask(0, c);
        d_mask(0, c) *= m * (T(1) - m);
    }
    Matrix<T> d_pooled = mlp_backward(mlp, cache.mlp, d_mask);
    g.d_previous.resize(cache.previous_rows, width);
    for (std::size_t c = 0; c < width; ++c) g.d_previous(cache.argmax[c], c) += d_pooled(0, c);
    return g;
}

// ---------------------------------------------------------------------------
// Temporal variation-aware interpolation. For current point i with weighted
// previous neighbours j:
//   v_ji = ReLU(mlp([f_prev_j, f_cur_i - f_prev_j]))
//   h_i  = sum_j w_ji * v_ji
// The mlp's last layer carries the ReLU. Edges with zero weight contribute
// nothing and are skipped.
// ---------------------------------------------------------------------------

struct TviConfig {
    std::size_t k = 5;
    double alpha = 0.5;
    double beta = 2.0;
    double gamma = 128.0;
};

template <typename T>
struct TviCache {
    std::vector<std::uint32_t> edge_point;
    std::vector<std::uint32_t> edge_prev;
    std::vector<T> edge_weight;
    std::size_t current_rows = 0;
    std::size_t previous_rows = 0;
    MlpCache<T> mlp;
};

template <typename T>
Matrix<T> tvi_forward(const NeighborSet& neighbors, const Matrix<T>& f_prev, const Matrix<T>& f_cur,
                      const Mlp<T>& mlp, std::type_identity_t<TviCache<T>>* cache = nullptr,
                      std::vector<std::size_t>* empty_points = nullptr) {
    const std::size_t width = f_cur.cols();
    if (f_prev.cols() != width) throw StructuralError("tvi: previous/current feature widths differ");
    if (mlp.input_width() != 2 * width) {
        throw StructuralError("tvi: mlp input width must be twice the feature width");
    }
    if (neighbors.num_points != f_cur.rows()) throw StructuralError("tvi: neighbour set does not match current frame");

    std::vector<std::uint32_t> edge_point, edge_prev;
    std::vector<T> edge_weight;
    for (std::size_t i = 0; i < neighbors.num_points; ++i) {
        if (neighbors.count[i] == 0 && empty_points) empty_points->push_back(i);
        for (std::size_t j = 0; j < neighbors.count[i]; ++j) {
            const std::size_t s = neighbors.slot(i, j);
            if (neighbors.index[s] >= f_prev.rows()) throw StructuralError("tvi: neighbour index out of range");
            const T w = static_cast<T>(neighbors.weight[s]);
            if (w == T(0)) continue;
            edge_point.push_back(static_cast<std::uint32_t>(i));
            edge_prev.push_back(neighbors.index[s]);
            edge_weight.push_back(w);
        }
    }

    Matrix<T> h(f_cur.rows(), mlp.output_width());
    if (!edge_point.empty()) {
        Matrix<T> in(edge_point.size(), 2 * width);
        for (std::size_t e = 0; e < edge_point.size(); ++e) {
            auto prev = f_prev.row(edge_prev[e]);
            auto cur = f_cur.row(edge_point[e]);
            auto dst = in.row(e);
            for (std::size_t c = 0; c < width; ++c) {
                dst[c] = prev[c];
                dst[width + c] = cur[c] - prev[c];
            }
        }
        MlpCache<T> local;
        Matrix<T> v = mlp_forward(mlp, in, cache ? &cache->mlp : &local);
        for (std::size_t e = 0; e < edge_point.size(); ++e) {
            auto src = v.row(e);
            auto dst = h.row(edge_point[e]);
            for (std::size_t c = 0; c < src.size(); ++c) dst[c] += edge_weight[e] * src[c];
        }
    }
    if (cache) {
        cache->edge_point = std::move(edge_point);
        cache->edge_prev = std::move(edge_prev);
        cache->edge_weight = std::move(edge_weight);
        cache->current_rows = f_cur.rows();
        cache->previous_rows = f_prev.rows();
    }
    return h;
}

template <typename T>
struct TviGrads {
    Matrix<T> d_previous;
    Matrix<T> d_current;
};

template <typename T>
TviGrads<T> tvi_backward(Mlp<T>& mlp, const TviCache<T>& cache, const Matrix<T>& upstream) {
    const std::size_t width = mlp.input_width() / 2;
    TviGrads<T> g;
    g.d_previous.resize(cache.previous_rows, width);
    g.d_current.resize(cache.current_rows, width);
    const std::size_t edges = cache.edge_point.size();
    if (edges == 0) return g;
    Matrix<T> dv(edges, mlp.output_width());
    for (std::size_t e = 0; e < edges; ++e) {
        auto up = upstream.row(cache.edge_point[e]);
        auto dst = dv.row(e);
        for (std::size_t c = 0; c < dst.size(); ++c) dst[c] = cache.edge_weight[e] * up[c];
    }
    Matrix<T> din = mlp_backward(mlp, cache.mlp, dv);
    for (std::size_t e = 0; e < edges; ++e) {
        auto src = din.row(e);
        auto dp = g.d_previous.row(cache.edge_prev[e]);
        auto dc = g.d_current.row(cache.edge_point[e]);
        for (std::size_t c = 0; c < width; ++c) {
            dp[c] += src[c] - src[width + c];
            dc[c] += src[width + c];
        }
    }
    return g;
}

// ---------------------------------------------------------------------------
// Temporal graph: directed edges from the k nearest previous points to each
// current point, at continuous resolution.
//   offset = tanh(c_prev - c_cur), relpos = 1 - |offset| (per axis, in (0, 1])
// ---------------------------------------------------------------------------

struct TemporalGraph {
    std::size_t k = 0;
    std::size_t num_points = 0;
    std::vector<std::uint32_t> count;
    std::vector<std::uint32_t> index;   // num_points * k, previous-point ids
    std::vector<double> sq_distance;    // metric squared distance
    std::vector<Vec3> offset;
    std::vector<Vec3> relpos;

    std::size_t slot(std::size_t point, std::size_t j) const { return point * k + j; }
    std::size_t edge_count() const {
        std::size_t n = 0;
        for (auto c : count) n += c;
        return n;
    }
};

// 1 - |tanh(x)| evaluated as 2 / (exp(2|x|) + 1), which stays positive far
// beyond the point where tanh rounds to 1.
inline double relative_position_weight(double x) { return 2.0 / (std::exp(2.0 * std::abs(x)) + 1.0); }

TemporalGraph build_temporal_graph(std::span<const Vec3> current, std::span<const Vec3> previous, std::size_t k);

// ---------------------------------------------------------------------------
// Temporal voxel-point refiner.
//   e_j  = tanh(mlp_edge(relpos_j))
//   f'_i = f_i + max_j (e_j * mlp_msg([y_prev_j, y_cur_i - y_prev_j]))   (channel-wise)
//   l'_i = l_i + mlp_out(f'_i)
// ---------------------------------------------------------------------------

template <typename T>
struct TvprParams {
    Mlp<T> edge;  // 3 -> hidden -> F
    Mlp<T> msg;   // 2C -> hidden -> F
    Mlp<T> out;   // F -> C, final layer zero-initialised
    std::size_t k = 5;

    std::size_t feature_width() const { return out.input_width(); }
    std::size_t num_classes() const { return out.output_width(); }
    std::size_t parameter_count() const { return edge.parameter_count() + msg.parameter_count() + out.parameter_count(); }

    std::vector<Parameter<T>*> parameters() {
        std::vector<Parameter<T>*> all;
        for (auto* m : {&edge, &msg, &out}) {
            auto p = m->parameters();
            all.insert(all.end(), p.begin(), p.end());
        }
        return all;
    }
    std::vector<const Parameter<T>*> parameters() const {
        std::vector<const Parameter<T>*> all;
        for (const auto* m : {&edge, &msg, &out}) {
            auto p = m->parameters();
            all.insert(all.end(), p.begin(), p.end());
        }
        return all;
    }
    void zero_grad() {
        for (auto* p : parameters()) p->zero_grad();
    }

    template <typename Rng>
    static TvprParams make(std::size_t classes, std::size_t features, std::size_t hidden, std::size_t k, Rng& rng) {
        TvprParams p;
        p.edge = Mlp<T>("tvpr.edge", {3, hidden, features}, {Activation::Relu, Activation::Tanh});
        p.msg = Mlp<T>("tvpr.msg", {2 * classes, hidden, features}, {Activation::Relu, Activation::Identity});
        p.out = Mlp<T>("tvpr.out", {features, classes}, {Activation::Identity});
        p.edge.init(rng);
        p.msg.init(rng);
        p.out.init(rng);
        p.out.zero_final_layer();
        p.k = k;
        return p;
    }

    template <typename U>
    TvprParams<U> cast() const {
        TvprParams<U> o;
        o.edge = edge.template cast<U>();
        o.msg = msg.template cast<U>();
        o.out = out.template cast<U>();
        o.k = k;
        return o;
    }
};

template <typename T>
struct TvprCache {
    std::vector<std::uint32_t> edge_point;
    std::vector<std::uint32_t> edge_prev;
    Matrix<T> edge_weight;   // e, E x F
    Matrix<T> message_raw;   // mlp_msg output, E x F
    std::vector<std::uint32_t> argmax;  // per (point, channel): edge id, or UINT32_MAX when no edges
    std::size_t previous_rows = 0;
    MlpCache<T> edge_cache;
    MlpCache<T> msg_cache;
    MlpCache<T> out_cache;
};

template <typename T>
void check_probability_rows(const Matrix<T>& probs, const char* what) {
    for (std::size_t i = 0; i < probs.rows(); ++i) {
        double s = 0.0;
        for (T v : probs.row(i)) s += static_cast<double>(v);
        if (!(std::abs(s - 1.0) <= 1e-6)) {
            throw InvalidInput(std::string("tvpr: ") + what + " row " + std::to_string(i) + " sums to " +
                               std::to_string(s));
        }
    }
}

namespace detail {

// Refines points [begin, end). Writes rows begin..end of `refined`.
template <typename T>
void tvpr_range(const TemporalGraph& graph, const Matrix<T>& probs_prev, const Matrix<T>& probs_cur,
                const Matrix<T>& logits, const Matrix<T>& feats, const TvprParams<T>& p, std::size_t begin,
                std::size_t end, Matrix<T>& refined, TvprCache<T>* cache) {
    const std::size_t classes = probs_cur.cols();
    const std::size_t width = feats.cols();
    std::vector<std::uint32_t> edge_point, edge_prev;
    for (std::size_t i = begin; i < end; ++i) {
        for (std::size_t j = 0; j < graph.count[i]; ++j) {
            edge_point.push_back(static_cast<std::uint32_t>(i));
            edge_prev.push_back(graph.index[graph.slot(i, j)]);
        }
    }
    const std::size_t edges = edge_point.size();
    Matrix<T> rel(edges, 3), msg_in(edges, 2 * classes);
    {
        std::size_t e = 0;
        for (std::size_t i = begin; i < end; ++i) {
            for (std::size_t j = 0; j < graph.count[i]; ++j, ++e) {
                const Vec3& d = graph.relpos[graph.slot(i, j)];
                for (int a = 0; a < 3; ++a) rel(e, static_cast<std::size_t>(a)) = static_cast<T>(d[a]);
                auto yp = probs_prev.row(edge_prev[e]);
                auto yc = probs_cur.row(i);
                auto dst = msg_in.row(e);
                for (std::size_t c = 0; c < classes; ++c) {
                    dst[c] = yp[c];
                    dst[classes + c] = yc[c] - yp[c];
                }
            }
        }
    }
    Matrix<T> ew = mlp_forward(p.edge, rel, cache ? &cache->edge_cache : nullptr);
    Matrix<T> mr = mlp_forward(p.msg, msg_in, cache ? &cache->msg_cache : nullptr);

    const std::size_t n = end - begin;
    Matrix<T> updated(n, width);
    std::vector<std::uint32_t> argmax(n * width, UINT32_MAX);
    {
        std::size_t e = 0;
        for (std::size_t i = begin; i < end; ++i) {
            auto f = feats.row(i);
            auto u = updated.row(i - begin);
            std::copy(f.begin(), f.end(), u.begin());
            if (graph.count[i] == 0) continue;
            for (std::size_t c = 0; c < width; ++c) {
                T best = ew(e, c) * mr(e, c);
                std::uint32_t arg = static_cast<std::uint32_t>(e);
                for (std::size_t j = 1; j < graph.count[i]; ++j) {
                    const T m = ew(e + j, c) * mr(e + j, c);
                    if (m > best) {
                        best = m;
                        arg = static_cast<std::uint32_t>(e + j);
                    }
                }
                u[c] += best;
                argmax[(i - begin) * width + c] = arg;
            }
            e += graph.count[i];
        }
    }
    Matrix<T> delta = mlp_forward(p.out, updated, cache ? &cache->out_cache : nullptr);
    for (std::size_t i = begin; i < end; ++i) {
        auto l = logits.row(i);
        auto d = delta.row(i - begin);
        auto r = refined.row(i);
        for (std::size_t c = 0; c < classes; ++c) r[c] = l[c] + d[c];
    }
    if (cache) {
        cache->edge_point = std::move(edge_point);
        cache->edge_prev = std::move(edge_prev);
        cache->edge_weight = std::move(ew);
        cache->message_raw = std::move(mr);
        cache->argmax = std::move(argmax);
        cache->previous_rows = probs_prev.rows();
    }
}

}  // namespace detail

// Returns refined logits. With a cache the whole frame is processed as one
// batch; without one, points are processed in fixed-size chunks.
template <typename T>
Matrix<T> tvpr_refine(const TemporalGraph& graph, const Matrix<T>& probs_prev, const Matrix<T>& probs_cur,
                      const Matrix<T>& logits_cur, const Matrix<T>& feats_cur, const TvprParams<T>& p,
                      std::type_identity_t<TvprCache<T>>* cache = nullptr, bool validate = true) {
    const std::size_t n = graph.num_points;
    const std::size_t classes = p.num_classes();
    if (probs_cur.rows() != n || logits_cur.rows() != n || feats_cur.rows() != n) {
        throw StructuralError("tvpr: current-frame inputs do not match the graph's point count");
    }
    if (probs_cur.cols() != classes || logits_cur.cols() != classes || probs_prev.cols() != classes) {
        throw StructuralError("tvpr: class count mismatch");
    }
    if (feats_cur.cols() != p.feature_width()) throw StructuralError("tvpr: feature width mismatch");
    if (p.msg.input_width() != 2 * classes || p.edge.input_width() != 3 ||
        p.edge.output_width() != p.feature_width() || p.msg.output_width() != p.feature_width()) {
        throw StructuralError("tvpr: parameter shapes are inconsistent");
    }
    for (auto idx : graph.index) {
        if (idx >= probs_prev.rows() && probs_prev.rows() > 0) {
            throw StructuralError("tvpr: graph references a previous point beyond the previous predictions");
        }
    }
    if (validate) {
        check_probability_rows(probs_prev, "previous probability");
        check_probability_rows(probs_cur, "current probability");
    }

    Matrix<T> refined(n, classes);
    if (cache) {
        detail::tvpr_range(graph, probs_prev, probs_cur, logits_cur, feats_cur, p, 0, n, refined, cache);
    } else {
        constexpr std::size_t kChunk = 2048;
        for (std::size_t b = 0; b < n; b += kChunk) {
            detail::tvpr_range(graph, probs_prev, probs_cur, logits_cur, feats_cur, p, b, std::min(n, b + kChunk),
                               refined, static_cast<TvprCache<T>*>(nullptr));
        }
    }
    return refined;
}

template <typename T>
struct TvprGrads {
    Matrix<T> d_logits;
    Matrix<T> d_features;
    Matrix<T> d_probs_current;
    Matrix<T> d_probs_previous;
};

template <typename T>
TvprGrads<T> tvpr_backward(TvprParams<T>& p, const TvprCache<T>& cache, const Matrix<T>& upstream) {
    const std::size_t n = upstream.rows();
    const std::size_t classes = p.num_classes();
    const std::size_t width = p.feature_width();
    TvprGrads<T> g;
    g.d_logits = upstream;
    g.d_features = mlp_backward(p.out, cache.out_cache, upstream);

    const std::size_t edges = cache.edge_point.size();
    Matrix<T> d_ew(edges, width), d_mr(edges, width);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t c = 0; c < width; ++c) {
            const std::uint32_t e = cache.argmax[i * width + c];
            if (e == UINT32_MAX) continue;
            const T up = g.d_features(i, c);
            d_ew(e, c) += up * cache.message_raw(e, c);
            d_mr(e, c) += up * cache.edge_weight(e, c);
        }
    }
    mlp_backward(p.edge, cache.edge_cache, d_ew, false);
    Matrix<T> d_in = mlp_backward(p.msg, cache.msg_cache, d_mr);

    g.d_probs_current.resize(n, classes);
    g.d_probs_previous.resize(cache.previous_rows, classes);
    for (std::size_t e = 0; e < edges; ++e) {
        auto src = d_in.row(e);
        auto dp = g.d_probs_previous.row(cache.edge_prev[e]);
        auto dc = g.d_probs_current.row(cache.edge_point[e]);
        for (std::size_t c = 0; c < classes; ++c) {
            dp[c] += src[c] - src[classes + c];
            dc[c] += src[classes + c];
        }
    }
    return g;
}

}  // namespace seg4d
