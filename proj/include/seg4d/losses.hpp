#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <set>
#include <span>
#include <vector>

#include "seg4d/errors.hpp"
#include "seg4d/tensor.hpp"

namespace seg4d {

template <typename T>
Matrix<T> softmax(const Matrix<T>& logits) {
    Matrix<T> out(logits.rows(), logits.cols());
    for (std::size_t i = 0; i < logits.rows(); ++i) {
        auto z = logits.row(i);
        auto p = out.row(i);
        const T mx = *std::max_element(z.begin(), z.end());
        T sum = T(0);
        for (std::size_t c = 0; c < z.size(); ++c) {
            p[c] = std::exp(z[c] - mx);
            sum += p[c];
        }
        for (auto& v : p) v /= sum;
    }
    return out;
}

// Gradient of sum(upstream . softmax(logits)) with respect to logits, given probs.
template <typename T>
Matrix<T> softmax_backward(const Matrix<T>& probs, const Matrix<T>& upstream) {
    Matrix<T> out(probs.rows(), probs.cols());
    for (std::size_t i = 0; i < probs.rows(); ++i) {
        auto p = probs.row(i);
        auto g = upstream.row(i);
        T dot = T(0);
        for (std::size_t c = 0; c < p.size(); ++c) dot += p[c] * g[c];
        for (std::size_t c = 0; c < p.size(); ++c) out(i, c) = p[c] * (g[c] - dot);
    }
    return out;
}

template <typename T>
std::vector<int> argmax_rows(const Matrix<T>& m) {
    std::vector<int> out(m.rows());
    for (std::size_t i = 0; i < m.rows(); ++i) {
        auto r = m.row(i);
        out[i] = static_cast<int>(std::max_element(r.begin(), r.end()) - r.begin());
    }
    return out;
}

struct FocalLossConfig {
    double gamma = 2.0;                  // focusing exponent
    std::vector<double> class_weights;   // empty = unweighted
    std::set<int> ignore_ids;
};

template <typename T>
struct FocalLossResult {
    T loss = T(0);
    Matrix<T> grad;              // d loss / d logits
    std::size_t counted = 0;     // non-ignored rows
    bool all_ignored = false;
};

// Mean over non-ignored rows of -w_t (1 - p_t)^gamma log p_t with softmax p.
template <typename T>
FocalLossResult<T> focal_loss(const Matrix<T>& logits, std::span<const int> targets, const FocalLossConfig& cfg) {
    const std::size_t n = logits.rows(), classes = logits.cols();
    if (targets.size() != n) throw StructuralError("focal_loss: target count != logit rows");
    if (!cfg.class_weights.empty() && cfg.class_weights.size() != classes) {
        throw StructuralError("focal_loss: class weight count != class count");
    }
    if (cfg.gamma < 0.0) throw InvalidInput("focal_loss: gamma must be non-negative");

    FocalLossResult<T> res;
    res.grad.resize(n, classes);
    for (std::size_t i = 0; i < n; ++i) {
        const int t = targets[i];
        if (cfg.ignore_ids.count(t)) continue;
        if (t < 0 || static_cast<std::size_t>(t) >= classes) {
            throw InvalidInput("focal_loss: target id " + std::to_string(t) + " out of range");
        }
        ++res.counted;
    }
    if (res.counted == 0) {
        res.all_ignored = true;
        return res;
    }

    const T g = static_cast<T>(cfg.gamma);
    const T inv_n = T(1) / static_cast<T>(res.counted);
    std::vector<T> p(classes);
    T total = T(0);
    for (std::size_t i = 0; i < n; ++i) {
        const int t = targets[i];
        if (cfg.ignore_ids.count(t)) continue;
        auto z = logits.row(i);
        const T mx = *std::max_element(z.begin(), z.end());
        T sum = T(0);
        for (std::size_t c = 0; c < classes; ++c) {
            p[c] = std::exp(z[c] - mx);
            sum += p[c];
        }
        const T log_pt = z[static_cast<std::size_t>(t)] - mx - std::log(sum);
        for (auto& v : p) v /= sum;
        T one_minus = T(0);
        for (std::size_t c = 0; c < classes; ++c) {
            if (c != static_cast<std::size_t>(t)) one_minus += p[c];
        }
        const T pt = p[static_cast<std::size_t>(t)];
        const T weight = cfg.class_weights.empty() ? T(1) : static_cast<T>(cfg.class_weights[static_cast<std::size_t>(t)]);

        const T mod = g == T(0) ? T(1) : std::pow(one_minus, g);
        total += -weight * mod * log_pt;

        // dL/dz_c = [g (1-p_t)^(g-1) p_t log p_t - (1-p_t)^g] (delta_tc - p_c)
        T dmod = T(0);
        if (g != T(0) && one_minus > T(0)) dmod = g * std::pow(one_minus, g - T(1)) * pt * log_pt;
        const T coef = weight * (dmod - mod) * inv_n;
        auto gr = res.grad.row(i);
        for (std::size_t c = 0; c < classes; ++c) {
            const T delta = c == static_cast<std::size_t>(t) ? T(1) : T(0);
            gr[c] = coef * (delta - p[c]);
        }
    }
    res.loss = total * inv_n;
    return res;
}

}  // namespace seg4d
