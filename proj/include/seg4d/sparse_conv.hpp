#pragma once

#include <array>
#include <cstdint>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "seg4d/mlp.hpp"
#include "seg4d/voxel_grid.hpp"

namespace seg4d {

inline constexpr std::size_t kKernelVolume = 27;
inline constexpr std::size_t kCenterTap = 13;

// Offset id o <-> (dx, dy, dz) with o = (dx+1)*9 + (dy+1)*3 + (dz+1).
inline std::array<int, 3> kernel_offset(std::size_t o) {
    return {static_cast<int>(o / 9) - 1, static_cast<int>((o / 3) % 3) - 1, static_cast<int>(o % 3) - 1};
}

// For every tap, the (input cell, output cell) pairs with input = output + offset.
// Both sides are occupied cells of the same grid (submanifold rule).
struct KernelMap {
    std::array<std::vector<std::pair<std::uint32_t, std::uint32_t>>, kKernelVolume> pairs;
    std::size_t cells = 0;
};

KernelMap build_kernel_map(const VoxelGrid& grid);

// 3x3x3 submanifold sparse convolution. Weight rows [o*in, (o+1)*in) hold the
// in x out matrix of tap o.
template <typename T>
struct SparseConv {
    Parameter<T> weight;
    Parameter<T> bias;
    Activation activation = Activation::Relu;
    std::size_t in = 0;
    std::size_t out = 0;
    std::string name;

    SparseConv() = default;
    SparseConv(const std::string& n, std::size_t in_w, std::size_t out_w, Activation act = Activation::Relu)
        : weight(n + ".weight", kKernelVolume * in_w, out_w), bias(n + ".bias", 1, out_w), activation(act),
          in(in_w), out(out_w), name(n) {}

    template <typename Rng>
    void init(Rng& rng) {
        const double fan_in = static_cast<double>(kKernelVolume * in);
        const double bound = std::sqrt(6.0 / fan_in);
        std::uniform_real_distribution<double> dist(-bound, bound);
        for (auto& w : weight.value.storage()) w = static_cast<T>(dist(rng));
        bias.value.fill(T(0));
    }

    std::size_t parameter_count() const { return weight.value.size() + bias.value.size(); }
    std::vector<Parameter<T>*> parameters() { return {&weight, &bias}; }
    std::vector<const Parameter<T>*> parameters() const { return {&weight, &bias}; }

    template <typename U>
    SparseConv<U> cast() const {
        SparseConv<U> o(name, in, out, activation);
        o.weight.value = weight.value.template cast<U>();
        o.bias.value = bias.value.template cast<U>();
        return o;
    }
};

template <typename T>
struct SparseConvCache {
    Matrix<T> input;
    Matrix<T> pre;
    Matrix<T> post;
    const KernelMap* map = nullptr;
    std::uint64_t version = 0;
};

template <typename T>
Matrix<T> sparse_conv_forward(const SparseConv<T>& conv, const KernelMap& map, const Matrix<T>& x,
                              std::type_identity_t<SparseConvCache<T>>* cache = nullptr) {
    if (x.cols() != conv.in) throw StructuralError("sparse conv: input width mismatch");
    if (x.rows() != map.cells) throw StructuralError("sparse conv: feature rows do not match kernel map");
    const std::size_t in = conv.in, out = conv.out;
    Matrix<T> z(x.rows(), out);
    for (std::size_t i = 0; i < z.rows(); ++i) {
        for (std::size_t o = 0; o < out; ++o) z(i, o) = conv.bias.value(0, o);
    }
    for (std::size_t tap = 0; tap < kKernelVolume; ++tap) {
        const T* w = conv.weight.value.data() + tap * in * out;
        for (const auto& [src, dst] : map.pairs[tap]) {
            const T* xi = x.data() + static_cast<std::size_t>(src) * in;
            T* zo = z.data() + static_cast<std::size_t>(dst) * out;
            for (std::size_t k = 0; k < in; ++k) {
                const T xv = xi[k];
                const T* wk = w + k * out;
                for (std::size_t o = 0; o < out; ++o) zo[o] += xv * wk[o];
            }
        }
    }
    Matrix<T> y = z;
    for (auto& v : y.storage()) v = activate(conv.activation, v);
    if (cache) {
        cache->input = x;
        cache->pre = std::move(z);
        cache->post = y;
        cache->map = &map;
        cache->version = conv.weight.version;
    }
    return y;
}

template <typename T>
Matrix<T> sparse_conv_backward(SparseConv<T>& conv, const SparseConvCache<T>& cache, const Matrix<T>& upstream,
                               bool need_input_grad = true) {
    if (!cache.map || cache.version != conv.weight.version) throw StructuralError("sparse conv: stale cache");
    const std::size_t in = conv.in, out = conv.out;
    Matrix<T> g = upstream;
    for (std::size_t s = 0; s < g.size(); ++s) {
        g.storage()[s] *= activate_grad(conv.activation, cache.pre.storage()[s], cache.post.storage()[s]);
    }
    for (std::size_t i = 0; i < g.rows(); ++i) {
        for (std::size_t o = 0; o < out; ++o) conv.bias.grad(0, o) += g(i, o);
    }
    Matrix<T> dx;
    if (need_input_grad) dx.resize(cache.input.rows(), in);
    for (std::size_t tap = 0; tap < kKernelVolume; ++tap) {
        const T* w = conv.weight.value.data() + tap * in * out;
        T* dw = conv.weight.grad.data() + tap * in * out;
        for (const auto& [src, dst] : cache.map->pairs[tap]) {
            const T* xi = cache.input.data() + static_cast<std::size_t>(src) * in;
            const T* go = g.data() + static_cast<std::size_t>(dst) * out;
            for (std::size_t k = 0; k < in; ++k) {
                const T xv = xi[k];
                T* dwk = dw + k * out;
                const T* wk = w + k * out;
                T acc = T(0);
                for (std::size_t o = 0; o < out; ++o) {
                    dwk[o] += xv * go[o];
                    acc += wk[o] * go[o];
                }
                if (need_input_grad) dx(src, k) += acc;
            }
        }
    }
    return dx;
}

}  // namespace seg4d
