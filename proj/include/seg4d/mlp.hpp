#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <type_traits>
#include <vector>

#include <Eigen/Core>

#include "seg4d/errors.hpp"
#include "seg4d/tensor.hpp"

namespace seg4d {

namespace detail {
template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
Eigen::Map<RowMat<T>> as_eigen(Matrix<T>& m) {
    return {m.data(), static_cast<Eigen::Index>(m.rows()), static_cast<Eigen::Index>(m.cols())};
}
template <typename T>
Eigen::Map<const RowMat<T>> as_eigen(const Matrix<T>& m) {
    return {m.data(), static_cast<Eigen::Index>(m.rows()), static_cast<Eigen::Index>(m.cols())};
}
}  // namespace detail

enum class Activation { Identity, Relu, Tanh };

const char* activation_name(Activation a);
Activation activation_from_name(const std::string& name);

// A trainable tensor with its gradient buffer and Adam moments. `version`
// increases every time the optimizer writes `value`; caches compare it to
// detect stale activations.
template <typename T>
struct Parameter {
    std::string name;
    Matrix<T> value;
    Matrix<T> grad;
    Matrix<T> m;
    Matrix<T> v;
    std::uint64_t version = 0;

    Parameter() = default;
    Parameter(std::string n, std::size_t rows, std::size_t cols)
        : name(std::move(n)), value(rows, cols), grad(rows, cols), m(rows, cols), v(rows, cols) {}

    void zero_grad() { grad.fill(T(0)); }
};

template <typename T>
struct DenseLayer {
    Parameter<T> weight;  // in x out
    Parameter<T> bias;    // 1 x out
    Activation activation = Activation::Identity;

    std::size_t in() const { return weight.value.rows(); }
    std::size_t out() const { return weight.value.cols(); }
};

template <typename T>
inline T activate(Activation a, T z) {
    switch (a) {
        case Activation::Relu: return z > T(0) ? z : T(0);
        case Activation::Tanh: return std::tanh(z);
        case Activation::Identity: break;
    }
    return z;
}

// Derivative expressed through the pre-activation z and output y.
template <typename T>
inline T activate_grad(Activation a, T z, T y) {
    switch (a) {
        case Activation::Relu: return z > T(0) ? T(1) : T(0);
        case Activation::Tanh: return T(1) - y * y;
        case Activation::Identity: break;
    }
    return T(1);
}

template <typename T>
class Mlp;

// Per-layer inputs and pre-activations retained for backward.
template <typename T>
struct MlpCache {
    std::vector<Matrix<T>> inputs;
    std::vector<Matrix<T>> pre;
    std::vector<Matrix<T>> post;
    const Mlp<T>* owner = nullptr;
    std::vector<std::uint64_t> versions;
};

// Stack of affine layers, each followed by its own activation.
template <typename T>
class Mlp {
public:
    Mlp() = default;
    Mlp(std::string name, const std::vector<std::size_t>& widths, const std::vector<Activation>& activations) {
        if (widths.size() < 2 || activations.size() != widths.size() - 1) {
            throw StructuralError("mlp " + name + ": need n+1 widths for n activations");
        }
        name_ = std::move(name);
        for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
            DenseLayer<T> layer;
            layer.weight = Parameter<T>(name_ + "." + std::to_string(l) + ".weight", widths[l], widths[l + 1]);
            layer.bias = Parameter<T>(name_ + "." + std::to_string(l) + ".bias", 1, widths[l + 1]);
            layer.activation = activations[l];
            layers_.push_back(std::move(layer));
        }
    }

    const std::string& name() const { return name_; }
    std::size_t input_width() const { return layers_.empty() ? 0 : layers_.front().in(); }
    std::size_t output_width() const { return layers_.empty() ? 0 : layers_.back().out(); }
    std::size_t depth() const { return layers_.size(); }
    std::vector<DenseLayer<T>>& layers() { return layers_; }
    const std::vector<DenseLayer<T>>& layers() const { return layers_; }

    std::size_t parameter_count() const {
        std::size_t n = 0;
        for (const auto& l : layers_) n += l.weight.value.size() + l.bias.value.size();
        return n;
    }

    std::vector<Parameter<T>*> parameters() {
        std::vector<Parameter<T>*> out;
        for (auto& l : layers_) {
            out.push_back(&l.weight);
            out.push_back(&l.bias);
        }
        return out;
    }
    std::vector<const Parameter<T>*> parameters() const {
        std::vector<const Parameter<T>*> out;
        for (const auto& l : layers_) {
            out.push_back(&l.weight);
            out.push_back(&l.bias);
        }
        return out;
    }

    void zero_grad() {
        for (auto* p : parameters()) p->zero_grad();
    }

    // Kaiming-uniform for ReLU layers, Xavier-uniform otherwise; zero biases.
    template <typename Rng>
    void init(Rng& rng) {
        for (auto& l : layers_) {
            const double fan_in = static_cast<double>(l.in());
            const double fan_out = static_cast<double>(l.out());
            const double bound = l.activation == Activation::Relu ? std::sqrt(6.0 / fan_in)
                                                                  : std::sqrt(6.0 / (fan_in + fan_out));
            std::uniform_real_distribution<double> dist(-bound, bound);
            for (auto& w : l.weight.value.storage()) w = static_cast<T>(dist(rng));
            l.bias.value.fill(T(0));
        }
    }

    void zero_final_layer() {
        if (layers_.empty()) return;
        layers_.back().weight.value.fill(T(0));
        layers_.back().bias.value.fill(T(0));
    }

    template <typename U>
    Mlp<U> cast() const {
        Mlp<U> out;
        out.name_ = name_;
        for (const auto& l : layers_) {
            DenseLayer<U> d;
            d.weight = Parameter<U>(l.weight.name, l.in(), l.out());
            d.bias = Parameter<U>(l.bias.name, 1, l.out());
            d.weight.value = l.weight.value.template cast<U>();
            d.bias.value = l.bias.value.template cast<U>();
            d.activation = l.activation;
            out.layers_.push_back(std::move(d));
        }
        return out;
    }

private:
    template <typename U>
    friend class Mlp;

    std::string name_;
    std::vector<DenseLayer<T>> layers_;
};

template <typename T>
Matrix<T> mlp_forward(const Mlp<T>& mlp, const Matrix<T>& input, std::type_identity_t<MlpCache<T>>* cache = nullptr) {
    if (input.cols() != mlp.input_width()) {
        throw StructuralError("mlp " + mlp.name() + ": input width " + std::to_string(input.cols()) +
                              " != expected " + std::to_string(mlp.input_width()));
    }
    if (cache) {
        cache->inputs.clear();
        cache->pre.clear();
        cache->post.clear();
        cache->owner = &mlp;
        cache->versions.clear();
        for (const auto* p : mlp.parameters()) cache->versions.push_back(p->version);
    }
    Matrix<T> x = input;
    for (const auto& layer : mlp.layers()) {
        const std::size_t n = x.rows(), out = layer.out();
        Matrix<T> z(n, out);
        if (n > 0) {
            auto ze = detail::as_eigen(z);
            ze.noalias() = detail::as_eigen(x) * detail::as_eigen(layer.weight.value);
            ze.rowwise() += detail::as_eigen(layer.bias.value).row(0);
        }
        Matrix<T> y = z;
        if (layer.activation != Activation::Identity) {
            for (auto& v : y.storage()) v = activate(layer.activation, v);
        }
        if (cache) {
            cache->inputs.push_back(std::move(x));
            cache->pre.push_back(std::move(z));
            cache->post.push_back(y);
        }
        x = std::move(y);
    }
    return x;
}

// Accumulates parameter gradients into the mlp's buffers and returns the
// gradient with respect to the forward input.
template <typename T>
Matrix<T> mlp_backward(Mlp<T>& mlp, const MlpCache<T>& cache, const Matrix<T>& upstream, bool need_input_grad = true) {
    if (cache.owner != &mlp || cache.pre.size() != mlp.depth()) {
        throw StructuralError("mlp " + mlp.name() + ": cache was produced by a different forward call");
    }
    {
        std::size_t i = 0;
        for (const auto* p : mlp.parameters()) {
            if (p->version != cache.versions[i++]) {
                throw StructuralError("mlp " + mlp.name() + ": stale cache (parameters changed since forward)");
            }
        }
    }
    if (upstream.rows() != cache.pre.back().rows() || upstream.cols() != mlp.output_width()) {
        throw StructuralError("mlp " + mlp.name() + ": upstream gradient shape mismatch");
    }
    Matrix<T> g = upstream;
    for (std::size_t li = mlp.depth(); li-- > 0;) {
        auto& layer = mlp.layers()[li];
        const Matrix<T>& x = cache.inputs[li];
        const Matrix<T>& z = cache.pre[li];
        const Matrix<T>& y = cache.post[li];
        const std::size_t n = x.rows(), in = layer.in();
        if (layer.activation != Activation::Identity) {
            for (std::size_t s = 0; s < g.size(); ++s) {
                g.storage()[s] *= activate_grad(layer.activation, z.storage()[s], y.storage()[s]);
            }
        }
        if (n > 0) {
            const auto ge = detail::as_eigen(g);
            detail::as_eigen(layer.weight.grad).noalias() += detail::as_eigen(x).transpose() * ge;
            detail::as_eigen(layer.bias.grad).row(0) += ge.colwise().sum();
        }
        if (li == 0 && !need_input_grad) return {};
        Matrix<T> gx(n, in);
        if (n > 0) {
            detail::as_eigen(gx).noalias() = detail::as_eigen(g) * detail::as_eigen(layer.weight.value).transpose();
        }
        g = std::move(gx);
    }
    return g;
}

}  // namespace seg4d
