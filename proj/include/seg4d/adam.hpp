#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>

#include "seg4d/errors.hpp"
#include "seg4d/mlp.hpp"

namespace seg4d {

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

// Adam with bias correction. Moments live on each Parameter; the step counter
// lives here. A non-finite gradient aborts the step before any write.
template <typename T>
class Adam {
public:
    explicit Adam(AdamConfig cfg = {}) : cfg_(cfg) {}

    const AdamConfig& config() const { return cfg_; }
    void set_lr(double lr) { cfg_.lr = lr; }
    std::uint64_t steps() const { return step_; }
    void set_steps(std::uint64_t s) { step_ = s; }

    void step(std::span<Parameter<T>* const> params) {
        for (const auto* p : params) {
            for (T g : p->grad.storage()) {
                if (!std::isfinite(static_cast<double>(g))) {
                    throw NumericalError("adam: non-finite gradient in " + p->name + " at step " +
                                         std::to_string(step_ + 1));
                }
            }
        }
        ++step_;
        const double b1t = 1.0 - std::pow(cfg_.beta1, static_cast<double>(step_));
        const double b2t = 1.0 - std::pow(cfg_.beta2, static_cast<double>(step_));
        const T b1 = static_cast<T>(cfg_.beta1), b2 = static_cast<T>(cfg_.beta2);
        const T lr = static_cast<T>(cfg_.lr), eps = static_cast<T>(cfg_.eps);
        const T c1 = static_cast<T>(1.0 / b1t), c2 = static_cast<T>(1.0 / b2t);
        for (auto* p : params) {
            auto& w = p->value.storage();
            const auto& g = p->grad.storage();
            auto& m = p->m.storage();
            auto& v = p->v.storage();
            for (std::size_t i = 0; i < w.size(); ++i) {
                m[i] = b1 * m[i] + (T(1) - b1) * g[i];
                v[i] = b2 * v[i] + (T(1) - b2) * g[i] * g[i];
                const T mhat = m[i] * c1;
                const T vhat = v[i] * c2;
                w[i] -= lr * mhat / (std::sqrt(vhat) + eps);
            }
            ++p->version;
        }
    }

private:
    AdamConfig cfg_;
    std::uint64_t step_ = 0;
};

}  // namespace seg4d
