#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace seg4d {

struct GradCheckReport {
    std::size_t checked = 0;
    std::size_t failures = 0;
    double max_rel_error = 0.0;
    std::size_t worst_index = 0;
    double worst_analytic = 0.0;
    double worst_numeric = 0.0;
    // Entries that failed at step h but agreed at h/10 or h/100: the +-h
    // probe straddled a ReLU or max switch. Not counted as failures.
    std::size_t kinks = 0;

    bool ok() const { return failures == 0; }
};

// Relative error with a floor on the denominator, so entries whose true value
// is ~0 are compared absolutely against `floor * rtol`.
inline double relative_error(double a, double b, double floor = 1e-6) {
    return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

// Central differences on selected entries of `values`. `loss` is re-evaluated
// after each perturbation; `values` is restored before returning.
inline GradCheckReport check_gradient(std::span<double> values, std::span<const double> analytic,
                                      const std::function<double()>& loss, const std::vector<std::size_t>& entries,
                                      double h = 1e-5, double rtol = 1e-4, double floor = 1e-6,
                                      bool retry_kinks = false) {
    GradCheckReport rep;
    auto central = [&](std::size_t idx, double step) {
        const double saved = values[idx];
        values[idx] = saved + step;
        const double up = loss();
        values[idx] = saved - step;
        const double down = loss();
        values[idx] = saved;
        return (up - down) / (2.0 * step);
    };
    for (std::size_t idx : entries) {
        double numeric = central(idx, h);
        double err = relative_error(analytic[idx], numeric, floor);
        ++rep.checked;
        if (err > rtol && retry_kinks) {
            for (double step : {h / 10.0, h / 100.0}) {
                const double n2 = central(idx, step);
                if (relative_error(analytic[idx], n2, floor) <= rtol) {
                    ++rep.kinks;
                    numeric = n2;
                    err = relative_error(analytic[idx], n2, floor);
                    break;
                }
            }
        }
        if (err > rtol) ++rep.failures;
        if (err >= rep.max_rel_error) {
            rep.max_rel_error = err;
            rep.worst_index = idx;
            rep.worst_analytic = analytic[idx];
            rep.worst_numeric = numeric;
        }
    }
    return rep;
}

inline GradCheckReport check_gradient(std::span<double> values, std::span<const double> analytic,
                                      const std::function<double()>& loss, double h = 1e-5, double rtol = 1e-4,
                                      double floor = 1e-6, bool retry_kinks = false) {
    std::vector<std::size_t> all(values.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    return check_gradient(values, analytic, loss, all, h, rtol, floor, retry_kinks);
}

inline void merge(GradCheckReport& into, const GradCheckReport& r) {
    into.checked += r.checked;
    into.failures += r.failures;
    into.kinks += r.kinks;
    if (r.max_rel_error >= into.max_rel_error) {
        into.max_rel_error = r.max_rel_error;
        into.worst_analytic = r.worst_analytic;
        into.worst_numeric = r.worst_numeric;
    }
}

}  // namespace seg4d
