#pragma once

#include <cstddef>
#include <span>
#include <vector>
#include <cmath>
#include <algorithm>

namespace dpre {

// Pairwise (cascade) summation over a span. The reduction tree depends only
// on the length, never on thread count or traversal order, so reductions are
// bit-stable across worker configurations.
inline double pairwise_sum(std::span<const double> xs) {
    const std::size_t n = xs.size();
    if (n <= 8) {
        double s = 0.0;
        for (double x : xs) s += x;
        return s;
    }
    const std::size_t half = n / 2;
    return pairwise_sum(xs.first(half)) + pairwise_sum(xs.subspan(half));
}

inline double pairwise_mean(std::span<const double> xs) {
    return xs.empty() ? 0.0 : pairwise_sum(xs) / static_cast<double>(xs.size());
}

struct MeanStderr {
    double mean = 0.0;
    double stderr_ = 0.0; // standard error of the mean
    std::size_t n = 0;
};

// Mean and standard error with pairwise reductions for both moments.
inline MeanStderr mean_stderr(std::span<const double> xs) {
    MeanStderr r;
    r.n = xs.size();
    if (r.n == 0) return r;
    r.mean = pairwise_mean(xs);
    if (r.n < 2) return r;
    std::vector<double> dev2(r.n);
    for (std::size_t i = 0; i < r.n; ++i) {
        const double d = xs[i] - r.mean;
        dev2[i] = d * d;
    }
    const double var = pairwise_sum(dev2) / static_cast<double>(r.n - 1);
    r.stderr_ = std::sqrt(std::max(var, 0.0) / static_cast<double>(r.n));
    return r;
}

// log(sum(exp(e_i))) without overflow.
inline double log_sum_exp(std::span<const double> es) {
    if (es.empty()) return -INFINITY;
    double m = es[0];
    for (double e : es) m = std::max(m, e);
    if (!std::isfinite(m)) return m;
    std::vector<double> w(es.size());
    for (std::size_t i = 0; i < es.size(); ++i) w[i] = std::exp(es[i] - m);
    return m + std::log(pairwise_sum(w));
}

// Mean and stderr of exp(e_i) given log values, scaled in log space.
inline MeanStderr exp_mean_stderr(std::span<const double> es) {
    MeanStderr r;
    r.n = es.size();
    if (r.n == 0) return r;
    double m = es[0];
    for (double e : es) m = std::max(m, e);
    std::vector<double> w(r.n);
    for (std::size_t i = 0; i < r.n; ++i) w[i] = std::exp(es[i] - m);
    const MeanStderr base = mean_stderr(w);
    const double scale = std::exp(m);
    r.mean = scale * base.mean;
    r.stderr_ = scale * base.stderr_;
    return r;
}

} // namespace dpre
