#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "dpre/quadrature.hpp"
#include "dpre/rng.hpp"
#include "dpre/special.hpp"
#include "dpre/summation.hpp"

namespace dpre {

// A kernel on ([0,1] x R)^m with compact spatial support: eval must vanish
// whenever any |x_i| > spatial_support. Piecewise kernels should list their
// jump locations in time_breaks / space_breaks so the quadrature can split
// there instead of hunting for the discontinuities.
struct KernelFn {
    int order = 1;
    double spatial_support = 1.0;
    std::function<double(std::span<const double>, std::span<const double>)> eval;
    std::vector<double> time_breaks;
    std::vector<double> space_breaks;

    double operator()(std::span<const double> t, std::span<const double> x) const {
        return eval(t, x);
    }

    KernelFn abs() const {
        KernelFn out = *this;
        auto inner = eval;
        out.eval = [inner](std::span<const double> t, std::span<const double> x) {
            return std::abs(inner(t, x));
        };
        return out;
    }
};

struct InnerResult {
    double value = 0.0;
    double error = 0.0;   // achieved tolerance estimate (stderr for the MC path)
    bool converged = true;
    bool monte_carlo = false;
};

// int_s^t int_s^t |r - r'|^{2H-2} dr dr' = (t-s)^{2H} / (H(2H-1)).
inline double time_square_integral(double hurst, double s, double t) {
    if (!(0.0 <= s && s < t && t <= 1.0))
        throw std::invalid_argument("time_square_integral: need 0 <= s < t <= 1");
    const double d = t - s;
    if (hurst == 1.0) return d * d;
    return std::pow(d, 2.0 * hurst) / (hurst * (2.0 * hurst - 1.0));
}

// Closed form of the graded simplex integral (ordered times, power weights):
// prod Gamma(1-alpha_i) / Gamma(m - alpha + 1) * t^{m-alpha}.
inline double simplex_gamma_integral(const std::vector<double>& alphas, double t) {
    if (!(t > 0.0)) throw std::invalid_argument("simplex_gamma_integral: t must be > 0");
    double alpha = 0.0, log_num = 0.0;
    for (double a : alphas) {
        if (a >= 1.0) throw std::invalid_argument("simplex_gamma_integral: alpha_i must be < 1");
        alpha += a;
        log_num += log_gamma(1.0 - a);
    }
    const double m = static_cast<double>(alphas.size());
    const double log_val = log_num - log_gamma(m - alpha + 1.0) + (m - alpha) * std::log(t);
    return std::exp(log_val);
}

// One (s, t) pair for Monte Carlo against the |s-t|^{2H-2} weight: v = gap
// drawn exactly via its CDF from the uniform w, the pair placed uniformly on
// the admissible interval, and the estimator weight 2(1-v)/(2H-1) carrying
// both the weight mass and the placement density. No rejection, so w can be
// stratified freely. E[g(s,t) * weight] = int int g |s-t|^{2H-2} ds dt.
struct TimePairSample {
    double s = 0.0;
    double t = 0.0;
    double weight = 0.0;
};

inline TimePairSample sample_time_pair(double hurst, double w_uniform, CounterRng& rng) {
    const double v =
        hurst == 1.0 ? w_uniform : std::pow(w_uniform, 1.0 / (2.0 * hurst - 1.0));
    const bool swapped = rng.next_double() < 0.5;
    const double s0 = rng.next_double() * (1.0 - v);
    TimePairSample out;
    out.s = swapped ? s0 + v : s0;
    out.t = swapped ? s0 : s0 + v;
    out.weight = 2.0 * (1.0 - v) / (2.0 * hurst - 1.0);
    return out;
}

namespace kernel_detail {

// T(tau) = int_t int_x f(t+tau, x) g(t, x) dx dt over the admissible strip.
// adaptive integration over [lo, hi] pre-split at the listed cut points
inline QuadResult integrate_with_cuts(const std::function<double(double)>& fn, double lo,
                                      double hi, std::vector<double> cuts, double rel_tol,
                                      std::size_t budget, int max_depth) {
    cuts.push_back(lo);
    cuts.push_back(hi);
    std::sort(cuts.begin(), cuts.end());
    QuadResult total;
    for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
        const double a = std::max(lo, cuts[i]);
        const double b = std::min(hi, cuts[i + 1]);
        if (b - a < 1e-15) continue;
        const QuadResult q =
            integrate_adaptive(fn, a, b, 1e-300, rel_tol, budget, max_depth, 2);
        total.value += q.value;
        total.error_estimate += q.error_estimate;
        total.evaluations += q.evaluations;
        total.converged = total.converged && q.converged;
    }
    return total;
}

inline double overlap_slice(const KernelFn& f, const KernelFn& g, double tau,
                            double rel_tol, std::size_t* evals, bool* converged) {
    const double t_lo = std::max(0.0, -tau);
    const double t_hi = std::min(1.0, 1.0 - tau);
    if (t_hi <= t_lo) return 0.0;
    const double support = std::max(f.spatial_support, g.spatial_support);
    const double floor_tol = std::max(rel_tol, 2e-9);
    // depth sized to the tolerance: jump panels contribute O(width) residual
    const int depth = std::min(24, 4 + static_cast<int>(std::ceil(-std::log2(floor_tol))));
    std::vector<double> x_cuts = f.space_breaks;
    x_cuts.insert(x_cuts.end(), g.space_breaks.begin(), g.space_breaks.end());
    // f is evaluated at t + tau: its time breaks land at t = break - tau
    std::vector<double> t_cuts;
    for (double b : f.time_breaks) t_cuts.push_back(b - tau);
    t_cuts.insert(t_cuts.end(), g.time_breaks.begin(), g.time_breaks.end());
    auto slice = [&](double t) {
        auto integrand = [&](double x) {
            const double ts = t + tau;
            return f(std::span<const double>(&ts, 1), std::span<const double>(&x, 1)) *
                   g(std::span<const double>(&t, 1), std::span<const double>(&x, 1));
        };
        const QuadResult qx = integrate_with_cuts(integrand, -support, support, x_cuts,
                                                  floor_tol, 8'000, depth);
        *evals += qx.evaluations;
        if (!qx.converged) *converged = false;
        return qx.value;
    };
    const QuadResult qt =
        integrate_with_cuts(slice, t_lo, t_hi, t_cuts, floor_tol, 12'000, depth);
    if (!qt.converged) *converged = false;
    return qt.value;
}

} // namespace kernel_detail

// <f, g> with the |s-t|^{2H-2} temporal weight and shared spatial argument.
// m = 1: reduction to tau = s - t with dyadically graded panels toward the
// singular diagonal and nested adaptive quadrature for the overlap slices.
// m >= 2: importance-sampled Monte Carlo drawing each time pair from the
// normalized |s-t|^{2H-2} density (stratified in the first pair), used when
// a tensor grid would exceed 1e8 nodes (always, at the resolutions here).
inline InnerResult h_inner(const KernelFn& f, const KernelFn& g, double hurst,
                           double tol, std::uint64_t mc_seed = 0x1d9f02c4u,
                           std::size_t mc_samples = 400'000) {
    if (f.order != g.order) throw std::invalid_argument("h_inner: mismatched tensor orders");
    if (!(hurst > 0.5 && hurst <= 1.0))
        throw std::invalid_argument("h_inner: H must lie in (1/2, 1]");
    const int m = f.order;

    if (m == 1) {
        InnerResult res;
        std::size_t evals = 0;
        const double expo = 2.0 * hurst - 2.0;
        std::vector<double> contributions;
        // graded panels 2^-(k+1)..2^-k on both signs of tau; below 2^-20 the
        // remaining weight mass is lumped into one midpoint panel
        const int levels = 20;
        for (int sign = -1; sign <= 1; sign += 2) {
            for (int k = 0; k <= levels; ++k) {
                const double hi = std::ldexp(1.0, -k);
                const double lo = (k == levels) ? 0.0 : std::ldexp(1.0, -k - 1);
                auto integrand = [&](double tau) {
                    const double w = (hurst == 1.0) ? 1.0 : std::pow(tau, expo);
                    return w * kernel_detail::overlap_slice(f, g, sign * tau, 0.1 * tol,
                                                            &evals, &res.converged);
                };
                if (lo == 0.0) {
                    // vanishing panel: bound the weight mass analytically
                    const double mass =
                        hurst == 1.0 ? hi : std::pow(hi, 2.0 * hurst - 1.0) / (2.0 * hurst - 1.0);
                    const double mid = kernel_detail::overlap_slice(
                        f, g, sign * hi * 0.5, 0.1 * tol, &evals, &res.converged);
                    contributions.push_back(mass * mid);
                } else {
                    const QuadResult q =
                        integrate_adaptive(integrand, lo, hi, 1e-300, 0.25 * tol, 12'000);
                    if (!q.converged) res.converged = false;
                    contributions.push_back(q.value);
                }
            }
        }
        res.value = pairwise_sum(contributions);
        res.error = tol * std::abs(res.value);
        return res;
    }

    // Monte Carlo path for m >= 2.
    InnerResult res;
    res.monte_carlo = true;
    const double support = std::max(f.spatial_support, g.spatial_support);
    const double x_measure = 2.0 * support;
    CounterRng rng(derive_stream(mc_seed, 0xB10CADEull));
    const std::size_t strata = 64;
    std::vector<double> vals(mc_samples);
    std::vector<double> s(m), t(m), x(m);
    for (std::size_t it = 0; it < mc_samples; ++it) {
        double weight = 1.0;
        for (int i = 0; i < m; ++i) {
            double w = rng.next_double();
            if (i == 0)
                w = (static_cast<double>(it % strata) + w) / static_cast<double>(strata);
            const TimePairSample pair = sample_time_pair(hurst, w, rng);
            s[i] = pair.s;
            t[i] = pair.t;
            weight *= pair.weight * x_measure;
            x[i] = (2.0 * rng.next_double() - 1.0) * support;
        }
        vals[it] = weight * f(s, x) * g(t, x);
    }
    const MeanStderr ms = mean_stderr(vals);
    res.value = ms.mean;
    res.error = ms.stderr_;
    res.converged = true;
    return res;
}

inline double b_norm(const KernelFn& f, double hurst, double tol = 1e-7) {
    const InnerResult r = h_inner(f.abs(), f.abs(), hurst, tol);
    return std::sqrt(std::max(r.value, 0.0));
}

// ----------------------------------------------------------------------------
// Block averaging A_N
// ----------------------------------------------------------------------------

// Sparse per-cell averages of a kernel over the rectangles with temporal side
// 1/N (cells n = 1..N covering ((n-1)/N, n/N]) and spatial side N^{-1/rho}
// (cells k covering [k N^{-1/rho}, (k+1) N^{-1/rho})).
struct BlockGrid {
    int order = 1;
    std::int64_t n = 1;
    double rho = 2.0;
    double spatial_support = 1.0;
    // order 1: rows[nt - 1] = list of (k, value), increasing k
    std::vector<std::vector<std::pair<std::int64_t, double>>> rows;
    // order 2 storage, keyed by ((n1, k1), (n2, k2))
    std::map<std::array<std::int64_t, 4>, double> cells2;

    double dt() const { return 1.0 / static_cast<double>(n); }
    double dx() const { return std::pow(static_cast<double>(n), -1.0 / rho); }

    double value1(std::int64_t nt, std::int64_t k) const {
        if (nt < 1 || nt > n) return 0.0;
        const auto& row = rows[static_cast<std::size_t>(nt - 1)];
        auto it = std::lower_bound(row.begin(), row.end(), k,
                                   [](const auto& p, std::int64_t key) { return p.first < key; });
        if (it == row.end() || it->first != k) return 0.0;
        return it->second;
    }

    double value2(std::int64_t n1, std::int64_t k1, std::int64_t n2, std::int64_t k2) const {
        auto it = cells2.find({n1, k1, n2, k2});
        return it == cells2.end() ? 0.0 : it->second;
    }

    // temporal cell containing t (cells are right-closed), spatial cell of x
    std::int64_t t_cell(double t) const {
        auto c = static_cast<std::int64_t>(std::ceil(t * static_cast<double>(n)));
        return std::min<std::int64_t>(std::max<std::int64_t>(c, 1), n);
    }
    std::int64_t x_cell(double x) const {
        return static_cast<std::int64_t>(std::floor(x / dx()));
    }
};

inline BlockGrid block_average(const KernelFn& f, std::int64_t n, double rho) {
    if (n < 1) throw std::invalid_argument("block_average: N must be >= 1");
    BlockGrid grid;
    grid.order = f.order;
    grid.n = n;
    grid.rho = rho;
    grid.spatial_support = f.spatial_support;
    const double dt = grid.dt(), dx = grid.dx();
    const auto k_lo = static_cast<std::int64_t>(std::floor(-f.spatial_support / dx)) - 1;
    const auto k_hi = static_cast<std::int64_t>(std::ceil(f.spatial_support / dx));
    static const double offs[2] = {0.25, 0.75}; // 2-point midpoint refinement per axis

    if (f.order == 1) {
        grid.rows.assign(static_cast<std::size_t>(n), {});
        for (std::int64_t nt = 1; nt <= n; ++nt) {
            auto& row = grid.rows[static_cast<std::size_t>(nt - 1)];
            for (std::int64_t k = k_lo; k <= k_hi; ++k) {
                const double x0 = static_cast<double>(k) * dx;
                if (x0 >= f.spatial_support || x0 + dx <= -f.spatial_support) continue;
                double acc = 0.0;
                for (double ot : offs)
                    for (double ox : offs) {
                        const double tv = (static_cast<double>(nt - 1) + ot) * dt;
                        const double xv = x0 + ox * dx;
                        acc += f(std::span<const double>(&tv, 1), std::span<const double>(&xv, 1));
                    }
                row.emplace_back(k, acc / 4.0);
            }
        }
        return grid;
    }
    if (f.order == 2) {
        for (std::int64_t n1 = 1; n1 <= n; ++n1)
            for (std::int64_t n2 = 1; n2 <= n; ++n2)
                for (std::int64_t k1 = k_lo; k1 <= k_hi; ++k1)
                    for (std::int64_t k2 = k_lo; k2 <= k_hi; ++k2) {
                        double acc = 0.0;
                        for (double o1 : offs)
                            for (double o2 : offs)
                                for (double o3 : offs)
                                    for (double o4 : offs) {
                                        const double t[2] = {
                                            (static_cast<double>(n1 - 1) + o1) * dt,
                                            (static_cast<double>(n2 - 1) + o2) * dt};
                                        const double x[2] = {
                                            (static_cast<double>(k1) + o3) * dx,
                                            (static_cast<double>(k2) + o4) * dx};
                                        acc += f(std::span<const double>(t, 2),
                                                 std::span<const double>(x, 2));
                                    }
                        const double v = acc / 16.0;
                        if (v != 0.0) grid.cells2[{n1, k1, n2, k2}] = v;
                    }
        return grid;
    }
    throw std::invalid_argument("block_average: only orders 1 and 2 are stored");
}

// Piecewise-constant kernel view of a grid (the conditional expectation A_N f).
inline KernelFn grid_kernel(const BlockGrid& grid) {
    if (grid.order != 1) throw std::invalid_argument("grid_kernel: order-1 grids only");
    KernelFn out;
    out.order = 1;
    out.spatial_support = grid.spatial_support + grid.dx();
    const BlockGrid* g = &grid;
    out.eval = [g](std::span<const double> t, std::span<const double> x) {
        if (t[0] < 0.0 || t[0] > 1.0) return 0.0;
        return g->value1(g->t_cell(t[0]), g->x_cell(x[0]));
    };
    for (std::int64_t j = 0; j <= grid.n; ++j)
        out.time_breaks.push_back(static_cast<double>(j) * grid.dt());
    std::int64_t k_min = 0, k_max = 0;
    for (const auto& row : grid.rows)
        for (const auto& [k, v] : row) {
            k_min = std::min(k_min, k);
            k_max = std::max(k_max, k + 1);
        }
    for (std::int64_t k = k_min; k <= k_max; ++k)
        out.space_breaks.push_back(static_cast<double>(k) * grid.dx());
    return out;
}

// ----------------------------------------------------------------------------
// Exact bilinear form for piecewise-constant order-1 kernels
// ----------------------------------------------------------------------------

// int over cell pair of |s-t|^{2H-2}: with unit cell size this is the second
// difference of d^{2H} / (2H(2H-1)); scaled by (cell)^{2H}.
inline double cell_time_weight(double hurst, std::int64_t lag, double cell) {
    const double d = static_cast<double>(std::llabs(lag));
    if (hurst == 1.0) return cell * cell;
    const double twoH = 2.0 * hurst;
    const double num = std::pow(d + 1.0, twoH) - 2.0 * std::pow(d, twoH) +
                       std::pow(std::abs(d - 1.0), twoH);
    return std::pow(cell, twoH) * num / (twoH * (twoH - 1.0));
}

// <|f|, |g|>-style exact form between two order-1 grids with the same (N, rho):
// sum_{n, n', k} |f(n,k)| |g(n',k)| W(n-n') dx. absolute=false gives the
// signed bilinear form.
inline double grid_b_form(const BlockGrid& fg, const BlockGrid& gg, double hurst,
                          bool absolute = true) {
    if (fg.order != 1 || gg.order != 1 || fg.n != gg.n)
        throw std::invalid_argument("grid_b_form: matching order-1 grids required");
    const std::int64_t n = fg.n;
    const double dx = fg.dx();
    std::vector<double> weight(static_cast<std::size_t>(n));
    for (std::int64_t d = 0; d < n; ++d)
        weight[static_cast<std::size_t>(d)] = cell_time_weight(hurst, d, fg.dt());
    std::vector<double> partial;
    partial.reserve(static_cast<std::size_t>(n) * static_cast<std::size_t>(n));
    for (std::int64_t a = 1; a <= n; ++a) {
        const auto& ra = fg.rows[static_cast<std::size_t>(a - 1)];
        for (std::int64_t b = 1; b <= n; ++b) {
            const auto& rb = gg.rows[static_cast<std::size_t>(b - 1)];
            // sparse dot over shared spatial cells
            double dot = 0.0;
            std::size_t i = 0, j = 0;
            while (i < ra.size() && j < rb.size()) {
                if (ra[i].first < rb[j].first)
                    ++i;
                else if (rb[j].first < ra[i].first)
                    ++j;
                else {
                    const double va = absolute ? std::abs(ra[i].second) : ra[i].second;
                    const double vb = absolute ? std::abs(rb[j].second) : rb[j].second;
                    dot += va * vb;
                    ++i;
                    ++j;
                }
            }
            partial.push_back(dot * weight[static_cast<std::size_t>(std::llabs(a - b))] * dx);
        }
    }
    return pairwise_sum(partial);
}

inline double grid_b_norm(const BlockGrid& g, double hurst) {
    return std::sqrt(std::max(grid_b_form(g, g, hurst, true), 0.0));
}

} // namespace dpre
