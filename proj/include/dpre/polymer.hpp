#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <unordered_map>
#include <vector>

#include "dpre/disorder.hpp"
#include "dpre/kernel_space.hpp"
#include "dpre/parallel.hpp"
#include "dpre/rng.hpp"
#include "dpre/stable_walk.hpp"
#include "dpre/summation.hpp"
#include "dpre/wick_algebra.hpp"

namespace dpre {

// Model parameters with the intermediate-disorder scaling wired in:
// theta = H - 1/(2 rho), beta_hat = beta N^-theta, pinned endpoint
// K = round(N^{1/rho} x0).
struct PolymerParams {
    std::int64_t n = 1;
    double beta = 0.0;
    double hurst = 1.0;
    double rho = 2.0;
    double x0 = 0.0;

    double theta() const { return hurst - 1.0 / (2.0 * rho); }
    double beta_hat() const {
        return beta * std::pow(static_cast<double>(n), -theta());
    }
    double space_scale() const { return std::pow(static_cast<double>(n), 1.0 / rho); }
    std::int64_t pinned_endpoint() const {
        return static_cast<std::int64_t>(std::llround(space_scale() * x0));
    }
    bool stratonovich_admissible() const { return theta() > 0.5; }
    bool skorohod_admissible() const { return theta() > 0.0 && rho > 1.0; }
};

enum class PartitionMode { plain, wick_corrected };

struct PartitionEstimate {
    double value = 0.0;
    double stderr_ = 0.0;
    std::int64_t paths = 0;
    PartitionMode mode = PartitionMode::plain;
};

// Backward pinned walk: S_{N+1} = K, no constraint at the near end. By
// symmetry of the step law this is a forward walk from K read in reverse:
// S_{N+1-j} = K + sum_{i<=j} Y_i. Returns S_1..S_N.
inline std::vector<std::int64_t> pinned_path(const PolymerParams& params,
                                             const IncrementLaw& law, CounterRng& rng) {
    const std::int64_t n = params.n;
    const std::int64_t pin = params.pinned_endpoint();
    std::vector<std::int64_t> s(static_cast<std::size_t>(n));
    std::int64_t pos = pin;
    for (std::int64_t j = 1; j <= n; ++j) {
        pos += law.sample_increment(rng);
        s[static_cast<std::size_t>(n - j)] = pos;
    }
    return s;
}

inline std::vector<double> make_gamma_table(const TemporalCovariance& cov, std::int64_t n) {
    std::vector<double> t(static_cast<std::size_t>(n));
    for (std::int64_t d = 0; d < n; ++d) t[static_cast<std::size_t>(d)] = cov(d);
    return t;
}

// Weighted self-intersection local time sum_{i,j} gamma(i-j) 1{S_i = S_j},
// diagonal included; indices grouped by site so the cost is the number of
// within-site time pairs, not N^2.
inline double intersection_local_time(std::span<const double> gamma_table,
                                      std::span<const std::int64_t> path) {
    const std::int64_t n = static_cast<std::int64_t>(path.size());
    std::unordered_map<std::int64_t, std::vector<std::int32_t>> visits;
    visits.reserve(path.size());
    for (std::int64_t i = 0; i < n; ++i)
        visits[path[static_cast<std::size_t>(i)]].push_back(static_cast<std::int32_t>(i));
    double off_diag = 0.0;
    for (const auto& [site, times] : visits) {
        for (std::size_t a = 0; a < times.size(); ++a)
            for (std::size_t b = a + 1; b < times.size(); ++b)
                off_diag += gamma_table[static_cast<std::size_t>(times[b] - times[a])];
    }
    return static_cast<double>(n) * gamma_table[0] + 2.0 * off_diag;
}

inline double intersection_local_time(const TemporalCovariance& cov,
                                      std::span<const std::int64_t> path) {
    const auto table = make_gamma_table(cov, static_cast<std::int64_t>(path.size()));
    return intersection_local_time(table, path);
}

// sum_{i,j} gamma(i-j) 1{A_i = B_j} for two independent paths (the two-replica
// overlap that controls E[Z~^2]).
inline double cross_intersection_local_time(std::span<const double> gamma_table,
                                            std::span<const std::int64_t> path_a,
                                            std::span<const std::int64_t> path_b) {
    std::unordered_map<std::int64_t, std::vector<std::int32_t>> visits;
    visits.reserve(path_a.size());
    const std::int64_t na = static_cast<std::int64_t>(path_a.size());
    for (std::int64_t i = 0; i < na; ++i)
        visits[path_a[static_cast<std::size_t>(i)]].push_back(static_cast<std::int32_t>(i));
    double total = 0.0;
    const std::int64_t nb = static_cast<std::int64_t>(path_b.size());
    for (std::int64_t j = 0; j < nb; ++j) {
        auto it = visits.find(path_b[static_cast<std::size_t>(j)]);
        if (it == visits.end()) continue;
        for (std::int32_t i : it->second)
            total += gamma_table[static_cast<std::size_t>(std::llabs(i - j))];
    }
    return total;
}

inline double hamiltonian(const DisorderField& field, std::span<const std::int64_t> path) {
    std::vector<double> terms(path.size());
    for (std::size_t i = 0; i < path.size(); ++i)
        terms[i] = field.omega_at(static_cast<std::int64_t>(i) + 1, path[i]);
    return pairwise_sum(terms);
}

// Monte Carlo estimate of the quenched partition function given the field:
// plain averages exp(beta_hat H(S)); wick_corrected subtracts half the
// conditional variance (beta_hat^2/2) ILT(S) inside the exponential, making
// the weight a Wick exponential with E_omega = 1. Summands are combined in
// log space.
inline PartitionEstimate estimate_partition(const PolymerParams& params,
                                            const DisorderField& field,
                                            const IncrementLaw& law, std::int64_t m_paths,
                                            PartitionMode mode, std::uint64_t seed,
                                            int workers = 1) {
    if (m_paths < 2) throw std::invalid_argument("estimate_partition: need M >= 2");
    const double bh = params.beta_hat();
    const auto gamma_table =
        mode == PartitionMode::wick_corrected
            ? make_gamma_table(TemporalCovariance::fgn(params.hurst), params.n)
            : std::vector<double>{};
    std::vector<double> exponents(static_cast<std::size_t>(m_paths));
    parallel_for(static_cast<std::size_t>(m_paths), workers, [&](std::size_t i) {
        CounterRng rng(derive_stream(seed, i));
        const auto path = pinned_path(params, law, rng);
        double e = bh * hamiltonian(field, path);
        if (mode == PartitionMode::wick_corrected)
            e -= 0.5 * bh * bh * intersection_local_time(gamma_table, path);
        exponents[i] = e;
    });
    const MeanStderr ms = exp_mean_stderr(exponents);
    PartitionEstimate out;
    out.value = ms.mean;
    out.stderr_ = ms.stderr_;
    out.paths = m_paths;
    out.mode = mode;
    return out;
}

// Exact E_S[...] for finite-support laws at small N by summing all |supp|^N
// backward paths. Oracle for estimate_partition.
inline double enumerate_exact(const PolymerParams& params, const DisorderField& field,
                              const IncrementLaw& law, PartitionMode mode) {
    if (!law.finite_support())
        throw std::invalid_argument("enumerate_exact: finite-support law required");
    if (params.n > 8) throw std::invalid_argument("enumerate_exact: N too large (> 8)");
    const std::int64_t n = params.n;
    const std::int64_t amax = law.max_tabulated();
    const std::int64_t base = 2 * amax + 1;
    const double bh = params.beta_hat();
    const auto gamma_table = make_gamma_table(TemporalCovariance::fgn(params.hurst), n);

    std::int64_t total = 1;
    for (std::int64_t i = 0; i < n; ++i) total *= base;

    std::vector<double> log_terms;
    log_terms.reserve(static_cast<std::size_t>(total));
    std::vector<std::int64_t> incr(static_cast<std::size_t>(n));
    std::vector<std::int64_t> path(static_cast<std::size_t>(n));
    const std::int64_t pin = params.pinned_endpoint();
    for (std::int64_t code = 0; code < total; ++code) {
        std::int64_t c = code;
        double log_w = 0.0;
        for (std::int64_t i = 0; i < n; ++i) {
            const std::int64_t y = (c % base) - amax;
            c /= base;
            incr[static_cast<std::size_t>(i)] = y;
            log_w += std::log(law.weight(y));
        }
        // backward walk: S_{N+1-j} = pin + sum_{i<=j} Y_i
        std::int64_t pos = pin;
        for (std::int64_t j = 1; j <= n; ++j) {
            pos += incr[static_cast<std::size_t>(j - 1)];
            path[static_cast<std::size_t>(n - j)] = pos;
        }
        double e = bh * hamiltonian(field, path);
        if (mode == PartitionMode::wick_corrected)
            e -= 0.5 * bh * bh * intersection_local_time(gamma_table, path);
        log_terms.push_back(log_w + e);
    }
    return std::exp(log_sum_exp(log_terms));
}

// Second, independently structured enumeration for the plain mode: dynamic
// programming over (time, site), G_n(s) = sum_y w(y) e^{bh omega(n, s+y)}
// G_{n-1}(s+y), answer G_N(pin).
inline double enumerate_exact_dp(const PolymerParams& params, const DisorderField& field,
                                 const IncrementLaw& law) {
    if (!law.finite_support())
        throw std::invalid_argument("enumerate_exact_dp: finite-support law required");
    const std::int64_t n = params.n;
    const std::int64_t amax = law.max_tabulated();
    const std::int64_t reach = amax * n + 2;
    const std::int64_t pin = params.pinned_endpoint();
    const double bh = params.beta_hat();
    const auto idx = [&](std::int64_t site) { return static_cast<std::size_t>(site - pin + reach); };
    std::vector<double> g(static_cast<std::size_t>(2 * reach + 1), 1.0); // G_0
    std::vector<double> next(g.size(), 0.0);
    for (std::int64_t step = 1; step <= n; ++step) {
        std::fill(next.begin(), next.end(), 0.0);
        // G_step(s): s is the site occupied at time step+1, walking backward
        for (std::int64_t s = pin - (reach - amax); s <= pin + (reach - amax); ++s) {
            double acc = 0.0;
            for (std::int64_t y = -amax; y <= amax; ++y) {
                const std::int64_t site = s + y;
                acc += law.weight(y) *
                       std::exp(bh * field.omega_at(step, site)) * g[idx(site)];
            }
            next[idx(s)] = acc;
        }
        std::swap(g, next);
    }
    return g[idx(pin)];
}

struct ChaosEstimate {
    double value = 0.0;
    double stderr_ = 0.0;
    double mean_local_time = 0.0; // average ILT over the same paths
    std::int64_t paths = 0;
};

// Path-averaged mth chaos term. Plain: (beta_hat H)^m. Wick: the
// conditional-on-path Gaussian Wick power sigma^m H_m(Y/sigma) with
// sigma^2 = beta_hat^2 ILT(S).
inline ChaosEstimate chaos_term(const PolymerParams& params, const DisorderField& field,
                                const IncrementLaw& law, int m, std::int64_t m_paths,
                                bool wick, std::uint64_t seed, int workers = 1) {
    if (m < 0) throw std::invalid_argument("chaos_term: m must be >= 0");
    if (m_paths < 2) throw std::invalid_argument("chaos_term: need M >= 2");
    const double bh = params.beta_hat();
    const auto gamma_table = make_gamma_table(TemporalCovariance::fgn(params.hurst), params.n);
    std::vector<double> vals(static_cast<std::size_t>(m_paths));
    std::vector<double> ilts(static_cast<std::size_t>(m_paths));
    parallel_for(static_cast<std::size_t>(m_paths), workers, [&](std::size_t i) {
        CounterRng rng(derive_stream(seed, i));
        const auto path = pinned_path(params, law, rng);
        const double y = bh * hamiltonian(field, path);
        const double ilt = intersection_local_time(gamma_table, path);
        ilts[i] = ilt;
        if (m == 0) {
            vals[i] = 1.0;
        } else if (!wick) {
            vals[i] = std::pow(y, m);
        } else {
            const double sigma = bh * std::sqrt(ilt);
            vals[i] = std::pow(sigma, m) * hermite(m, y / sigma);
        }
    });
    const MeanStderr ms = mean_stderr(vals);
    ChaosEstimate out;
    out.value = ms.mean;
    out.stderr_ = ms.stderr_;
    out.mean_local_time = pairwise_mean(ilts);
    out.paths = m_paths;
    return out;
}

// ----------------------------------------------------------------------------
// U-statistics against a block grid
// ----------------------------------------------------------------------------

// N^{-m(theta+1/rho)} sum over grid cells of :omega...: times the block
// average. m = 1 is a plain centered sum; m = 2 subtracts the exact pair
// covariance gamma(n1-n2) delta_{k1 k2}.
inline double u_statistic(const DisorderField& field, const BlockGrid& grid, int m,
                          const PolymerParams& params) {
    if (m != grid.order) throw std::invalid_argument("u_statistic: m must match grid order");
    if (m < 1 || m > 2) throw std::invalid_argument("u_statistic: m in {1,2} only");
    const double scale =
        std::pow(static_cast<double>(params.n),
                 -static_cast<double>(m) * (params.theta() + 1.0 / params.rho));
    if (m == 1) {
        std::vector<double> terms;
        for (std::int64_t nt = 1; nt <= grid.n; ++nt)
            for (const auto& [k, v] : grid.rows[static_cast<std::size_t>(nt - 1)])
                if (v != 0.0) terms.push_back(field.omega_at(nt, k) * v);
        return scale * pairwise_sum(terms);
    }
    const TemporalCovariance cov = TemporalCovariance::fgn(params.hurst);
    std::vector<double> terms;
    terms.reserve(grid.cells2.size());
    for (const auto& [key, v] : grid.cells2) {
        const auto [n1, k1, n2, k2] = key;
        double wick_pair = field.omega_at(n1, k1) * field.omega_at(n2, k2);
        if (k1 == k2) wick_pair -= cov(n1 - n2);
        terms.push_back(wick_pair * v);
    }
    return scale * pairwise_sum(terms);
}

// Exact Var(I_1^{(N)}(f)) by the direct double sum over cells:
// N^{-2(theta+1/rho)} sum_{n, n', k} gamma(n - n') A(n,k) A(n',k).
inline double u_statistic_exact_variance_m1(const BlockGrid& grid,
                                            const TemporalCovariance& cov,
                                            const PolymerParams& params) {
    const auto gamma_table = make_gamma_table(cov, grid.n);
    std::vector<double> partial;
    partial.reserve(static_cast<std::size_t>(grid.n) * static_cast<std::size_t>(grid.n));
    for (std::int64_t a = 1; a <= grid.n; ++a) {
        const auto& ra = grid.rows[static_cast<std::size_t>(a - 1)];
        for (std::int64_t b = 1; b <= grid.n; ++b) {
            const auto& rb = grid.rows[static_cast<std::size_t>(b - 1)];
            double dot = 0.0;
            std::size_t i = 0, j = 0;
            while (i < ra.size() && j < rb.size()) {
                if (ra[i].first < rb[j].first)
                    ++i;
                else if (rb[j].first < ra[i].first)
                    ++j;
                else {
                    dot += ra[i].second * rb[j].second;
                    ++i;
                    ++j;
                }
            }
            partial.push_back(dot * gamma_table[static_cast<std::size_t>(std::llabs(a - b))]);
        }
    }
    const double scale =
        std::pow(static_cast<double>(params.n), -2.0 * (params.theta() + 1.0 / params.rho));
    return scale * pairwise_sum(partial);
}

// ----------------------------------------------------------------------------
// Exact variance of the first chaos term
// ----------------------------------------------------------------------------

struct VarianceResult {
    double value = 0.0;
    double error_bound = 0.0; // propagated kernel tail / alias bound
};

// Var(S_1^(N)) = beta_hat^2 sum_{n,n'} gamma(n-n') (P_{N+1-n} * P_{N+1-n'})(0).
// By symmetry of the law the pair convolution at 0 collapses through
// Chapman-Kolmogorov to the return probability P_{(N+1-n)+(N+1-n')}(0), so the
// double sum needs only the diagonal table P_s(0), s <= 2N.
inline VarianceResult exact_variance_s1(const PolymerParams& params, const IncrementLaw& law,
                                        const TemporalCovariance& cov) {
    const std::int64_t n = params.n;
    const ReturnProbTable tab = return_probabilities(law, 2 * n);
    const auto gamma_table = make_gamma_table(cov, n);
    // c(s) = #gamma-weighted pairs with (N+1-n) + (N+1-n') = s
    std::vector<double> pair_weight(static_cast<std::size_t>(2 * n + 1), 0.0);
    for (std::int64_t a = 1; a <= n; ++a)
        for (std::int64_t b = 1; b <= n; ++b)
            pair_weight[static_cast<std::size_t>(a + b)] +=
                gamma_table[static_cast<std::size_t>(std::llabs(a - b))];
    std::vector<double> terms;
    terms.reserve(static_cast<std::size_t>(2 * n - 1));
    double weight_total = 0.0;
    for (std::int64_t s = 2; s <= 2 * n; ++s) {
        terms.push_back(pair_weight[static_cast<std::size_t>(s)] *
                        tab.p0[static_cast<std::size_t>(s)]);
        weight_total += pair_weight[static_cast<std::size_t>(s)];
    }
    const double bh2 = params.beta_hat() * params.beta_hat();
    VarianceResult out;
    out.value = bh2 * pairwise_sum(terms);
    out.error_bound = bh2 * weight_total * tab.alias_bound;
    return out;
}

// ----------------------------------------------------------------------------
// Environment-moment oracles (exact in omega, Monte Carlo in the path)
// ----------------------------------------------------------------------------

enum class EnvMoment { mean_z, second_moment_z_tilde };

// mean_z:    E_omega[Z^(N)]    = E_S exp((beta_hat^2/2) ILT(S))
// second:    E_omega[Z~^(N)^2] = E_{S,S'} exp(beta_hat^2 sum gamma(i-j) 1{S_i=S'_j})
// both by the Gaussian moment-generating identity, path expectation by MC.
inline MeanStderr env_moment_oracle(const PolymerParams& params, const IncrementLaw& law,
                                    const TemporalCovariance& cov, std::int64_t m_paths,
                                    EnvMoment which, std::uint64_t seed, int workers = 1) {
    if (m_paths < 2) throw std::invalid_argument("env_moment_oracle: need M >= 2");
    const double bh2 = params.beta_hat() * params.beta_hat();
    const auto gamma_table = make_gamma_table(cov, params.n);
    std::vector<double> exponents(static_cast<std::size_t>(m_paths));
    parallel_for(static_cast<std::size_t>(m_paths), workers, [&](std::size_t i) {
        CounterRng rng(derive_stream(seed, i));
        if (which == EnvMoment::mean_z) {
            const auto path = pinned_path(params, law, rng);
            exponents[i] = 0.5 * bh2 * intersection_local_time(gamma_table, path);
        } else {
            const auto path_a = pinned_path(params, law, rng);
            const auto path_b = pinned_path(params, law, rng);
            exponents[i] =
                bh2 * cross_intersection_local_time(gamma_table, path_a, path_b);
        }
    });
    return exp_mean_stderr(exponents);
}

} // namespace dpre
