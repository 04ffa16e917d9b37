#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "dpre/fft.hpp"
#include "dpre/quadrature.hpp"
#include "dpre/rng.hpp"
#include "dpre/special.hpp"
#include "dpre/summation.hpp"

namespace dpre {

// One-lattice symmetric step distributions in the domain of attraction of a
// rho-stable law, rho in (1,2]. Two concrete families:
//   rho == 2 : the finite law {0: 3/8, +-1: 1/4, +-2: 1/16}, unit variance,
//              atom at 0 for aperiodicity.
//   rho <  2 : P(Y=0) = zero_mass, P(Y=+-k) ~ k^{-1-rho}/zeta(1+rho),
//              explicit table up to tail_cutoff, analytic Pareto tail beyond.
class IncrementLaw {
  public:
    static constexpr std::int64_t kDefaultTailCutoff = 1'000'000;

    static IncrementLaw rho2_law() {
        IncrementLaw law;
        law.rho_ = 2.0;
        law.atom_zero_ = 3.0 / 8.0;
        law.one_sided_ = {1.0 / 4.0, 1.0 / 16.0}; // k = 1, 2
        law.tail_cutoff_ = 2;
        law.tail_mass_side_ = 0.0;
        law.pareto_coeff_ = 0.0;
        law.finite_support_ = true;
        law.finalize();
        return law;
    }

    static IncrementLaw pareto_law(double rho, double zero_mass,
                                   std::int64_t tail_cutoff = kDefaultTailCutoff) {
        if (!(rho > 1.0 && rho < 2.0))
            throw std::invalid_argument("pareto_law: rho must lie in (1,2)");
        if (!(zero_mass > 0.0 && zero_mass < 1.0))
            throw std::invalid_argument("pareto_law: zero_mass must lie in (0,1)");
        IncrementLaw law;
        law.rho_ = rho;
        law.atom_zero_ = zero_mass;
        law.tail_cutoff_ = tail_cutoff;
        law.finite_support_ = false;
        const double zeta = riemann_zeta(1.0 + rho);
        law.pareto_coeff_ = 0.5 * (1.0 - zero_mass) / zeta;
        law.one_sided_.resize(static_cast<std::size_t>(tail_cutoff));
        double table_sum = 0.0;
        for (std::int64_t k = tail_cutoff; k >= 1; --k) {
            const double w = law.pareto_coeff_ * std::pow(static_cast<double>(k), -1.0 - rho);
            law.one_sided_[static_cast<std::size_t>(k - 1)] = w;
            table_sum += w;
        }
        law.tail_mass_side_ = 0.5 * (1.0 - zero_mass) - table_sum;
        if (law.tail_mass_side_ < 0.0) law.tail_mass_side_ = 0.0;
        law.finalize();
        return law;
    }

    double rho() const { return rho_; }
    double atom_zero() const { return atom_zero_; }
    bool finite_support() const { return finite_support_; }
    std::int64_t tail_cutoff() const { return tail_cutoff_; }
    double tail_mass_per_side() const { return tail_mass_side_; }

    // largest |k| with an explicit table entry
    std::int64_t max_tabulated() const { return tail_cutoff_; }

    double weight(std::int64_t k) const {
        const std::int64_t a = std::llabs(k);
        if (a == 0) return atom_zero_;
        if (a <= tail_cutoff_) return one_sided_[static_cast<std::size_t>(a - 1)];
        if (finite_support_) return 0.0;
        return pareto_coeff_ * std::pow(static_cast<double>(a), -1.0 - rho_);
    }

    // Recorded constant with weight(k) <= C |k|^{-1-rho} for k != 0.
    double pareto_bound_constant() const {
        if (!finite_support_) return pareto_coeff_ * 1.0000000001;
        double c = 0.0;
        for (std::int64_t k = 1; k <= tail_cutoff_; ++k)
            c = std::max(c, weight(k) * std::pow(static_cast<double>(k), 1.0 + rho_));
        return c;
    }

    double total_mass() const {
        std::vector<double> parts;
        parts.reserve(one_sided_.size() + 2);
        for (double w : one_sided_) parts.push_back(2.0 * w);
        parts.push_back(atom_zero_);
        parts.push_back(2.0 * tail_mass_side_);
        return pairwise_sum(parts);
    }

    double second_moment() const {
        if (!finite_support_) return INFINITY;
        double s = 0.0;
        for (std::size_t i = 0; i < one_sided_.size(); ++i) {
            const double k = static_cast<double>(i + 1);
            s += 2.0 * one_sided_[i] * k * k;
        }
        return s;
    }

    // Characteristic function psi(u) = sum_k w(k) cos(ku); real by symmetry.
    double char_fn(double u) const {
        u = reduce_angle(u);
        if (u == 0.0) return 1.0;
        return 1.0 - one_minus_char(u);
    }

    // 1 - psi(u) accumulated as a sum of nonnegative terms 2 w(k) (1-cos ku),
    // so there is no cancellation for small u (needed by c_rho calibration).
    double one_minus_char(double u) const {
        u = reduce_angle(u);
        if (u == 0.0) return 0.0;
        const std::int64_t A = char_sum_limit();
        std::vector<double> terms;
        terms.reserve(static_cast<std::size_t>(A));
        for (std::int64_t k = 1; k <= A; ++k) {
            const double s = std::sin(0.5 * u * static_cast<double>(k));
            terms.push_back(4.0 * one_sided_[static_cast<std::size_t>(k - 1)] * s * s);
        }
        double out = pairwise_sum(terms);
        if (!finite_support_) {
            const double a = static_cast<double>(A) + 0.5;
            const double plain = tail_power_sum(a);
            const double osc = tail_cos_sum(a, std::abs(u));
            out += 2.0 * pareto_coeff_ * (plain - osc);
        }
        return out;
    }

    // psi on the uniform grid u_j = 2 pi j / m, evaluated exactly for the
    // whole weight table by folding it mod m and taking one FFT.
    std::vector<double> char_fn_grid(std::size_t m) const {
        if (m == 0 || (m & (m - 1)) != 0)
            throw std::invalid_argument("char_fn_grid: m must be a power of two");
        std::vector<std::complex<double>> d(m, 0.0);
        for (std::int64_t k = 1; k <= tail_cutoff_; ++k)
            d[static_cast<std::size_t>(k % static_cast<std::int64_t>(m))] +=
                one_sided_[static_cast<std::size_t>(k - 1)];
        fft_pow2(d, +1); // e^{+2 pi i j r / m}
        const double two_pi = 6.283185307179586476925286766559;
        std::vector<double> psi(m);
        for (std::size_t j = 0; j < m; ++j) {
            double v = atom_zero_ + 2.0 * d[j].real();
            if (!finite_support_ && j != 0) {
                const double u = two_pi * static_cast<double>(j) / static_cast<double>(m);
                const double ur = u <= 3.141592653589793238462643383279 ? u : two_pi - u;
                v += 2.0 * pareto_coeff_ *
                     tail_cos_sum(static_cast<double>(tail_cutoff_) + 0.5, ur);
            }
            psi[j] = v;
        }
        psi[0] = 1.0;
        return psi;
    }

    // Inverse-CDF sampling: finite table by binary search, analytic Pareto
    // inversion past the cutoff. Deterministic given the stream state.
    std::int64_t sample_increment(CounterRng& rng) const {
        const double u = rng.next_double();
        if (u < atom_zero_) return 0;
        double v = (u - atom_zero_) / (1.0 - atom_zero_);
        if (v >= 1.0) v = std::nextafter(1.0, 0.0);
        const bool negative = v >= 0.5;
        double w = negative ? 2.0 * (v - 0.5) : 2.0 * v; // uniform in [0,1)
        const double side_mass = 0.5 * (1.0 - atom_zero_);
        const double table_frac = cdf_.empty() ? 0.0 : cdf_.back() / side_mass;
        std::int64_t k;
        if (w < table_frac) {
            const double target = w * side_mass;
            k = 1 + static_cast<std::int64_t>(
                        std::lower_bound(cdf_.begin(), cdf_.end(), target) - cdf_.begin());
            if (k > tail_cutoff_) k = tail_cutoff_;
        } else {
            // conditional tail: P(K > x | K > cutoff) = (x/a)^{-rho}
            const double rem = (1.0 - w) / std::max(1.0 - table_frac, 1e-300);
            const double a = static_cast<double>(tail_cutoff_) + 0.5;
            const double x = a * std::pow(std::min(std::max(rem, 1e-300), 1.0), -1.0 / rho_);
            k = std::max<std::int64_t>(tail_cutoff_ + 1, static_cast<std::int64_t>(std::llround(x)));
        }
        return negative ? -k : k;
    }

  private:
    IncrementLaw() = default;

    void finalize() {
        cdf_.resize(one_sided_.size());
        double acc = 0.0;
        for (std::size_t i = 0; i < one_sided_.size(); ++i) {
            acc += one_sided_[i];
            cdf_[i] = acc;
        }
    }

    static double reduce_angle(double u) {
        const double two_pi = 6.283185307179586476925286766559;
        u = std::fmod(u, two_pi);
        if (u > 3.141592653589793238462643383279) u -= two_pi;
        if (u < -3.141592653589793238462643383279) u += two_pi;
        return std::abs(u);
    }

    std::int64_t char_sum_limit() const {
        return finite_support_ ? tail_cutoff_ : std::min<std::int64_t>(tail_cutoff_, 20'000);
    }

    // sum_{k > A} k^{-1-rho} via the midpoint-rule tail, a = A + 1/2.
    double tail_power_sum(double a) const {
        const double s = 1.0 + rho_;
        return std::pow(a, -rho_) / rho_ - s / 24.0 * std::pow(a, -s - 1.0);
    }

    // sum_{k > A} k^{-1-rho} cos(ku), a = A + 1/2, 0 < u <= pi. Quadrature on
    // [a, X] with oscillation-limited panels, then integration by parts from
    // X where uX >= 16; plus the midpoint correction f'(a)/24.
    double tail_cos_sum(double a, double u) const {
        const double s = 1.0 + rho_;
        const double X = std::max(a, 16.0 / u);
        double integral = 0.0;
        if (X > a) {
            const double panel = std::min(
                3.141592653589793238462643383279 / (4.0 * u), (X - a));
            double lo = a;
            while (lo < X - 1e-12 * X) {
                const double hi = std::min(X, lo + panel);
                integral += gauss15(
                    [&](double x) { return std::cos(u * x) * std::pow(x, -s); }, lo, hi);
                lo = hi;
            }
        }
        // int_X^inf cos(ux) x^{-s} dx, three integration-by-parts terms
        const double sx = std::sin(u * X), cx = std::cos(u * X);
        const double xs = std::pow(X, -s);
        double ibp = -sx * xs / u + s / (u * u) * cx * xs / X;
        ibp += s * (s + 1.0) / (u * u) * sx * xs / (X * X * u);
        integral += ibp;
        // midpoint correction + f'(a)/24
        const double fa = (-s * std::pow(a, -s - 1.0) * std::cos(u * a) -
                           u * std::pow(a, -s) * std::sin(u * a)) / 24.0;
        return integral + fa;
    }

    double rho_ = 2.0;
    double atom_zero_ = 0.0;
    std::vector<double> one_sided_; // weight(k), k = 1..tail_cutoff
    std::vector<double> cdf_;       // cumulative one-sided table mass
    std::int64_t tail_cutoff_ = 0;
    double tail_mass_side_ = 0.0;
    double pareto_coeff_ = 0.0;
    bool finite_support_ = true;
};

inline IncrementLaw build_increment_law(double rho, double zero_mass) {
    if (!(rho > 1.0 && rho <= 2.0))
        throw std::invalid_argument("build_increment_law: rho must lie in (1,2]");
    if (rho == 2.0) return IncrementLaw::rho2_law();
    return IncrementLaw::pareto_law(rho, zero_mass);
}

// Exact n-step distribution on a symmetric window [-W, W]; mass that leaves
// the window during the convolutions is accounted in tail_mass.
struct TransitionKernel {
    std::int64_t n = 0;
    std::int64_t window = 0;
    std::vector<double> probs; // index i <-> site i - window
    double tail_mass = 0.0;

    double at(std::int64_t k) const {
        if (k < -window || k > window) return 0.0;
        return probs[static_cast<std::size_t>(k + window)];
    }
};

namespace walk_detail {

inline std::vector<double> window_convolve(const std::vector<double>& a,
                                           const std::vector<double>& b,
                                           std::int64_t window) {
    // both inputs live on [-window, window]; restrict the result back
    std::vector<double> full;
    const std::size_t direct_threshold = 96;
    if (a.size() <= direct_threshold || b.size() <= direct_threshold) {
        full.assign(a.size() + b.size() - 1, 0.0);
        for (std::size_t i = 0; i < a.size(); ++i) {
            if (a[i] == 0.0) continue;
            for (std::size_t j = 0; j < b.size(); ++j) full[i + j] += a[i] * b[j];
        }
    } else {
        full = fft_convolve(a, b);
    }
    std::vector<double> out(static_cast<std::size_t>(2 * window + 1));
    const std::int64_t shift = window; // full index 2*window corresponds to site 0
    for (std::int64_t k = -window; k <= window; ++k) {
        const double v = full[static_cast<std::size_t>(k + shift + window)];
        out[static_cast<std::size_t>(k + window)] = v > 0.0 ? v : 0.0;
    }
    return out;
}

} // namespace walk_detail

inline TransitionKernel transition_kernel(const IncrementLaw& law, std::int64_t n,
                                          std::int64_t window) {
    if (n < 0) throw std::invalid_argument("transition_kernel: n must be >= 0");
    if (window < 2) throw std::invalid_argument("transition_kernel: window too small");
    TransitionKernel ker;
    ker.n = n;
    ker.window = window;
    ker.probs.assign(static_cast<std::size_t>(2 * window + 1), 0.0);
    ker.probs[static_cast<std::size_t>(window)] = 1.0; // P_0 = delta at 0
    if (n == 0) return ker;

    std::vector<double> step(static_cast<std::size_t>(2 * window + 1), 0.0);
    for (std::int64_t k = -window; k <= window; ++k)
        step[static_cast<std::size_t>(k + window)] = law.weight(k);

    // exponentiation by squaring over the binary expansion of n
    std::vector<double> acc = ker.probs;
    std::vector<double> pw = step;
    std::int64_t e = n;
    bool acc_is_identity = true;
    while (e > 0) {
        if (e & 1) {
            if (acc_is_identity) {
                acc = pw;
                acc_is_identity = false;
            } else {
                acc = walk_detail::window_convolve(acc, pw, window);
            }
        }
        e >>= 1;
        if (e > 0) pw = walk_detail::window_convolve(pw, pw, window);
    }
    ker.probs = std::move(acc);
    const double kept = pairwise_sum(ker.probs);
    ker.tail_mass = std::max(0.0, 1.0 - kept);
    if (ker.tail_mass > 0.01)
        throw std::runtime_error("transition_kernel: window too small, tail_mass > 0.01");
    return ker;
}

// Diagonal return probabilities P_s(0) for s = 0..s_max, computed on the
// circle Z_m through the characteristic function: P_s(0) ~ (1/m) sum_j psi_j^s.
// The circle wrap adds sum_{j != 0} P_s(jm), reported as alias_bound.
struct ReturnProbTable {
    std::vector<double> p0;     // p0[s] = P_s(0)
    double alias_bound = 0.0;   // uniform bound on the wrap error, worst s
    std::size_t grid = 0;
};

inline ReturnProbTable return_probabilities(const IncrementLaw& law, std::int64_t s_max) {
    ReturnProbTable tab;
    const double span = std::pow(static_cast<double>(std::max<std::int64_t>(s_max, 2)),
                                 1.0 / law.rho());
    std::size_t m = next_pow2(static_cast<std::size_t>(std::max(4096.0, 64.0 * span)));
    if (!law.finite_support()) m = std::max<std::size_t>(m, 32768);
    tab.grid = m;
    const std::vector<double> psi = law.char_fn_grid(m);
    tab.p0.assign(static_cast<std::size_t>(s_max + 1), 0.0);
    std::vector<double> power(m, 1.0);
    for (std::int64_t s = 0; s <= s_max; ++s) {
        if (s > 0)
            for (std::size_t j = 0; j < m; ++j) power[j] *= psi[j];
        tab.p0[static_cast<std::size_t>(s)] =
            pairwise_sum(power) / static_cast<double>(m);
    }
    if (law.finite_support()) {
        // bounded steps: Hoeffding on |S_s| >= m
        const double md = static_cast<double>(m);
        tab.alias_bound =
            2.0 * std::exp(-md * md / (8.0 * static_cast<double>(std::max<std::int64_t>(s_max, 1))));
    } else {
        // heavy tail: wrap mass dominated by single long jumps to +-jm
        const double c = law.pareto_bound_constant();
        double b = 0.0;
        for (int j = 1; j <= 64; ++j)
            b += 2.0 * c * std::pow(static_cast<double>(j) * static_cast<double>(m),
                                    -1.0 - law.rho());
        tab.alias_bound = 2.0 * static_cast<double>(s_max) * b;
    }
    return tab;
}

// Limiting rho-stable density g(t, x); for rho = 2 the Gaussian closed form
// (c_2 = 1/2 gives variance t), otherwise the cosine-transform quadrature
// g(1, y) = (1/pi) int_0^inf cos(y eta) exp(-c eta^rho) d eta with
// oscillation-limited panels, cached on a uniform grid.
class StableDensity {
  public:
    StableDensity(double rho, double c_rho) : rho_(rho), c_(c_rho) {
        if (!(rho > 1.0 && rho <= 2.0))
            throw std::invalid_argument("StableDensity: rho must lie in (1,2]");
        if (!(c_rho > 0.0)) throw std::invalid_argument("StableDensity: c_rho must be > 0");
        if (rho_ != 2.0) build_cache();
    }

    double rho() const { return rho_; }
    double c_rho() const { return c_; }

    double density1(double x) const {
        x = std::abs(x);
        if (rho_ == 2.0) {
            // c = 1/2: standard normal
            return std::exp(-0.5 * x * x) * 0.39894228040143267793994605993438;
        }
        if (x >= xmax_) return tail_series(x);
        // 4-point Lagrange interpolation on the cached grid
        const double pos = x / dx_;
        std::size_t i = static_cast<std::size_t>(pos);
        if (i < 1) i = 1;
        if (i > cache_.size() - 3) i = cache_.size() - 3;
        const double t = pos - static_cast<double>(i);
        const double ym1 = cache_[i - 1], y0 = cache_[i], y1 = cache_[i + 1],
                     y2 = cache_[i + 2];
        const double a = (-t * (t - 1.0) * (t - 2.0)) / 6.0;
        const double b = ((t + 1.0) * (t - 1.0) * (t - 2.0)) / 2.0;
        const double cc = (-(t + 1.0) * t * (t - 2.0)) / 2.0;
        const double d = ((t + 1.0) * t * (t - 1.0)) / 6.0;
        return a * ym1 + b * y0 + cc * y1 + d * y2;
    }

    double density(double t, double x) const {
        if (!(t > 0.0)) throw std::invalid_argument("StableDensity: t must be > 0");
        const double scale = std::pow(t, -1.0 / rho_);
        return scale * density1(scale * x);
    }

    // g(1,0) in closed form: (1/pi) int_0^inf e^{-c eta^rho} = Gamma(1+1/rho)/(pi c^{1/rho})
    double peak() const {
        if (rho_ == 2.0) return 0.39894228040143267793994605993438;
        return gamma_fn(1.0 + 1.0 / rho_) / (3.141592653589793238462643383279 *
                                             std::pow(c_, 1.0 / rho_));
    }

  private:
    double direct_g1(double y) const {
        const double upper = std::pow(40.0 / c_, 1.0 / rho_);
        const double panel = std::min(3.141592653589793238462643383279 /
                                          (2.0 * (std::abs(y) + 1.0)),
                                      upper / 8.0);
        double lo = 0.0, total = 0.0;
        while (lo < upper) {
            const double hi = std::min(upper, lo + panel);
            total += gauss15(
                [&](double eta) {
                    return std::cos(y * eta) * std::exp(-c_ * std::pow(eta, rho_));
                },
                lo, hi);
            lo = hi;
        }
        return total / 3.141592653589793238462643383279;
    }

    // Bergstroem large-x expansion of the symmetric stable density:
    // g(1,x) = (1/pi) sum_k (-1)^{k+1} (c^k / k!) Gamma(rho k + 1)
    //          sin(k pi rho / 2) x^{-rho k - 1}; three terms past the cache.
    double tail_series(double x) const {
        double total = 0.0;
        for (int k = 1; k <= 3; ++k)
            total += tail_coeff_[static_cast<std::size_t>(k - 1)] *
                     std::pow(x, -rho_ * k - 1.0);
        return std::max(total, 0.0);
    }

    void build_cache() {
        xmax_ = 24.0;
        dx_ = 1.0 / 256.0;
        const std::size_t n = static_cast<std::size_t>(xmax_ / dx_) + 4;
        cache_.resize(n);
        for (std::size_t i = 0; i < n; ++i)
            cache_[i] = direct_g1(static_cast<double>(i) * dx_);
        const double pi = 3.141592653589793238462643383279;
        double fact = 1.0, cpow = 1.0;
        for (int k = 1; k <= 3; ++k) {
            fact *= k;
            cpow *= c_;
            const double sign = (k % 2 == 1) ? 1.0 : -1.0;
            tail_coeff_[static_cast<std::size_t>(k - 1)] =
                sign * cpow / (fact * pi) * gamma_fn(rho_ * k + 1.0) *
                std::sin(k * pi * rho_ / 2.0);
        }
    }

    double rho_;
    double c_;
    std::vector<double> cache_;
    std::array<double, 3> tail_coeff_{};
    double dx_ = 0.0;
    double xmax_ = 0.0;
};

// c_rho = lim_{u->0} (1 - psi(u)) / |u|^rho, Richardson extrapolation on the
// geometric ladder u = 2^-j. The correction exponent is 2-rho (pure u^2 for
// rho=2, where the limit is half the variance).
inline double calibrate_c_rho(const IncrementLaw& law) {
    const double rho = law.rho();
    const double q = rho < 2.0 ? 2.0 - rho : 2.0;
    const double denom = 1.0 - std::pow(2.0, -q);
    double r_prev = 0.0, extrap_prev = 0.0;
    bool have_prev = false, have_extrap = false;
    for (int j = 3; j <= 24; ++j) {
        const double u = std::ldexp(1.0, -j);
        const double r = law.one_minus_char(u) / std::pow(u, rho);
        if (have_prev) {
            const double extrap = (r - std::pow(2.0, -q) * r_prev) / denom;
            if (have_extrap &&
                std::abs(extrap - extrap_prev) <= 1e-4 * std::abs(extrap) && j >= 6)
                return extrap;
            extrap_prev = extrap;
            have_extrap = true;
        }
        r_prev = r;
        have_prev = true;
    }
    throw std::runtime_error("calibrate_c_rho: extrapolation ladder did not settle");
}

// Walk path S_1..S_length with S_0 = start.
inline std::vector<std::int64_t> sample_path(const IncrementLaw& law, std::int64_t length,
                                             std::int64_t start, CounterRng& rng) {
    if (length < 1) throw std::invalid_argument("sample_path: length must be >= 1");
    std::vector<std::int64_t> s(static_cast<std::size_t>(length));
    std::int64_t pos = start;
    for (std::int64_t i = 0; i < length; ++i) {
        pos += law.sample_increment(rng);
        s[static_cast<std::size_t>(i)] = pos;
    }
    return s;
}

// sup_k | n^{1/rho} P_n(k) - g(1, k / n^{1/rho}) | over the kernel window.
inline double llt_residual(const IncrementLaw& law, const StableDensity& density,
                           std::int64_t n) {
    if (n < 1) throw std::invalid_argument("llt_residual: n must be >= 1");
    const double scale = std::pow(static_cast<double>(n), 1.0 / law.rho());
    const std::int64_t window =
        std::max<std::int64_t>(16, static_cast<std::int64_t>(16.0 * std::ceil(scale)));
    const TransitionKernel ker = transition_kernel(law, n, window);
    double worst = 0.0;
    for (std::int64_t k = -window; k <= window; ++k) {
        const double diff = scale * ker.at(k) -
                            density.density1(static_cast<double>(k) / scale);
        worst = std::max(worst, std::abs(diff));
    }
    return worst;
}

} // namespace dpre
