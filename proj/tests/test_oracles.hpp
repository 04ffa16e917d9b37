#pragma once

// Test-only oracles, kept independent of the implementation paths they check.

#include <cmath>
#include <functional>
#include <vector>

#include "dpre/quadrature.hpp"

namespace dpre::testing {

// Iterated adaptive quadrature of the ordered-simplex integral
//   int_{0 < r_1 < ... < r_m < t} prod (r_{i+1} - r_i)^{-alpha_i} dr,
// r_{m+1} = t. Layer g_j(u) = int_0^u (u - r)^{-alpha_j} g_{j-1}(r) dr with the
// endpoint singularity absorbed by the substitution r = u - w^{1/(1-alpha)}.
inline double simplex_quadrature_oracle(const std::vector<double>& alphas, double t,
                                        double rel_tol = 1e-8) {
    std::function<double(int, double)> layer = [&](int j, double u) -> double {
        if (j == 0) return 1.0;
        const double a = alphas[static_cast<std::size_t>(j - 1)];
        const double p = 1.0 - a; // > 0
        // r = u - w^{1/p}, dr = -(1/p) w^{1/p - 1} dw, (u-r)^{-a} = w^{-a/p}
        // => integrand (1/p) w^{(1-a)/p - 1} g_{j-1}(u - w^{1/p}) with
        // (1-a)/p = 1, so the weight is exactly 1/p: smooth in w.
        const double wmax = std::pow(u, p);
        const dpre::QuadResult q = dpre::integrate_adaptive(
            [&](double w) {
                const double r = u - std::pow(w, 1.0 / p);
                return (1.0 / p) * layer(j - 1, std::min(std::max(r, 0.0), u));
            },
            0.0, wmax, 1e-300, rel_tol, 40'000);
        return q.value;
    };
    return layer(static_cast<int>(alphas.size()), t);
}

// Leading asymptotic mass of the symmetric stable density beyond X:
// int_X^inf g(1, x) dx ~ (c Gamma(rho) sin(pi rho / 2) / pi) X^-rho.
inline double stable_tail_mass(double rho, double c_rho, double x) {
    const double pi = 3.141592653589793238462643383279;
    return c_rho * std::exp(std::lgamma(rho)) * std::sin(pi * rho / 2.0) / pi *
           std::pow(x, -rho);
}

} // namespace dpre::testing
