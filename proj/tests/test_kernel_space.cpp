#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "dpre/kernel_space.hpp"
#include "dpre/rng.hpp"
#include "test_oracles.hpp"

using namespace dpre;

namespace {

const double kH = 0.85;

KernelFn unit_box() {
    KernelFn f;
    f.order = 1;
    f.spatial_support = 1.0;
    f.eval = [](std::span<const double> t, std::span<const double> x) {
        return (t[0] >= 0.0 && t[0] <= 1.0 && x[0] >= 0.0 && x[0] <= 1.0) ? 1.0 : 0.0;
    };
    f.time_breaks = {0.0, 1.0};
    f.space_breaks = {0.0, 1.0};
    return f;
}

KernelFn smooth_kernel(double a, double b, double c) {
    KernelFn f;
    f.order = 1;
    f.spatial_support = 1.0;
    f.eval = [a, b, c](std::span<const double> t, std::span<const double> x) {
        if (std::abs(x[0]) > 1.0) return 0.0;
        return (a + b * t[0]) * (1.0 - x[0] * x[0]) + c * t[0] * x[0];
    };
    f.space_breaks = {-1.0, 1.0};
    return f;
}

// exact coarse-graining of an aligned fine grid (time factor divides, space
// cells nest), the conditional expectation A_N restricted to grid functions
BlockGrid coarsen(const BlockGrid& fine, std::int64_t coarse_n) {
    const std::int64_t t_ratio = fine.n / coarse_n;
    const double dx_ratio_d = std::pow(static_cast<double>(fine.n) / coarse_n, 1.0 / fine.rho);
    const auto x_ratio = static_cast<std::int64_t>(std::llround(dx_ratio_d));
    REQUIRE(t_ratio * coarse_n == fine.n);
    REQUIRE(std::abs(dx_ratio_d - static_cast<double>(x_ratio)) < 1e-9);
    BlockGrid out;
    out.order = 1;
    out.n = coarse_n;
    out.rho = fine.rho;
    out.spatial_support = fine.spatial_support;
    out.rows.assign(static_cast<std::size_t>(coarse_n), {});
    for (std::int64_t nt = 1; nt <= coarse_n; ++nt) {
        std::map<std::int64_t, double> acc;
        for (std::int64_t ft = (nt - 1) * t_ratio + 1; ft <= nt * t_ratio; ++ft)
            for (const auto& [k, v] : fine.rows[static_cast<std::size_t>(ft - 1)]) {
                const std::int64_t ck =
                    k >= 0 ? k / x_ratio : -((-k + x_ratio - 1) / x_ratio);
                acc[ck] += v;
            }
        auto& row = out.rows[static_cast<std::size_t>(nt - 1)];
        const double cells = static_cast<double>(t_ratio * x_ratio);
        for (const auto& [k, v] : acc) row.emplace_back(k, v / cells);
    }
    return out;
}

BlockGrid random_fine_grid(std::int64_t n, double support, CounterRng& rng) {
    BlockGrid g;
    g.order = 1;
    g.n = n;
    g.rho = 2.0;
    g.spatial_support = support;
    g.rows.assign(static_cast<std::size_t>(n), {});
    const auto khalf = static_cast<std::int64_t>(support * std::sqrt(static_cast<double>(n)));
    for (std::int64_t nt = 1; nt <= n; ++nt)
        for (std::int64_t k = -khalf; k < khalf; ++k)
            g.rows[static_cast<std::size_t>(nt - 1)].emplace_back(k, rng.next_gaussian());
    return g;
}

} // namespace

TEST_CASE("h_inner closed forms") {
    const KernelFn box = unit_box();
    const InnerResult r = h_inner(box, box, kH, 1e-6);
    CHECK(r.converged);
    CHECK(r.value == doctest::Approx(1.0 / (kH * (2 * kH - 1))).epsilon(3e-5));

    // H = 1: degenerate weight, propagator integral squared
    const InnerResult r1 = h_inner(box, box, 1.0, 1e-7);
    CHECK(r1.value == doctest::Approx(1.0).epsilon(1e-5));

    // disjoint spatial supports kill the shared-x integral
    KernelFn shifted = box;
    shifted.eval = [](std::span<const double> t, std::span<const double> x) {
        return (t[0] >= 0.0 && t[0] <= 1.0 && x[0] >= -1.0 && x[0] <= -0.5) ? 1.0 : 0.0;
    };
    shifted.space_breaks = {-1.0, -0.5};
    CHECK(h_inner(box, shifted, kH, 1e-7).value == doctest::Approx(0.0).epsilon(1e-10));

    CHECK_THROWS_AS(h_inner(box, box, 0.4, 1e-6), std::invalid_argument);
}

TEST_CASE("h_inner symmetry and bilinearity") {
    const KernelFn f = smooth_kernel(0.7, -0.4, 0.9);
    const KernelFn g = smooth_kernel(-0.2, 1.1, 0.3);
    const KernelFn h2 = smooth_kernel(0.5, 0.5, -1.0);

    const double fg = h_inner(f, g, kH, 1e-8).value;
    const double gf = h_inner(g, f, kH, 1e-8).value;
    CHECK(fg == doctest::Approx(gf).epsilon(1e-8));

    // linear combination: <2.5 f + g, h> = 2.5 <f,h> + <g,h>
    KernelFn combo;
    combo.order = 1;
    combo.spatial_support = 1.0;
    combo.eval = [&f, &g](std::span<const double> t, std::span<const double> x) {
        return 2.5 * f(t, x) + g(t, x);
    };
    const double lhs = h_inner(combo, h2, kH, 1e-8).value;
    const double rhs = 2.5 * h_inner(f, h2, kH, 1e-8).value + h_inner(g, h2, kH, 1e-8).value;
    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-7));
}

TEST_CASE("b_norm") {
    const KernelFn box = unit_box();
    CHECK(b_norm(box, kH) ==
          doctest::Approx(std::sqrt(1.0 / (kH * (2 * kH - 1)))).epsilon(2e-5));

    KernelFn neg = box;
    neg.eval = [](std::span<const double> t, std::span<const double> x) {
        return (t[0] >= 0.0 && t[0] <= 1.0 && x[0] >= 0.0 && x[0] <= 1.0) ? -1.0 : 0.0;
    };
    CHECK(b_norm(neg, kH) == doctest::Approx(b_norm(box, kH)).epsilon(1e-9));

    KernelFn scaled = box;
    scaled.eval = [](std::span<const double> t, std::span<const double> x) {
        return (t[0] >= 0.0 && t[0] <= 1.0 && x[0] >= 0.0 && x[0] <= 1.0) ? 2.5 : 0.0;
    };
    CHECK(b_norm(scaled, kH) == doctest::Approx(2.5 * b_norm(box, kH)).epsilon(1e-9));
}

TEST_CASE("monte carlo path for tensor order 2") {
    // product kernel: <h (x) h, h (x) h> = <h,h>^2
    const KernelFn h1 = smooth_kernel(0.8, 0.3, 0.0);
    const double inner1 = h_inner(h1, h1, kH, 1e-8).value;
    KernelFn prod;
    prod.order = 2;
    prod.spatial_support = 1.0;
    prod.eval = [&h1](std::span<const double> t, std::span<const double> x) {
        const double t0 = t[0], t1 = t[1], x0 = x[0], x1 = x[1];
        return h1(std::span<const double>(&t0, 1), std::span<const double>(&x0, 1)) *
               h1(std::span<const double>(&t1, 1), std::span<const double>(&x1, 1));
    };
    const InnerResult r = h_inner(prod, prod, kH, 1e-4, 0x77, 300'000);
    CHECK(r.monte_carlo);
    CHECK(std::abs(r.value - inner1 * inner1) < 4.0 * r.error);
}

TEST_CASE("block averaging") {
    SUBCASE("constants are fixed points") {
        KernelFn c;
        c.order = 1;
        c.spatial_support = 1.0;
        c.eval = [](std::span<const double>, std::span<const double> x) {
            return std::abs(x[0]) <= 1.0 ? 3.25 : 0.0;
        };
        const BlockGrid g = block_average(c, 16, 2.0);
        for (std::int64_t nt = 1; nt <= 16; ++nt)
            CHECK(g.value1(nt, 0) == doctest::Approx(3.25).epsilon(1e-14));
    }

    SUBCASE("linear in t averages to the midpoint") {
        KernelFn lin;
        lin.order = 1;
        lin.spatial_support = 1.0;
        lin.eval = [](std::span<const double> t, std::span<const double> x) {
            return std::abs(x[0]) <= 1.0 ? (2.0 * t[0] - 0.5) : 0.0;
        };
        const std::int64_t n = 8;
        const BlockGrid g = block_average(lin, n, 2.0);
        for (std::int64_t nt = 1; nt <= n; ++nt) {
            const double mid = (static_cast<double>(nt) - 0.5) / static_cast<double>(n);
            CHECK(g.value1(nt, 0) == doctest::Approx(2.0 * mid - 0.5).epsilon(1e-13));
        }
    }

    SUBCASE("idempotence") {
        const KernelFn f = smooth_kernel(0.4, 1.3, -0.2);
        const BlockGrid g = block_average(f, 8, 2.0);
        const BlockGrid g2 = block_average(grid_kernel(g), 8, 2.0);
        for (std::int64_t nt = 1; nt <= 8; ++nt)
            for (const auto& [k, v] : g.rows[static_cast<std::size_t>(nt - 1)])
                CHECK(g2.value1(nt, k) == doctest::Approx(v).epsilon(1e-12));
    }

    SUBCASE("order-2 cells") {
        KernelFn f2;
        f2.order = 2;
        f2.spatial_support = 0.5;
        f2.eval = [](std::span<const double> t, std::span<const double> x) {
            if (std::abs(x[0]) > 0.5 || std::abs(x[1]) > 0.5) return 0.0;
            return t[0] + 2.0 * t[1];
        };
        const BlockGrid g = block_average(f2, 4, 2.0);
        // cell (n1=1, n2=3, k1=0, k2=0): value t-midpoints 0.125 + 2*0.625
        CHECK(g.value2(1, 0, 3, 0) == doctest::Approx(0.125 + 1.25).epsilon(1e-13));
    }
}

TEST_CASE("closed-form time integrals") {
    CHECK(time_square_integral(kH, 0.0, 1.0) ==
          doctest::Approx(1.0 / (kH * (2.0 * kH - 1.0))).epsilon(1e-14));
    CHECK(time_square_integral(1.0, 0.0, 1.0) == 1.0);
    CHECK(time_square_integral(kH, 0.25, 0.75) ==
          doctest::Approx(std::pow(0.5, 1.7) / 0.595).epsilon(1e-12));
    CHECK_THROWS_AS(time_square_integral(kH, 0.5, 0.5), std::invalid_argument);
}

TEST_CASE("simplex gamma integral") {
    CHECK(simplex_gamma_integral({0.0}, 1.0) == doctest::Approx(1.0).epsilon(1e-13));
    CHECK(simplex_gamma_integral({0.5, 0.5}, 1.0) ==
          doctest::Approx(3.141592653589793238462643383279).epsilon(1e-9));
    CHECK_THROWS_AS(simplex_gamma_integral({1.2}, 1.0), std::invalid_argument);
    CHECK_THROWS_AS(simplex_gamma_integral({0.2}, 0.0), std::invalid_argument);

    SUBCASE("against the iterated quadrature oracle") {
        CounterRng rng(606);
        for (int cse = 0; cse < 20; ++cse) {
            const int m = 1 + static_cast<int>(rng.next_u64() % 3);
            std::vector<double> alphas;
            for (int i = 0; i < m; ++i) alphas.push_back(-1.0 + 1.8 * rng.next_double());
            const double t = 0.3 + 1.7 * rng.next_double();
            const double closed = simplex_gamma_integral(alphas, t);
            const double quad = dpre::testing::simplex_quadrature_oracle(alphas, t);
            CAPTURE(cse);
            CHECK(std::abs(closed - quad) / closed < 1e-6);
        }
    }
}

TEST_CASE("jensen inequalities for block averaging") {
    CounterRng rng(0xFACE);

    SUBCASE("spatial-only averaging contracts the B-norm") {
        for (int cse = 0; cse < 50; ++cse) {
            BlockGrid fine = random_fine_grid(16, 2.0, rng);
            BlockGrid sp = fine;
            for (auto& row : sp.rows)
                for (std::size_t i = 0; i + 1 < row.size(); i += 2) {
                    const double m = 0.5 * (row[i].second + row[i + 1].second);
                    row[i].second = m;
                    row[i + 1].second = m;
                }
            CHECK(grid_b_norm(sp, kH) <= grid_b_norm(fine, kH) * (1.0 + 1e-9));
        }
    }

    SUBCASE("full averaging bounded by a stable constant") {
        // calibrate C_H on one corpus, verify on a fresh corpus across N
        const std::int64_t fine_n = 256;
        double c_h = 0.0;
        for (int cse = 0; cse < 12; ++cse) {
            const BlockGrid fine = random_fine_grid(fine_n, 1.0, rng);
            const double base = grid_b_norm(fine, kH);
            for (std::int64_t coarse : {4, 16, 64, 256})
                c_h = std::max(c_h, grid_b_norm(coarsen(fine, coarse), kH) / base);
        }
        CHECK(c_h < 2.0);
        for (int cse = 0; cse < 12; ++cse) {
            const BlockGrid fine = random_fine_grid(fine_n, 1.0, rng);
            const double base = grid_b_norm(fine, kH);
            for (std::int64_t coarse : {4, 16, 64, 256}) {
                const double ratio = grid_b_norm(coarsen(fine, coarse), kH) / base;
                CHECK(ratio <= c_h * 1.02);
            }
        }
    }

    SUBCASE("time-direction averaging against direct quadrature") {
        // pure-time step functions on [0,1]: the weighted form via the exact
        // per-cell-pair integrals of |s-t|^{2H-2}
        auto time_form = [](const std::vector<double>& vals) {
            const auto n = static_cast<std::int64_t>(vals.size());
            double total = 0.0;
            for (std::int64_t a = 0; a < n; ++a)
                for (std::int64_t b = 0; b < n; ++b)
                    total += std::abs(vals[static_cast<std::size_t>(a)]) *
                             std::abs(vals[static_cast<std::size_t>(b)]) *
                             cell_time_weight(kH, a - b, 1.0 / static_cast<double>(n));
            return total;
        };
        double c_cal = 0.0;
        std::vector<double> ratios;
        for (int cse = 0; cse < 20; ++cse) {
            std::vector<double> fine(8);
            for (auto& v : fine) v = rng.next_gaussian();
            const double rhs = time_form(fine);
            for (std::size_t coarse : {2ul, 4ul}) {
                const std::size_t ratio = fine.size() / coarse;
                std::vector<double> avg(coarse, 0.0);
                for (std::size_t i = 0; i < fine.size(); ++i)
                    avg[i / ratio] += fine[i] / static_cast<double>(ratio);
                const double lhs = time_form(avg);
                ratios.push_back(lhs / rhs);
                c_cal = std::max(c_cal, lhs / rhs);
            }
        }
        CHECK(c_cal < 3.0);
        for (double r : ratios) CHECK(r <= c_cal);
    }
}

TEST_CASE("cell time weights match direct quadrature") {
    const double cell = 1.0 / 8.0;
    for (std::int64_t lag : {1, 2, 5}) {
        const QuadResult q = integrate_adaptive(
            [&](double s) {
                const double lo = static_cast<double>(lag) * cell;
                return integrate_adaptive(
                           [&](double t) {
                               return std::pow(std::abs(s - t), 2.0 * kH - 2.0);
                           },
                           lo, lo + cell, 1e-13, 1e-10, 100'000)
                    .value;
            },
            0.0, cell, 1e-13, 1e-9, 200'000);
        CAPTURE(lag);
        CHECK(cell_time_weight(kH, lag, cell) == doctest::Approx(q.value).epsilon(1e-6));
    }
    // same-cell weight via the gap substitution 2 int_0^c (c - u) u^{2H-2} du
    const QuadResult diag = integrate_adaptive(
        [&](double u) { return 2.0 * (cell - u) * std::pow(u, 2.0 * kH - 2.0); }, 0.0,
        cell, 1e-13, 1e-9, 400'000);
    CHECK(cell_time_weight(kH, 0, cell) == doctest::Approx(diag.value).epsilon(1e-6));
    CHECK(cell_time_weight(1.0, 3, 0.25) == doctest::Approx(0.0625));
}

TEST_CASE("exact grid form matches quadrature on a piecewise-x kernel") {
    // single time cell, four spatial cells: smooth in t, jumps in x
    CounterRng rng(9090);
    BlockGrid g;
    g.order = 1;
    g.n = 1;
    g.rho = 2.0;
    g.spatial_support = 2.0;
    g.rows.assign(1, {});
    for (std::int64_t k = -2; k < 2; ++k) g.rows[0].emplace_back(k, rng.next_gaussian());
    const double exact = grid_b_form(g, g, kH);
    const KernelFn as_kernel = grid_kernel(g).abs();
    const InnerResult quad = h_inner(as_kernel, as_kernel, kH, 1e-6);
    CHECK(quad.value == doctest::Approx(exact).epsilon(1e-4));
}
