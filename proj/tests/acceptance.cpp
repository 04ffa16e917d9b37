// Acceptance battery: each criterion prints one PASS/FAIL line; the binary
// exits nonzero if any criterion fails. Tolerances are pinned here.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "dpre/harness.hpp"
#include "dpre/polymer.hpp"
#include "dpre/selftest.hpp"
#include "dpre/she_oracle.hpp"
#include "test_oracles.hpp"

using namespace dpre;

namespace {

int g_failures = 0;

double now_s() {
    return std::chrono::duration<double>(
               std::chrono::steady_clock::now().time_since_epoch())
        .count();
}

void verdict(int id, const char* name, bool pass, const std::string& detail) {
    std::printf("[%s] criterion %2d %-28s %s\n", pass ? "PASS" : "FAIL", id, name,
                detail.c_str());
    std::fflush(stdout);
    if (!pass) ++g_failures;
}

struct Fixture {
    IncrementLaw law2 = build_increment_law(2.0, 0.0);
    IncrementLaw law15 = build_increment_law(1.5, 0.5);
    TemporalCovariance cov = TemporalCovariance::fgn(0.85);
    double c2 = calibrate_c_rho(law2);
    StableDensity den2{2.0, c2};
    ContinuumParams cp;

    Fixture() {
        cp.hurst = 0.85;
        cp.rho = 2.0;
        cp.c_rho = c2;
        cp.beta = 0.5;
        cp.x0 = 0.0;
    }
};

char buf[512];

// 1. Exact Var(S_1^{(N)}) against beta^2 ||g_1||^2: relative error
//    non-increasing over N in {256, 1024, 4096} and < 5% at the top.
void criterion1(const Fixture& fx) {
    const double t0 = now_s();
    const NormEstimate n1 = skorohod_norm(1, fx.cp, fx.den2);
    const double oracle = 0.25 * n1.value;
    std::vector<double> rels;
    for (std::int64_t n : {256, 1024, 4096}) {
        const PolymerParams p{n, 0.5, 0.85, 2.0, 0.0};
        const VarianceResult v = exact_variance_s1(p, fx.law2, fx.cov);
        rels.push_back(std::abs(v.value - oracle) / oracle);
    }
    const double elapsed = now_s() - t0;
    const bool monotone = rels[1] <= rels[0] && rels[2] <= rels[1];
    const bool tight = rels[2] < 0.05;
    const bool in_time = elapsed < 300.0;
    std::snprintf(buf, sizeof(buf), "rel err %.4f -> %.4f -> %.4f (%.0fs)", rels[0],
                  rels[1], rels[2], elapsed);
    verdict(1, "variance_convergence", monotone && tight && in_time, buf);
}

// 2. Grand mean of the wick-corrected partition over 2000 fields x 64 paths
//    at N = 512 within 3 combined stderr of 1.
void criterion2(const Fixture& fx) {
    const double t0 = now_s();
    const std::int64_t n = 512, fields = 2000, paths = 64;
    const PolymerParams p{n, 0.5, 0.85, 2.0, 0.0};
    std::vector<double> means(static_cast<std::size_t>(fields));
    parallel_for(static_cast<std::size_t>(fields), 1, [&](std::size_t f) {
        DisorderField field(n, fx.cov, derive_stream(0xACC2, f));
        means[f] = estimate_partition(p, field, fx.law2, paths,
                                      PartitionMode::wick_corrected,
                                      derive_stream(0xACC3, f))
                       .value;
    });
    const MeanStderr g = mean_stderr(means);
    const double z = (g.mean - 1.0) / g.stderr_;
    const double elapsed = now_s() - t0;
    std::snprintf(buf, sizeof(buf), "grand mean %.6f +- %.6f, z = %+.2f (%.0fs)", g.mean,
                  g.stderr_, z, elapsed);
    verdict(2, "wick_corrected_mean", std::abs(z) <= 3.0 && elapsed < 600.0, buf);
}

// 3. E[Z~^2] at N in {512, 2048} within 3 combined stderr + the documented
//    chaos-tail remainder of the m_max = 2 series; band excess non-increasing.
void criterion3(const Fixture& fx) {
    const MomentSeries series = skorohod_second_moment(fx.cp, fx.den2, 2, 1'000'000, 0xACC4);
    bool pass = true;
    std::vector<double> excess;
    std::string detail;
    for (std::int64_t n : {512, 2048}) {
        const PolymerParams p{n, 0.5, 0.85, 2.0, 0.0};
        const MeanStderr est = env_moment_oracle(p, fx.law2, fx.cov, 24'000,
                                                 EnvMoment::second_moment_z_tilde,
                                                 derive_stream(0xACC5, static_cast<std::uint64_t>(n)));
        const double comb = std::sqrt(est.stderr_ * est.stderr_ +
                                      series.stderr_() * series.stderr_());
        const double disc = std::abs(est.mean - series.value());
        pass = pass && disc <= 3.0 * comb + series.remainder_bound;
        excess.push_back(std::max(0.0, disc - series.remainder_bound));
        std::snprintf(buf, sizeof(buf), "N=%lld: %.5f vs %.5f+-%.5f ",
                      static_cast<long long>(n), est.mean, series.value(), comb);
        detail += buf;
    }
    pass = pass && excess[1] <= excess[0] + 1e-12;
    std::snprintf(buf, sizeof(buf), "(tail bound %.3g)", series.remainder_bound);
    detail += buf;
    verdict(3, "skorohod_second_moment", pass, detail);
}

// 4. Stratonovich first moment: the discrete oracle E[Z^{(N)}] at N = 4096
//    against the Feynman-Kac estimate at the matched resolution
//    n_steps = 4096, epsilon = 1/4096, within 3 combined (MC) stderr and with
//    the epsilon-halving stability diagnostic passing.
void criterion4(const Fixture& fx) {
    const double t0 = now_s();
    const PolymerParams p{4096, 0.5, 0.85, 2.0, 0.0};
    const MeanStderr mz =
        env_moment_oracle(p, fx.law2, fx.cov, 20'000, EnvMoment::mean_z, 0xACC6);
    const SiltEstimate fk =
        silt_exponential_moment(fx.cp, nullptr, 4096, 1.0 / 4096.0, 800, 0xACC7);
    const double comb = std::sqrt(mz.stderr_ * mz.stderr_ + fk.stderr_ * fk.stderr_);
    const double gap = mz.mean - fk.value;
    const bool pass = std::abs(gap) <= 3.0 * comb && fk.stable;
    std::snprintf(buf, sizeof(buf),
                  "E[Z]=%.5f+-%.5f vs FK=%.5f+-%.5f gap=%+.4f (3sig=%.4f, "
                  "FK regulator systematic ~%.3f, stable=%d) (%.0fs)",
                  mz.mean, mz.stderr_, fk.value, fk.stderr_, gap, 3.0 * comb,
                  fk.systematic, fk.stable ? 1 : 0, now_s() - t0);
    verdict(4, "stratonovich_first_moment", pass, buf);
    if (!pass) {
        // shared-limit extrapolation (rate exponent 2 theta - 1 = 0.2): both
        // estimators drift toward the same continuum value from below
        const MeanStderr mz1k =
            env_moment_oracle(PolymerParams{1024, 0.5, 0.85, 2.0, 0.0}, fx.law2, fx.cov,
                              20'000, EnvMoment::mean_z, 0xACC8);
        const double q4 = std::pow(4.0, -0.2);
        const double lim_z = (mz.mean - q4 * mz1k.mean) / (1.0 - q4);
        const SiltEstimate fk2 = silt_exponential_moment(fx.cp, nullptr, 2048,
                                                         1.0 / 2048.0, 800, 0xACC9);
        const double q2 = std::pow(2.0, -0.2);
        const double lim_fk = (fk.value - q2 * fk2.value) / (1.0 - q2);
        std::printf("       info: shared-limit extrapolations  discrete -> %.4f,  "
                    "feynman-kac -> %.4f\n",
                    lim_z, lim_fk);
    }
}

// 5. Exact enumeration at N = 6 against the path Monte Carlo, both modes,
//    10 fixed fields, M = 1e5 paths, 3 stderr each.
void criterion5(const Fixture& fx) {
    const double t0 = now_s();
    const PolymerParams p{6, 0.5, 0.85, 2.0, 0.0};
    bool pass = true;
    double worst = 0.0;
    for (int f = 0; f < 10; ++f) {
        DisorderField field(6, fx.cov, derive_stream(0xACCA, static_cast<std::uint64_t>(f)));
        for (PartitionMode mode : {PartitionMode::plain, PartitionMode::wick_corrected}) {
            const double exact = enumerate_exact(p, field, fx.law2, mode);
            const PartitionEstimate est = estimate_partition(
                p, field, fx.law2, 100'000, mode,
                derive_stream(0xACCB, static_cast<std::uint64_t>(2 * f) +
                                          (mode == PartitionMode::plain ? 0 : 1)));
            const double z = std::abs(est.value - exact) / est.stderr_;
            worst = std::max(worst, z);
            pass = pass && z <= 3.0;
        }
    }
    const double elapsed = now_s() - t0;
    std::snprintf(buf, sizeof(buf), "worst |z| = %.2f over 10 fields x 2 modes (%.0fs)",
                  worst, elapsed);
    verdict(5, "exact_enumeration_oracle", pass && elapsed < 120.0, buf);
}

// 6. Wick algebra exactness.
void criterion6(const Fixture&) {
    bool pass = true;
    CounterRng rng(0xACCC);
    double worst = 0.0;
    for (int cse = 0; cse < 200; ++cse) {
        const int dim = 2 + static_cast<int>(rng.next_u64() % 3);
        GaussianFamily fam;
        fam.dim = dim;
        std::vector<double> a(static_cast<std::size_t>(dim * dim));
        for (auto& v : a) v = rng.next_gaussian();
        fam.q.assign(static_cast<std::size_t>(dim * dim), 0.0);
        for (int i = 0; i < dim; ++i)
            for (int j = 0; j < dim; ++j)
                for (int k = 0; k < dim; ++k)
                    fam.q[static_cast<std::size_t>(i) * dim + j] +=
                        a[static_cast<std::size_t>(i) * dim + k] *
                        a[static_cast<std::size_t>(j) * dim + k];
        fam.sample.resize(static_cast<std::size_t>(dim));
        for (auto& v : fam.sample) v = rng.next_gaussian();
        IndexMultiset idx;
        const int sz = 1 + static_cast<int>(rng.next_u64() % 6);
        for (int t = 0; t < sz; ++t) idx.push_back(static_cast<int>(rng.next_u64() % dim));
        const double brute = wick_value_expansion(fam, idx);
        const double rec = wick_value_recursive(fam, idx);
        const double rel = std::abs(brute - rec) /
                           std::max(1.0, std::max(std::abs(brute), std::abs(rec)));
        worst = std::max(worst, rel);
        pass = pass && rel <= 1e-10;
    }
    GaussianFamily std1;
    std1.dim = 1;
    std1.q = {1.0};
    pass = pass && std::abs(gaussian_moment(std1, {0, 0, 0, 0}) - 3.0) < 1e-12;
    GaussianFamily two;
    two.dim = 2;
    two.q = {1.0, 0.4, 0.4, 1.0};
    pass = pass && wick_pair_expectation(two, {0, 0}, {0, 1, 1}) == 0.0;
    std1.sample = {1.37};
    for (int m = 1; m <= 8; ++m) {
        const IndexMultiset rep(static_cast<std::size_t>(m), 0);
        if (std::abs(wick_value(std1, rep) - hermite(m, 1.37)) > 1e-10) pass = false;
    }
    std::snprintf(buf, sizeof(buf),
                  "200 dual-route cases, worst rel %.2e; moments + hermite exact", worst);
    verdict(6, "wick_algebra_exactness", pass, buf);
}

// 7. Local limit theorem residuals.
void criterion7(const Fixture& fx) {
    const double t0 = now_s();
    std::vector<double> r2;
    for (std::int64_t n : {256, 1024, 4096})
        r2.push_back(llt_residual(fx.law2, fx.den2, n));
    const StableDensity den15(1.5, calibrate_c_rho(fx.law15));
    std::vector<double> r15;
    for (std::int64_t n : {256, 1024, 4096})
        r15.push_back(llt_residual(fx.law15, den15, n));
    const bool pass = r2[1] < r2[0] && r2[2] < r2[1] && r2[2] < 0.01 &&
                      r15[1] < r15[0] && r15[2] < r15[1];
    std::snprintf(buf, sizeof(buf),
                  "rho=2: %.2e > %.2e > %.2e (< 0.01); rho=1.5: %.3f > %.3f > %.3f (%.0fs)",
                  r2[0], r2[1], r2[2], r15[0], r15[1], r15[2], now_s() - t0);
    verdict(7, "local_limit_theorem", pass, buf);
}

// 8. Closed-form simplex integrals against the iterated quadrature oracle.
void criterion8(const Fixture&) {
    bool pass = true;
    CounterRng rng(0xACCD);
    double worst = 0.0;
    for (int cse = 0; cse < 20; ++cse) {
        const int m = 1 + static_cast<int>(rng.next_u64() % 3);
        std::vector<double> alphas;
        for (int i = 0; i < m; ++i) alphas.push_back(-1.0 + 1.8 * rng.next_double());
        const double t = 0.3 + 1.7 * rng.next_double();
        const double closed = simplex_gamma_integral(alphas, t);
        const double quad = dpre::testing::simplex_quadrature_oracle(alphas, t);
        const double rel = std::abs(closed - quad) / closed;
        worst = std::max(worst, rel);
        pass = pass && rel <= 1e-6;
    }
    const double pi_case = simplex_gamma_integral({0.5, 0.5}, 1.0);
    pass = pass && std::abs(pi_case - 3.141592653589793238462643383279) <= 1e-9;
    std::snprintf(buf, sizeof(buf), "20 random cases worst rel %.2e; pi case err %.2e",
                  worst, std::abs(pi_case - 3.141592653589793238462643383279));
    verdict(8, "simplex_gamma_identity", pass, buf);
}

// 9. Pathwise m = 2 Wick identity: plain - wick chaos equals beta_hat^2 times
//    the mean local time on shared paths, at machine precision, all configs.
void criterion9(const Fixture& fx) {
    struct Cfg {
        std::int64_t n;
        double beta, hurst, rho;
    };
    const std::vector<Cfg> cfgs = {{64, 0.5, 0.85, 2.0},
                                   {128, 0.3, 0.85, 2.0},
                                   {64, 0.5, 0.60, 1.5},
                                   {32, 0.8, 0.95, 2.0}};
    bool pass = true;
    double worst = 0.0;
    for (const auto& c : cfgs) {
        const PolymerParams p{c.n, c.beta, c.hurst, c.rho, 0.25};
        const IncrementLaw& law = c.rho == 2.0 ? fx.law2 : fx.law15;
        const TemporalCovariance cov = TemporalCovariance::fgn(c.hurst);
        DisorderField field(c.n, cov, derive_stream(0xACCE, static_cast<std::uint64_t>(c.n)));
        const ChaosEstimate plain = chaos_term(p, field, law, 2, 400, false, 0xACCF);
        const ChaosEstimate wick = chaos_term(p, field, law, 2, 400, true, 0xACCF);
        const double bh2 = p.beta_hat() * p.beta_hat();
        const double lhs = plain.value - wick.value;
        const double rhs = bh2 * plain.mean_local_time;
        const double scale = std::max({1e-300, std::abs(plain.value), std::abs(wick.value), rhs});
        const double rel = std::abs(lhs - rhs) / scale;
        worst = std::max(worst, rel);
        pass = pass && rel <= 1e-12 && plain.mean_local_time == wick.mean_local_time;
    }
    std::snprintf(buf, sizeof(buf), "worst relative defect %.2e over 4 configs", worst);
    verdict(9, "pathwise_wick_identity", pass, buf);
}

// 10. Bitwise determinism of the convergence battery across worker counts.
void criterion10(const Fixture&) {
    const double t0 = now_s();
    ExperimentConfig cfg;
    cfg.mode = RunMode::stratonovich;
    cfg.hurst = 0.85;
    cfg.rho = 2.0;
    cfg.beta = 0.5;
    cfg.n_grid = {32, 64};
    cfg.fields_per_n = 32;
    cfg.paths_per_field = 16;
    cfg.seed = 0xACD0;
    cfg.silt = {64, 0.05, 200};
    cfg.oracle_mc_nodes = 50'000;
    cfg.workers = 1;
    const RunReport one = run_convergence(cfg);
    cfg.workers = 8;
    const RunReport eight = run_convergence(cfg);
    const bool pass = one.payload_json().dump() == eight.payload_json().dump() &&
                      one.csv() == eight.csv();
    std::snprintf(buf, sizeof(buf), "payload bytes %s, %zu checks (%.0fs)",
                  pass ? "identical" : "DIFFER", one.checks.size(), now_s() - t0);
    verdict(10, "worker_determinism", pass, buf);
}

} // namespace

int main() {
    const double t0 = now_s();
    Fixture fx;
    criterion1(fx);
    criterion2(fx);
    criterion3(fx);
    criterion4(fx);
    criterion5(fx);
    criterion6(fx);
    criterion7(fx);
    criterion8(fx);
    criterion9(fx);
    criterion10(fx);
    std::printf("%d of 10 criteria passed (total %.0fs)\n", 10 - g_failures, now_s() - t0);
    return g_failures == 0 ? 0 : 1;
}
