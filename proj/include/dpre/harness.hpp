#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "dpre/disorder.hpp"
#include "dpre/kernel_space.hpp"
#include "dpre/parallel.hpp"
#include "dpre/polymer.hpp"
#include "dpre/report.hpp"
#include "dpre/rng.hpp"
#include "dpre/she_oracle.hpp"
#include "dpre/stable_walk.hpp"
#include "dpre/summation.hpp"

namespace dpre {

enum class RunMode { stratonovich, skorohod };

struct SiltConfig {
    int n_steps = 512;
    double epsilon = 0.02;
    std::int64_t paths = 4000;
};

struct ExperimentConfig {
    RunMode mode = RunMode::stratonovich;
    double hurst = 0.85;
    double rho = 2.0;
    double beta = 0.5;
    double x0 = 0.0;
    std::vector<std::int64_t> n_grid = {256, 1024, 4096};
    std::int64_t fields_per_n = 192;
    std::int64_t paths_per_field = 48;
    std::uint64_t seed = 20240801;
    int workers = 1;
    std::string output_dir = ".";
    double zero_mass = 0.5; // Pareto atom at zero for rho < 2
    SiltConfig silt;
    std::size_t oracle_mc_nodes = 1'000'000;
    double z_threshold = 3.0;
    double var_rel_final = 0.05;
    bool dump_fields = false;

    double theta() const { return hurst - 1.0 / (2.0 * rho); }

    void validate() const {
        if (!(hurst > 0.5 && hurst <= 1.0))
            throw std::invalid_argument("config: H must lie in (1/2, 1]");
        if (!(rho > 1.0 && rho <= 2.0))
            throw std::invalid_argument("config: rho must lie in (1, 2]");
        if (mode == RunMode::stratonovich && !(theta() > 0.5))
            throw std::invalid_argument(
                "config: stratonovich mode requires theta = H - 1/(2 rho) > 1/2 "
                "(strict inequality); got theta = " +
                std::to_string(theta()));
        if (mode == RunMode::skorohod && !(theta() > 0.0))
            throw std::invalid_argument(
                "config: skorohod mode requires theta = H - 1/(2 rho) > 0 (strict); "
                "got theta = " +
                std::to_string(theta()));
        if (n_grid.empty()) throw std::invalid_argument("config: N_grid must be nonempty");
        for (std::size_t i = 1; i < n_grid.size(); ++i)
            if (n_grid[i] <= n_grid[i - 1])
                throw std::invalid_argument("config: N_grid must be strictly increasing");
        if (fields_per_n < 4 || paths_per_field < 2)
            throw std::invalid_argument("config: fields_per_N >= 4 and paths_per_field >= 2");
        if (!(beta >= 0.0)) throw std::invalid_argument("config: beta must be >= 0");
        if (workers < 1) throw std::invalid_argument("config: workers must be >= 1");
    }

    static ExperimentConfig from_json(const nlohmann::json& j) {
        ExperimentConfig c;
        const std::string mode_s = j.at("mode").get<std::string>();
        if (mode_s == "stratonovich")
            c.mode = RunMode::stratonovich;
        else if (mode_s == "skorohod")
            c.mode = RunMode::skorohod;
        else
            throw std::invalid_argument("config: mode must be stratonovich or skorohod");
        c.hurst = j.at("H").get<double>();
        c.rho = j.at("rho").get<double>();
        c.beta = j.at("beta").get<double>();
        if (j.contains("x0")) c.x0 = j["x0"].get<double>();
        if (j.contains("N_grid")) c.n_grid = j["N_grid"].get<std::vector<std::int64_t>>();
        if (j.contains("fields_per_N")) c.fields_per_n = j["fields_per_N"].get<std::int64_t>();
        if (j.contains("paths_per_field"))
            c.paths_per_field = j["paths_per_field"].get<std::int64_t>();
        if (j.contains("seed")) c.seed = j["seed"].get<std::uint64_t>();
        if (j.contains("workers")) c.workers = j["workers"].get<int>();
        if (j.contains("output_dir")) c.output_dir = j["output_dir"].get<std::string>();
        if (j.contains("zero_mass")) c.zero_mass = j["zero_mass"].get<double>();
        if (j.contains("silt")) {
            const auto& s = j["silt"];
            if (s.contains("n_steps")) c.silt.n_steps = s["n_steps"].get<int>();
            if (s.contains("epsilon")) c.silt.epsilon = s["epsilon"].get<double>();
            if (s.contains("paths")) c.silt.paths = s["paths"].get<std::int64_t>();
        }
        if (j.contains("oracle_mc_nodes"))
            c.oracle_mc_nodes = j["oracle_mc_nodes"].get<std::size_t>();
        if (j.contains("tolerances")) {
            const auto& t = j["tolerances"];
            if (t.contains("z_threshold")) c.z_threshold = t["z_threshold"].get<double>();
            if (t.contains("var_rel_final")) c.var_rel_final = t["var_rel_final"].get<double>();
        }
        if (j.contains("dump_fields")) c.dump_fields = j["dump_fields"].get<bool>();
        c.validate();
        return c;
    }

    // deterministic part of the config (no workers / output_dir)
    nlohmann::json echo_json() const {
        nlohmann::json j;
        j["mode"] = mode == RunMode::stratonovich ? "stratonovich" : "skorohod";
        j["H"] = hurst;
        j["rho"] = rho;
        j["beta"] = beta;
        j["x0"] = x0;
        j["N_grid"] = n_grid;
        j["fields_per_N"] = fields_per_n;
        j["paths_per_field"] = paths_per_field;
        j["seed"] = seed;
        j["zero_mass"] = zero_mass;
        j["silt"] = {{"n_steps", silt.n_steps}, {"epsilon", silt.epsilon}, {"paths", silt.paths}};
        j["oracle_mc_nodes"] = oracle_mc_nodes;
        j["tolerances"] = {{"z_threshold", z_threshold}, {"var_rel_final", var_rel_final}};
        return j;
    }
};

// Two-sample Kolmogorov-Smirnov statistic.
inline double ks_statistic(std::vector<double> a, std::vector<double> b) {
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    double d = 0.0;
    std::size_t i = 0, j = 0;
    while (i < a.size() && j < b.size()) {
        const double v = std::min(a[i], b[j]);
        while (i < a.size() && a[i] == v) ++i;
        while (j < b.size() && b[j] == v) ++j;
        const double fa = static_cast<double>(i) / static_cast<double>(a.size());
        const double fb = static_cast<double>(j) / static_cast<double>(b.size());
        d = std::max(d, std::abs(fa - fb));
    }
    return d;
}

inline double ks_critical(double alpha, std::size_t n, std::size_t m) {
    const double c = std::sqrt(-0.5 * std::log(alpha / 2.0));
    return c * std::sqrt(static_cast<double>(n + m) /
                         (static_cast<double>(n) * static_cast<double>(m)));
}

namespace harness_detail {

inline constexpr std::uint64_t kTagFields = 0xF1E1D;
inline constexpr std::uint64_t kTagOracleC = 0x0C0C;
inline constexpr std::uint64_t kTagOracleD = 0x0D0D;
inline constexpr std::uint64_t kTagSilt = 0x517;
inline constexpr std::uint64_t kTagNorm = 0x40F;

struct FieldSamples {
    std::vector<double> z_tilde; // per-field wick-corrected partition means
};

inline FieldSamples sample_fields(const ExperimentConfig& cfg, std::int64_t n,
                                  std::size_t n_index, const IncrementLaw& law,
                                  const TemporalCovariance& cov) {
    FieldSamples out;
    out.z_tilde.assign(static_cast<std::size_t>(cfg.fields_per_n), 0.0);
    PolymerParams params{n, cfg.beta, cfg.hurst, cfg.rho, cfg.x0};
    const std::uint64_t base =
        derive_stream(derive_stream(cfg.seed, kTagFields), static_cast<std::uint64_t>(n_index));
    parallel_for(static_cast<std::size_t>(cfg.fields_per_n), cfg.workers, [&](std::size_t f) {
        const std::uint64_t fseed = derive_stream(base, f);
        DisorderField field(n, cov, derive_stream(fseed, 0xD15Cull));
        const PartitionEstimate est =
            estimate_partition(params, field, law, cfg.paths_per_field,
                               PartitionMode::wick_corrected, derive_stream(fseed, 0xA7Bull),
                               /*workers=*/1);
        out.z_tilde[f] = est.value;
    });
    return out;
}

} // namespace harness_detail

// Runs the convergence battery over the N grid:
//  (a) var_s1:        exact Var(S_1^{(N)}) vs beta^2 ||g_1||^2 (quadrature)
//  (b) mean_ztilde:   grand mean of wick-corrected partition vs 1
//  (c) second_moment: E[Z~^2] path oracle vs the chaos series + tail bound
//  (d) mean_z:        E[Z] path oracle vs Feynman-Kac estimate (stratonovich)
//  (e) ks:            distributional stabilization of per-field Z~ samples
//                     (split-half at the first N, consecutive-N after)
inline RunReport run_convergence(const ExperimentConfig& cfg) {
    cfg.validate();
    const auto t_start = std::chrono::steady_clock::now();
    RunReport report;
    report.config_echo = cfg.echo_json();
    report.seed = cfg.seed;
    report.workers = cfg.workers;

    const IncrementLaw law = build_increment_law(cfg.rho, cfg.zero_mass);
    const TemporalCovariance cov = TemporalCovariance::fgn(cfg.hurst);
    const double c_rho = calibrate_c_rho(law);
    const StableDensity density(cfg.rho, c_rho);
    ContinuumParams cp;
    cp.hurst = cfg.hurst;
    cp.rho = cfg.rho;
    cp.c_rho = c_rho;
    cp.beta = cfg.beta;
    cp.x0 = cfg.x0;

    const NormEstimate norm1 = skorohod_norm(1, cp, density);
    const MomentSeries series =
        skorohod_second_moment(cp, density, 2, cfg.oracle_mc_nodes,
                               derive_stream(cfg.seed, harness_detail::kTagNorm));

    std::optional<SiltEstimate> silt;
    if (cfg.mode == RunMode::stratonovich && cfg.beta > 0.0) {
        const IncrementLaw* silt_law = cfg.rho == 2.0 ? nullptr : &law;
        silt = silt_exponential_moment(cp, silt_law, cfg.silt.n_steps, cfg.silt.epsilon,
                                       cfg.silt.paths,
                                       derive_stream(cfg.seed, harness_detail::kTagSilt),
                                       cfg.workers);
    }

    std::vector<double> prev_samples;
    const std::int64_t oracle_paths = cfg.fields_per_n * cfg.paths_per_field;
    for (std::size_t idx = 0; idx < cfg.n_grid.size(); ++idx) {
        const std::int64_t n = cfg.n_grid[idx];
        PolymerParams params{n, cfg.beta, cfg.hurst, cfg.rho, cfg.x0};

        // (a) exact first-chaos variance against the continuum norm
        {
            const VarianceResult var = exact_variance_s1(params, law, cov);
            const double oracle = cfg.beta * cfg.beta * norm1.value;
            const double rel = oracle != 0.0 ? std::abs(var.value - oracle) / oracle : 0.0;
            report.checks.push_back({"var_s1", n, var.value, var.error_bound, oracle,
                                     norm1.stderr_, rel, rel <= cfg.var_rel_final});
        }

        // (b) grand mean of the wick-corrected partition function
        harness_detail::FieldSamples samples =
            harness_detail::sample_fields(cfg, n, idx, law, cov);
        {
            const MeanStderr g = mean_stderr(samples.z_tilde);
            const double z = g.stderr_ > 0.0 ? (g.mean - 1.0) / g.stderr_ : 0.0;
            report.checks.push_back({"mean_ztilde", n, g.mean, g.stderr_, 1.0, 0.0, z,
                                     std::abs(z) <= cfg.z_threshold});
        }

        // (c) second moment of Z~ against the chaos series
        {
            const MeanStderr est = env_moment_oracle(
                params, law, cov, oracle_paths, EnvMoment::second_moment_z_tilde,
                derive_stream(derive_stream(cfg.seed, harness_detail::kTagOracleC),
                              static_cast<std::uint64_t>(idx)),
                cfg.workers);
            const double oracle = series.value();
            const double combined =
                std::sqrt(est.stderr_ * est.stderr_ + series.stderr_() * series.stderr_());
            const double z = combined > 0.0 ? (est.mean - oracle) / combined : 0.0;
            const bool pass = std::abs(est.mean - oracle) <=
                              cfg.z_threshold * combined + series.remainder_bound;
            report.checks.push_back(
                {"second_moment", n, est.mean, est.stderr_, oracle, series.stderr_(), z, pass});
        }

        // (d) Stratonovich first moment against the Feynman-Kac oracle. The
        // oracle's band is 3 x MC stderr plus its documented regulator
        // systematic (its value at finite (n_steps, epsilon) sits below the
        // common limit by an amount the halving drifts estimate).
        if (silt) {
            const MeanStderr est = env_moment_oracle(
                params, law, cov, oracle_paths, EnvMoment::mean_z,
                derive_stream(derive_stream(cfg.seed, harness_detail::kTagOracleD),
                              static_cast<std::uint64_t>(idx)),
                cfg.workers);
            const double combined = std::sqrt(est.stderr_ * est.stderr_ +
                                              silt->stderr_ * silt->stderr_);
            const double gap = est.mean - silt->value;
            const double z = combined > 0.0 ? gap / combined : 0.0;
            // the epsilon-halving stability flag measures the same regulator
            // drift the systematic band already absorbs, so it is reported
            // (oracle subcommand) rather than double-counted here
            const bool pass =
                std::abs(gap) <= cfg.z_threshold * combined + silt->systematic;
            report.checks.push_back(
                {"mean_z", n, est.mean, est.stderr_, silt->value, silt->stderr_, z, pass});
        }

        // (e) KS stabilization
        {
            double d, crit;
            if (idx == 0) {
                // split-half self test guards against stream collisions
                const std::size_t half = samples.z_tilde.size() / 2;
                std::vector<double> lo(samples.z_tilde.begin(),
                                       samples.z_tilde.begin() + static_cast<std::ptrdiff_t>(half));
                std::vector<double> hi(samples.z_tilde.begin() + static_cast<std::ptrdiff_t>(half),
                                       samples.z_tilde.end());
                d = ks_statistic(lo, hi);
                crit = ks_critical(0.01, lo.size(), hi.size());
            } else {
                d = ks_statistic(prev_samples, samples.z_tilde);
                crit = ks_critical(0.01, prev_samples.size(), samples.z_tilde.size());
            }
            report.checks.push_back({"ks", n, d, 0.0, crit, 0.0, d / crit, d <= crit});
        }

        if (cfg.dump_fields) {
            DisorderField field(
                n, cov,
                derive_stream(derive_stream(derive_stream(cfg.seed, harness_detail::kTagFields),
                                            static_cast<std::uint64_t>(idx)),
                              0xD15Cull));
            const auto half_width =
                static_cast<std::int64_t>(std::ceil(3.0 * params.space_scale()));
            std::vector<unsigned char> blob;
            write_field_dump(field, half_width, blob);
            write_file_atomic(std::filesystem::path(cfg.output_dir) /
                                  ("field_N" + std::to_string(n) + ".dfld"),
                              std::string(blob.begin(), blob.end()));
        }

        prev_samples = samples.z_tilde;
    }

    // trend analysis: per-check error non-increasing over the last two doublings
    for (const std::string check : {"var_s1", "mean_ztilde", "second_moment", "mean_z", "ks"}) {
        std::vector<double> errs;
        for (const auto& c : report.checks)
            if (c.check == check) errs.push_back(std::abs(c.z));
        if (errs.empty()) continue;
        bool ok = true;
        const std::size_t k = errs.size();
        for (std::size_t i = k >= 3 ? k - 2 : 1; i < k; ++i)
            if (errs[i] > errs[i - 1] + 1e-12) ok = false;
        report.trends.push_back({check, ok});
    }

    bool all = true;
    for (const auto& c : report.checks) all = all && c.pass;
    // the deterministic variance check must also improve with N
    for (const auto& t : report.trends)
        if (t.check == "var_s1") all = all && t.non_increasing;
    report.all_pass = all;
    report.wall_time_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
    return report;
}

} // namespace dpre
