#include <cstdio>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "dpre/harness.hpp"
#include "dpre/report.hpp"
#include "dpre/selftest.hpp"

namespace {

constexpr int kExitPass = 0;
constexpr int kExitCheckFailure = 1;
constexpr int kExitConfigError = 2;

dpre::ExperimentConfig load_config(const std::string& path,
                                   const std::optional<std::uint64_t>& seed,
                                   const std::optional<int>& workers,
                                   const std::optional<std::string>& out,
                                   bool dump_fields) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot open config file: " + path);
    nlohmann::json j;
    in >> j;
    dpre::ExperimentConfig cfg = dpre::ExperimentConfig::from_json(j);
    if (seed) cfg.seed = *seed;
    if (workers) cfg.workers = *workers;
    if (out) cfg.output_dir = *out;
    // environment overrides: workers and output directory only
    if (const char* env = std::getenv("DPRE_WORKERS")) cfg.workers = std::atoi(env);
    if (const char* env = std::getenv("DPRE_OUTPUT_DIR")) cfg.output_dir = env;
    if (dump_fields) cfg.dump_fields = true;
    cfg.validate();
    return cfg;
}

dpre::ContinuumParams continuum_from(const dpre::ExperimentConfig& cfg,
                                     const dpre::IncrementLaw& law) {
    dpre::ContinuumParams cp;
    cp.hurst = cfg.hurst;
    cp.rho = cfg.rho;
    cp.c_rho = dpre::calibrate_c_rho(law);
    cp.beta = cfg.beta;
    cp.x0 = cfg.x0;
    return cp;
}

int cmd_converge(const dpre::ExperimentConfig& cfg) {
    const dpre::RunReport report = dpre::run_convergence(cfg);
    dpre::emit_report(report, cfg.output_dir);
    for (const auto& c : report.checks)
        std::printf("[%s] N=%-6lld %-14s estimate=%.8g oracle=%.8g z=%.3g\n",
                    c.pass ? "PASS" : "FAIL", static_cast<long long>(c.n), c.check.c_str(),
                    c.estimate, c.oracle, c.z);
    for (const auto& t : report.trends)
        std::printf("[%s] trend          %-14s non-increasing error\n",
                    t.non_increasing ? "PASS" : "WARN", t.check.c_str());
    std::printf("report: %s/report.json (wall %.1fs)\n", cfg.output_dir.c_str(),
                report.wall_time_s);
    return report.all_pass ? kExitPass : kExitCheckFailure;
}

int cmd_selftest(const std::string& fault) {
    const dpre::SelftestReport rep = dpre::selftest(fault);
    int failed = 0;
    for (const auto& c : rep.checks) {
        std::printf("[%s] %s%s%s\n", c.pass ? "PASS" : "FAIL", c.name.c_str(),
                    c.detail.empty() ? "" : " : ", c.detail.c_str());
        failed += c.pass ? 0 : 1;
    }
    std::printf("%zu checks, %d failed\n", rep.checks.size(), failed);
    return rep.all_pass ? kExitPass : kExitCheckFailure;
}

int cmd_moments(const dpre::ExperimentConfig& cfg, int m) {
    const dpre::IncrementLaw law = dpre::build_increment_law(cfg.rho, cfg.zero_mass);
    const dpre::TemporalCovariance cov = dpre::TemporalCovariance::fgn(cfg.hurst);
    const dpre::ContinuumParams cp = continuum_from(cfg, law);
    const dpre::StableDensity density(cfg.rho, cp.c_rho);
    const std::int64_t n = cfg.n_grid.back();
    dpre::PolymerParams params{n, cfg.beta, cfg.hurst, cfg.rho, cfg.x0};
    bool pass = false;
    if (m == 1) {
        const dpre::VarianceResult var = dpre::exact_variance_s1(params, law, cov);
        const dpre::NormEstimate n1 = dpre::skorohod_norm(1, cp, density);
        const double oracle = cfg.beta * cfg.beta * n1.value;
        const double rel = std::abs(var.value - oracle) / oracle;
        pass = rel <= cfg.var_rel_final;
        std::printf("m=1  N=%lld  Var(S_1)=%.10g  beta^2*norm1=%.10g  rel_err=%.4g  [%s]\n",
                    static_cast<long long>(n), var.value, oracle, rel,
                    pass ? "PASS" : "FAIL");
    } else {
        const dpre::MomentSeries series = dpre::skorohod_second_moment(
            cp, density, 2, cfg.oracle_mc_nodes, dpre::derive_stream(cfg.seed, 0x40F));
        const dpre::MeanStderr est = dpre::env_moment_oracle(
            params, law, cov, cfg.fields_per_n * cfg.paths_per_field,
            dpre::EnvMoment::second_moment_z_tilde, dpre::derive_stream(cfg.seed, 0x0C0C),
            cfg.workers);
        const double combined = std::sqrt(est.stderr_ * est.stderr_ +
                                          series.stderr_() * series.stderr_());
        pass = std::abs(est.mean - series.value()) <=
               cfg.z_threshold * combined + series.remainder_bound;
        std::printf(
            "m=2  N=%lld  E[Z~^2]=%.8g (+-%.3g)  series=%.8g (+-%.3g, tail<=%.3g)  [%s]\n",
            static_cast<long long>(n), est.mean, est.stderr_, series.value(),
            series.stderr_(), series.remainder_bound, pass ? "PASS" : "FAIL");
    }
    return pass ? kExitPass : kExitCheckFailure;
}

int cmd_oracle(const dpre::ExperimentConfig& cfg) {
    const dpre::IncrementLaw law = dpre::build_increment_law(cfg.rho, cfg.zero_mass);
    const dpre::ContinuumParams cp = continuum_from(cfg, law);
    const dpre::StableDensity density(cfg.rho, cp.c_rho);
    std::printf("c_rho          = %.10g\n", cp.c_rho);
    std::printf("g(1,0)         = %.10g\n", density.peak());
    const dpre::NormEstimate n1 = dpre::skorohod_norm(1, cp, density);
    std::printf("||g_1||^2      = %.10g\n", n1.value);
    const dpre::MomentSeries series = dpre::skorohod_second_moment(
        cp, density, 2, cfg.oracle_mc_nodes, dpre::derive_stream(cfg.seed, 0x40F));
    std::printf("||g_2||^2      = %.10g (+- %.3g)\n",
                series.terms[2] / (2.0 * std::pow(cfg.beta, 4)), series.stderrs[2]);
    std::printf("E[u~^2] series = %.10g (+- %.3g, tail <= %.3g)\n", series.value(),
                series.stderr_(), series.remainder_bound);
    if (cfg.mode == dpre::RunMode::stratonovich && cfg.beta > 0.0) {
        const dpre::IncrementLaw* silt_law = cfg.rho == 2.0 ? nullptr : &law;
        const dpre::SiltEstimate silt = dpre::silt_exponential_moment(
            cp, silt_law, cfg.silt.n_steps, cfg.silt.epsilon, cfg.silt.paths,
            dpre::derive_stream(cfg.seed, 0x517), cfg.workers);
        std::printf("E[u(1,x0)] FK  = %.8g (+- %.3g) stability=%s (eps/2 -> %.8g)\n",
                    silt.value, silt.stderr_, silt.stable ? "ok" : "UNSTABLE",
                    silt.halved_value);
    }
    return kExitPass;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"long-range directed polymer / fractional SHE moment workbench"};
    app.require_subcommand(1);

    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<int> workers;
    std::optional<std::string> out_dir;
    bool dump_fields = false;
    int m_order = 1;
    std::string fault;

    auto add_common = [&](CLI::App* sub, bool needs_config) {
        if (needs_config)
            sub->add_option("config", config_path, "experiment config (JSON)")->required();
        sub->add_option("--seed", seed, "override RNG seed");
        sub->add_option("--workers", workers, "override worker count");
        sub->add_option("--out", out_dir, "override output directory");
    };

    CLI::App* converge = app.add_subcommand("converge", "run the convergence battery");
    add_common(converge, true);
    converge->add_flag("--dump-fields", dump_fields, "dump realized disorder windows");

    CLI::App* selftest = app.add_subcommand("selftest", "run module invariants at reduced scale");
    selftest->add_option("--inject-fault", fault, "corrupt a named input (expects failure)");

    CLI::App* moments = app.add_subcommand("moments", "discrete moment vs continuum oracle");
    add_common(moments, true);
    moments->add_option("--m", m_order, "chaos order (1 or 2)")
        ->check(CLI::Range(1, 2));

    CLI::App* oracle = app.add_subcommand("oracle", "continuum-side oracle values only");
    add_common(oracle, true);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitPass : kExitConfigError;
    }

    try {
        if (selftest->parsed()) return cmd_selftest(fault);
        const dpre::ExperimentConfig cfg =
            load_config(config_path, seed, workers, out_dir, dump_fields);
        if (converge->parsed()) return cmd_converge(cfg);
        if (moments->parsed()) return cmd_moments(cfg, m_order);
        if (oracle->parsed()) return cmd_oracle(cfg);
    } catch (const std::invalid_argument& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return kExitConfigError;
    } catch (const nlohmann::json::exception& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return kExitConfigError;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitCheckFailure;
    }
    return kExitConfigError;
}
