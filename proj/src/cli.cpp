#include "svperturb/cli.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <vector>

#include <json.hpp>

#include "svperturb/bounds.hpp"
#include "svperturb/montecarlo.hpp"
#include "svperturb/mpsk.hpp"
#include "svperturb/types.hpp"

namespace svp::cli {

namespace {

using nlohmann::json;

json load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("config: cannot open '" + path + "'");
    }
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    if (!j.is_object()) {
        throw ConfigError("config: top level must be a flat object");
    }
    return j;
}

void reject_unknown_keys(const json& j, const std::set<std::string>& allowed) {
    for (const auto& [key, value] : j.items()) {
        if (allowed.find(key) == allowed.end()) {
            throw ConfigError("config: unknown key '" + key + "'");
        }
    }
}

template <typename T>
T require(const json& j, const std::string& key) {
    if (!j.contains(key)) {
        throw ConfigError("config: missing key '" + key + "'");
    }
    try {
        return j.at(key).get<T>();
    } catch (const json::exception&) {
        throw ConfigError("config: key '" + key + "' has the wrong type");
    }
}

template <typename T>
T optional_or(const json& j, const std::string& key, T fallback) {
    if (!j.contains(key)) {
        return fallback;
    }
    try {
        return j.at(key).get<T>();
    } catch (const json::exception&) {
        throw ConfigError("config: key '" + key + "' has the wrong type");
    }
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw ConfigError("output: cannot write '" + path.string() + "'");
    }
    out << text;
}

void write_manifest(const CommonOptions& options, const std::string& command,
                    const json& resolved_config) {
    json manifest;
    manifest["tool"] = "svperturb";
    manifest["version"] = kToolVersion;
    manifest["command"] = command;
    manifest["config"] = resolved_config;
    manifest["format"] = options.format;
    manifest["jobs"] = options.jobs;
    write_text(std::filesystem::path(options.out_dir) / "manifest.json", manifest.dump(2) + "\n");
}

void prepare_out_dir(const CommonOptions& options) {
    if (options.format != "json" && options.format != "csv" && options.format != "both") {
        throw ConfigError("format: must be one of json, csv, both");
    }
    if (options.jobs < 1) {
        throw ConfigError("jobs: must be at least 1");
    }
    std::filesystem::create_directories(options.out_dir);
}

Vector vector_from(const std::vector<double>& values) {
    Vector v(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) {
        v(static_cast<Eigen::Index>(i)) = values[i];
    }
    return v;
}

json feasibility_json(const bounds::FeasibilityReport& f) {
    json j;
    j["eps"] = f.eps;
    j["threshold"] = f.threshold;
    j["ratio"] = f.ratio;
    j["verdict"] = f.feasible ? "FEASIBLE" : "INFEASIBLE";
    return j;
}

bounds::BoundInputs bound_inputs_from(const json& cfg) {
    const double eps = require<double>(cfg, "eps");
    const int n = require<int>(cfg, "n");
    const int k = require<int>(cfg, "k");
    const double gamma = require<double>(cfg, "gamma");
    const double beta = require<double>(cfg, "beta");
    const double u1_max = require<double>(cfg, "u1_max");
    if (cfg.contains("spectrum")) {
        return bounds::BoundInputs::from_spectrum(
            eps, n, k, gamma, beta, vector_from(require<std::vector<double>>(cfg, "spectrum")),
            u1_max);
    }
    return bounds::BoundInputs::from_summary(eps, n, k, gamma, beta,
                                             require<double>(cfg, "sigma_inv_norm"),
                                             require<double>(cfg, "sigma_min"), u1_max);
}

mpsk::MpskScenario mpsk_scenario_from(const json& cfg, bool with_noise) {
    mpsk::MpskScenario sc;
    sc.m_order = optional_or<int>(cfg, "m_order", 4);
    sc.fc_hz = require<double>(cfg, "fc_hz");
    sc.symbol_period_s = require<double>(cfg, "symbol_period_s");
    sc.theta_c = optional_or<double>(cfg, "theta_c", 0.0);
    sc.samples_per_symbol = require<int>(cfg, "samples_per_symbol");
    sc.symbols = require<int>(cfg, "symbols");
    sc.seed = optional_or<std::uint64_t>(cfg, "seed", 0);
    if (with_noise) {
        if (cfg.contains("n0") == cfg.contains("snr_db")) {
            throw ConfigError("config: provide exactly one of 'n0' or 'snr_db'");
        }
        sc.n0 = cfg.contains("n0") ? require<double>(cfg, "n0")
                                   : mpsk::snr_db_to_n0(require<double>(cfg, "snr_db"));
    }
    return sc;
}

json scenario_json(const mpsk::MpskScenario& sc) {
    json j;
    j["m_order"] = sc.m_order;
    j["fc_hz"] = sc.fc_hz;
    j["symbol_period_s"] = sc.symbol_period_s;
    j["theta_c"] = sc.theta_c;
    j["samples_per_symbol"] = sc.samples_per_symbol;
    j["symbols"] = sc.symbols;
    j["n0"] = sc.n0;
    j["seed"] = sc.seed;
    return j;
}

int guarded(const std::string& command, const CommonOptions& options,
            int (*body)(const CommonOptions&)) {
    try {
        return body(options);
    } catch (const ConfigError& e) {
        std::cerr << command << ": " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << command << ": " << e.what() << "\n";
        return kExitConfig;
    }
}

int run_bound_impl(const CommonOptions& options) {
    const json cfg = load_config(options.config_path);
    reject_unknown_keys(cfg, {"eps", "n", "k", "gamma", "beta", "spectrum", "sigma_inv_norm",
                              "sigma_min", "u1_max"});
    const auto inputs = bound_inputs_from(cfg);
    const auto report = bounds::theorem_bound(inputs);

    prepare_out_dir(options);
    write_manifest(options, "bound", cfg);
    write_text(std::filesystem::path(options.out_dir) / "bound_report.json",
               report.to_json() + "\n");

    std::cout << "bound: rhs="
              << (std::isfinite(report.rhs) ? std::to_string(report.rhs) : "invalid")
              << " prob_floor=" << report.prob_floor << (report.valid ? "" : " (violated)")
              << "\n";
    return report.valid ? kExitOk : kExitPrecondition;
}

int run_verify_impl(const CommonOptions& options) {
    const json cfg = load_config(options.config_path);
    reject_unknown_keys(cfg, {"n", "k", "spectrum", "eps", "gamma", "beta", "basis_seed",
                              "noise_seed", "trials", "convention"});

    mc::NoiseScenario sc;
    sc.n = require<int>(cfg, "n");
    sc.k = require<int>(cfg, "k");
    sc.spectrum = vector_from(require<std::vector<double>>(cfg, "spectrum"));
    sc.eps = require<double>(cfg, "eps");
    sc.gamma = require<double>(cfg, "gamma");
    sc.beta = require<double>(cfg, "beta");
    sc.basis_seed = optional_or<std::uint64_t>(cfg, "basis_seed", 0);
    sc.noise_seed = optional_or<std::uint64_t>(cfg, "noise_seed", 0);
    sc.trials = optional_or<int>(cfg, "trials", 100);
    const std::string convention = optional_or<std::string>(cfg, "convention", "unit_over_n");
    if (convention == "unit_over_n") {
        sc.convention = mc::NoiseConvention::kUnitOverN;
    } else if (convention == "problem_statement") {
        sc.convention = mc::NoiseConvention::kProblemStatement;
    } else {
        throw ConfigError("convention: must be 'unit_over_n' or 'problem_statement'");
    }
    if (options.seed.has_value()) {
        sc.noise_seed = *options.seed;
    }
    if (options.trials.has_value()) {
        sc.trials = *options.trials;
    }
    sc.validate();

    const auto workspace = mc::prepare_scenario(sc);
    const auto& bound = workspace.bound;
    const auto records = mc::run_scenario(sc, workspace, options.jobs);
    const auto coverage = mc::coverage_report(records, bound.prob_floor);

    prepare_out_dir(options);
    json resolved = cfg;
    resolved["noise_seed"] = sc.noise_seed;
    resolved["trials"] = sc.trials;
    write_manifest(options, "verify", resolved);

    if (options.format != "json") {
        write_text(std::filesystem::path(options.out_dir) / "trials.csv",
                   mc::trials_csv(records));
    }
    if (options.format != "csv") {
        json summary;
        summary["scenario"] = resolved;
        summary["bound"] = json::parse(bound.to_json());
        summary["coverage"] = {{"coverage", coverage.coverage},
                               {"floor", coverage.floor},
                               {"slack", coverage.slack},
                               {"covered", coverage.covered},
                               {"total", coverage.total},
                               {"verdict", mc::verdict_name(coverage.verdict)}};
        write_text(std::filesystem::path(options.out_dir) / "summary.json",
                   summary.dump(2) + "\n");
    }

    std::cout << "verify: coverage=" << coverage.coverage << " floor=" << coverage.floor
              << " verdict=" << mc::verdict_name(coverage.verdict) << "\n";
    return coverage.verdict == mc::CoverageVerdict::kFail ? kExitCoverage : kExitOk;
}

int run_plan_impl(const CommonOptions& options) {
    const json cfg = load_config(options.config_path);
    reject_unknown_keys(cfg, {"eps", "n", "beta", "u1_max", "alpha"});

    json out;
    std::string line;
    if (cfg.contains("alpha")) {
        const double alpha = require<double>(cfg, "alpha");
        const long min_l = bounds::min_samples_per_symbol(alpha);
        out["mode"] = "mpsk";
        out["alpha"] = alpha;
        out["min_samples_per_symbol"] = min_l;
        line = "plan: L >= " + std::to_string(min_l);
    } else {
        const auto report = bounds::feasibility(
            require<double>(cfg, "eps"), require<int>(cfg, "n"), require<double>(cfg, "beta"),
            require<double>(cfg, "u1_max"));
        out["mode"] = "noise";
        out.update(feasibility_json(report));
        line = std::string("plan: ") + (report.feasible ? "FEASIBLE" : "INFEASIBLE")
               + " ratio=" + std::to_string(report.ratio);
    }

    prepare_out_dir(options);
    write_manifest(options, "plan", cfg);
    write_text(std::filesystem::path(options.out_dir) / "plan.json", out.dump(2) + "\n");
    std::cout << line << "\n";
    return kExitOk;
}

int run_classify_impl(const CommonOptions& options) {
    const json cfg = load_config(options.config_path);
    reject_unknown_keys(cfg, {"m_order", "fc_hz", "symbol_period_s", "theta_c",
                              "samples_per_symbol", "symbols", "n0", "snr_db", "seed",
                              "rank1_guard", "snap_to_power_of_two"});
    mpsk::MpskScenario sc = mpsk_scenario_from(cfg, true);
    if (options.seed.has_value()) {
        sc.seed = *options.seed;
    }
    sc.validate();

    mpsk::ClassifyOptions copts;
    copts.rank1_guard = optional_or<double>(cfg, "rank1_guard", 0.1);
    copts.snap_to_power_of_two = optional_or<bool>(cfg, "snap_to_power_of_two", false);

    const auto synth = mpsk::synth_matrix(sc);
    const auto result = mpsk::classify(synth.y, sc.n0, copts);

    prepare_out_dir(options);
    write_manifest(options, "classify", scenario_json(sc));

    if (options.format != "json") {
        write_text(std::filesystem::path(options.out_dir) / "points.csv",
                   mpsk::points_csv(result, synth.theta_indices));
    }
    if (options.format != "csv") {
        json summary;
        summary["scenario"] = scenario_json(sc);
        summary["m_hat"] = result.m_hat;
        summary["radius"] = result.radius;
        summary["radius_used"] = result.clusters.radius_used;
        summary["rank1"] = result.embedding.rank1;
        summary["sigma1"] = result.embedding.sigma1;
        summary["sigma2"] = result.embedding.sigma2;
        summary["feasibility"] = feasibility_json(result.feasibility);
        summary["min_feasible_l"] = result.min_feasible_l;
        json modes = json::array();
        for (Eigen::Index j = 0; j < result.clusters.modes.cols(); ++j) {
            modes.push_back({result.clusters.modes(0, j), result.clusters.modes(1, j)});
        }
        summary["modes"] = modes;
        json warnings = json::array();
        if (result.clusters.nonconverged > 0) {
            warnings.push_back("mean_shift: " + std::to_string(result.clusters.nonconverged)
                               + " trajectories hit the iteration cap");
        }
        summary["warnings"] = warnings;
        write_text(std::filesystem::path(options.out_dir) / "summary.json",
                   summary.dump(2) + "\n");
    }

    std::cout << "classify: m_hat=" << result.m_hat << " radius=" << result.radius
              << (result.embedding.rank1 ? " (rank-1 path)" : "") << "\n";
    return kExitOk;
}

int run_sweep_impl(const CommonOptions& options) {
    const json cfg = load_config(options.config_path);
    reject_unknown_keys(cfg, {"fc_hz", "symbol_period_s", "theta_c", "samples_per_symbol",
                              "symbols", "seed", "m_orders", "snr_db_grid", "runs_per_point"});
    mpsk::MpskScenario base = mpsk_scenario_from(cfg, false);
    if (options.seed.has_value()) {
        base.seed = *options.seed;
    }
    const auto m_orders = require<std::vector<int>>(cfg, "m_orders");
    const auto grid = require<std::vector<double>>(cfg, "snr_db_grid");
    const int runs = require<int>(cfg, "runs_per_point");

    const auto rows = mpsk::snr_sweep(base, m_orders, grid, runs, options.jobs);

    prepare_out_dir(options);
    json resolved = cfg;
    resolved["seed"] = base.seed;
    write_manifest(options, "sweep", resolved);

    if (options.format != "json") {
        write_text(std::filesystem::path(options.out_dir) / "sweep.csv", mpsk::sweep_csv(rows));
    }
    if (options.format != "csv") {
        json summary;
        summary["scenario"] = resolved;
        json jrows = json::array();
        for (const auto& r : rows) {
            jrows.push_back({{"m_order", r.m_order},
                             {"snr_db", r.snr_db},
                             {"runs", r.runs},
                             {"successes", r.successes},
                             {"rate", r.rate}});
        }
        summary["rows"] = jrows;
        write_text(std::filesystem::path(options.out_dir) / "summary.json",
                   summary.dump(2) + "\n");
    }

    std::cout << "sweep: " << rows.size() << " cells written\n";
    return kExitOk;
}

}  // namespace

int run_bound(const CommonOptions& options) { return guarded("bound", options, run_bound_impl); }
int run_verify(const CommonOptions& options) {
    return guarded("verify", options, run_verify_impl);
}
int run_plan(const CommonOptions& options) { return guarded("plan", options, run_plan_impl); }
int run_classify(const CommonOptions& options) {
    return guarded("classify", options, run_classify_impl);
}
int run_sweep(const CommonOptions& options) { return guarded("sweep", options, run_sweep_impl); }

}  // namespace svp::cli
