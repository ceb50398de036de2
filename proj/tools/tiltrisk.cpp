// tiltrisk command-line interface.

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"
#include "tiltrisk/config.hpp"
#include "tiltrisk/error.hpp"
#include "tiltrisk/io.hpp"
#include "tiltrisk/pipeline.hpp"
#include "tiltrisk/selftest.hpp"
#include "tiltrisk/simgen.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace tiltrisk;

namespace {

json read_json(const fs::path& path) {
    try {
        return json::parse(read_text_file(path));
    } catch (const json::parse_error& e) {
        throw ConfigError("cannot parse " + path.string() + ": " + e.what());
    }
}

struct AnalyzeFlags {
    std::string config;
    std::string data;
    std::optional<std::uint64_t> seed;
    std::string estimator;
    std::string method;
    std::optional<int> replicates;
    std::optional<int> threads;
    std::optional<double> level;
    std::string curve;
    std::string report;
    bool jackknife = false;
};

void apply_common(json& j, const AnalyzeFlags& f) {
    if (!f.data.empty()) j["data"] = fs::absolute(f.data).string();
    if (f.seed) j["seed"] = *f.seed;
    if (!f.estimator.empty()) j["estimator"] = f.estimator;
    if (!f.method.empty()) j["resample"]["method"] = f.method;
    if (f.replicates) j["resample"]["replicates"] = *f.replicates;
    if (f.threads) j["resample"]["threads"] = *f.threads;
    if (f.level) j["resample"]["level"] = *f.level;
    if (!f.curve.empty()) j["outputs"]["curve"] = fs::absolute(f.curve).string();
    if (!f.report.empty()) j["outputs"]["report"] = fs::absolute(f.report).string();
    if (f.jackknife) j["stability"]["jackknife"] = true;
}

int analyze(const AnalyzeFlags& f) {
    json j = read_json(f.config);
    apply_common(j, f);
    const AnalysisConfig config = config_from_json(j, fs::path(f.config).parent_path());
    const AnalysisOutput out = run_analysis(config);
    write_outputs(config, out);
    if (config.curve_path.empty() && config.report_path.empty()) {
        std::cout << curve_csv(curve_rows(out.curve));
    }
    const auto failed = out.curve.failed_points();
    std::cerr << "analyzed " << out.grid.size() << " eta values (" << failed << " failed) on "
              << out.data.loaded.table.rows() << " rows";
    if (out.data.loaded.ignored_target_outcomes > 0) {
        std::cerr << "; warning: ignored " << out.data.loaded.ignored_target_outcomes
                  << " outcome values on target rows";
    }
    std::cerr << "\n";
    if (out.any_failed()) {
        std::cerr << "error: some curve points failed; see the status column\n";
        return kExitNumeric;
    }
    return 0;
}

struct RangeFlags {
    AnalyzeFlags common;
    std::optional<double> prevalence;
    std::optional<double> step;
    std::vector<double> multipliers;
};

int eta_range(const RangeFlags& f) {
    json j = read_json(f.common.config);
    apply_common(j, f.common);
    json anchor = j.contains("eta") && j["eta"].contains("anchor") ? j["eta"]["anchor"] : json::object();
    if (f.prevalence) anchor["prevalence"] = *f.prevalence;
    if (f.step) anchor["step"] = *f.step;
    if (!f.multipliers.empty()) anchor["multipliers"] = f.multipliers;
    j["eta"] = {{"anchor", anchor}};
    j["resample"]["method"] = "none";
    const AnalysisConfig config = config_from_json(j, fs::path(f.common.config).parent_path());
    const PreparedData data = prepare_data(config);
    const AnchoredGrid g = anchored_grid(data.loaded.table, recipe_from_config(config), *config.eta.anchor);
    const json result{
        {"prevalence", g.anchor_prevalence},
        {"prevalence_from_source", g.prevalence_from_source},
        {"prevalence_lo", g.range.prevalence_lo},
        {"prevalence_hi", g.range.prevalence_hi},
        {"eta_lo", g.range.eta_lo},
        {"eta_hi", g.range.eta_hi},
        {"grid", g.range.grid},
    };
    std::cout << result.dump(2) << "\n";
    return 0;
}

struct SimulateFlags {
    std::string dgp;
    std::uint64_t seed = 0;
    std::string out;
    std::string hidden;
    std::optional<Eigen::Index> n;
    std::optional<double> eta_true;
    std::optional<std::int64_t> oracle_mc;
};

int simulate(const SimulateFlags& f) {
    DgpSpec spec = read_json(f.dgp).get<DgpSpec>();
    if (f.n) spec.n = *f.n;
    if (f.eta_true) spec.eta_true = *f.eta_true;
    const SimulatedData sim = generate(spec, f.seed);
    write_text_file(f.out, table_csv(sim.table));
    if (!f.hidden.empty()) {
        std::string text = "row,y\n";
        for (std::size_t k = 0; k < sim.hidden.rows.size(); ++k) {
            text += std::to_string(sim.hidden.rows[k] + 1) + "," +
                    format_number(sim.hidden.y(static_cast<Eigen::Index>(k))) + "\n";
        }
        write_text_file(f.hidden, text);
    }
    json summary{{"rows", sim.table.rows()},
                 {"n_source", sim.table.n_source()},
                 {"n_target", sim.table.n_target()},
                 {"eta_true", spec.eta_true},
                 {"seed", f.seed}};
    if (f.oracle_mc) {
        const OracleValue o = spec.design == StudyDesign::nested
                                  ? true_psi_oracle(spec, spec.eta_true, *f.oracle_mc, f.seed)
                                  : true_phi_oracle(spec, spec.eta_true, *f.oracle_mc, f.seed);
        summary["oracle"] = {{"value", o.value}, {"mc_se", o.mc_se}, {"n_mc", *f.oracle_mc}};
    }
    std::cout << summary.dump(2) << "\n";
    return 0;
}

void add_analysis_flags(CLI::App* cmd, AnalyzeFlags& f) {
    cmd->add_option("-c,--config", f.config, "analysis config (JSON)")->required()->check(CLI::ExistingFile);
    cmd->add_option("--data", f.data, "CSV data file, overriding the config");
    cmd->add_option("--seed", f.seed, "seed for bootstrap resampling and fit_split");
    cmd->add_option("--estimator", f.estimator, "cl, aug or aug-alt");
    cmd->add_option("--method", f.method, "resampling: none, bootstrap or jackknife");
    cmd->add_option("--replicates", f.replicates, "bootstrap replicates");
    cmd->add_option("--threads", f.threads, "worker threads for resampling");
    cmd->add_option("--level", f.level, "confidence level");
    cmd->add_option("--curve", f.curve, "curve CSV output path");
    cmd->add_option("--report", f.report, "JSON report output path");
    cmd->add_flag("--jackknife", f.jackknife, "also run the jackknife stability curve");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Sensitivity analysis for transported prediction-model risk under an exponential tilt"};
    app.require_subcommand(1);
    app.set_version_flag("--version", library_version());

    AnalyzeFlags analyze_flags;
    auto* analyze_cmd = app.add_subcommand("analyze", "estimate the risk curve over eta");
    add_analysis_flags(analyze_cmd, analyze_flags);

    RangeFlags range_flags;
    auto* range_cmd = app.add_subcommand("eta-range", "eta range implied by a prevalence anchor");
    add_analysis_flags(range_cmd, range_flags.common);
    range_cmd->add_option("--prevalence", range_flags.prevalence, "anchor prevalence (default: source outcome mean)");
    range_cmd->add_option("--step", range_flags.step, "grid step");
    range_cmd->add_option("--multipliers", range_flags.multipliers, "lower and upper prevalence multipliers")
        ->expected(2);

    SimulateFlags sim_flags;
    auto* sim_cmd = app.add_subcommand("simulate", "draw a synthetic data set from a DGP spec");
    sim_cmd->add_option("--dgp", sim_flags.dgp, "DGP spec (JSON)")->required()->check(CLI::ExistingFile);
    sim_cmd->add_option("--seed", sim_flags.seed, "random seed")->required();
    sim_cmd->add_option("-o,--out", sim_flags.out, "output CSV")->required();
    sim_cmd->add_option("--hidden", sim_flags.hidden, "write hidden target outcomes to this CSV");
    sim_cmd->add_option("--n", sim_flags.n, "sample size override");
    sim_cmd->add_option("--eta-true", sim_flags.eta_true, "true eta override");
    sim_cmd->add_option("--oracle-mc", sim_flags.oracle_mc, "report the oracle risk at eta_true with this many draws");

    std::optional<std::uint64_t> selftest_seed;
    auto* self_cmd = app.add_subcommand("selftest", "run internal consistency checks");
    self_cmd->add_option("--seed", selftest_seed, "random seed")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitConfig;
    }

    try {
        if (*analyze_cmd) return analyze(analyze_flags);
        if (*range_cmd) return eta_range(range_flags);
        if (*sim_cmd) return simulate(sim_flags);
        if (*self_cmd) return run_selftest(*selftest_seed, std::cout) == 0 ? 0 : kExitNumeric;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return e.exit_code();
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitNumeric;
    }
    return 0;
}
