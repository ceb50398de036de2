#include "tiltrisk/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <Eigen/Core>

#include "tiltrisk/error.hpp"
#include "tiltrisk/glm.hpp"
#include "tiltrisk/wls.hpp"

#ifndef TILTRISK_VERSION
#define TILTRISK_VERSION "0.0.0"
#endif

namespace tiltrisk {

namespace {

using nlohmann::json;

// Substream key for the model-fitting split, disjoint from replicate indices.
constexpr std::uint64_t kSplitStream = 0xFFFFFFFF00000001ULL;

json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

json optional_number(const std::optional<double>& v) { return v ? number_or_null(*v) : json(nullptr); }

json diagnostics_json(const FitDiagnostics& d) {
    return {{"converged", d.converged}, {"iterations", d.iterations}, {"ridge_fallback", d.ridge_fallback}};
}

json curve_json(const SensitivityCurve& curve, OutcomeType outcome) {
    json points = json::array();
    for (const auto& p : curve.points) {
        const auto& r = p.result;
        points.push_back({
            {"eta", p.eta},
            {"estimate", number_or_null(r.estimate)},
            {"se", optional_number(r.se)},
            {"ci_lo", r.ci ? number_or_null(r.ci->first) : json(nullptr)},
            {"ci_hi", r.ci ? number_or_null(r.ci->second) : json(nullptr)},
            {"max_weight", number_or_null(r.diagnostics.max_weight)},
            {"p_clip_count", r.diagnostics.p_clip_count},
            {"c_clip_count", r.diagnostics.c_clip_count},
            {"overshoot", number_or_null(r.diagnostics.overshoot)},
            {"positivity_warning", r.diagnostics.positivity_warning},
            {"resample_failures", p.resample_failures},
            {"status", to_string(p.status)},
            {"message", p.message},
        });
    }
    return {
        {"estimator", to_string(curve.estimator)},
        {"design", to_string(curve.design)},
        {"resample", to_string(curve.resample)},
        {"replicates", curve.replicates},
        {"nuisance",
         {{"g", outcome == OutcomeType::binary ? diagnostics_json(curve.g_diagnostics) : json(nullptr)},
          {"p", diagnostics_json(curve.p_diagnostics)},
          {"p_clip_count", curve.p_clip_count}}},
        {"failed_points", curve.failed_points()},
        {"points", points},
    };
}

std::vector<Eigen::Index> model_columns(const AnalysisConfig& config) {
    std::vector<Eigen::Index> cols;
    for (const auto& name : config.model.covariates) {
        cols.push_back(std::find(config.covariates.begin(), config.covariates.end(), name) - config.covariates.begin());
    }
    return cols;
}

std::filesystem::path with_suffix(const std::filesystem::path& p, const std::string& suffix) {
    return p.parent_path() / (p.stem().string() + suffix + p.extension().string());
}

NuisanceRecipe spline_recipe(const AnalysisConfig& config) {
    NuisanceRecipe recipe = recipe_from_config(config);
    const DesignSpec spline = design_from_basis(*config.stability.spline, config.covariates);
    recipe.outcome_design = spline;
    recipe.membership_design = spline;
    if (recipe.selection_design) recipe.selection_design = spline;
    return recipe;
}

}  // namespace

std::string library_version() { return TILTRISK_VERSION; }

PreparedData prepare_data(const AnalysisConfig& config) {
    TableSchema schema;
    schema.design = config.design;
    schema.covariates = config.covariates;
    if (config.data.empty()) throw ConfigError("config does not name a data file");
    return prepare_data(config, load_table(config.resolve(config.data), schema));
}

PreparedData prepare_data(const AnalysisConfig& config, LoadedTable loaded) {
    PreparedData out;
    out.model.link = config.model.link;
    out.model.columns = model_columns(config);
    ObservationTable& table = loaded.table;

    if (config.model.coefficients) {
        out.model.coefficients = *config.model.coefficients;
    } else {
        auto src = table.source_rows();
        auto rng = substream(*config.seed, kSplitStream);
        std::shuffle(src.begin(), src.end(), rng);
        const auto n_fit = static_cast<std::size_t>(std::llround(*config.model.fit_split * static_cast<double>(src.size())));
        if (n_fit < out.model.columns.size() + 2 || n_fit >= src.size()) {
            throw DataError("fit_split leaves too few source rows to fit or to evaluate the model");
        }
        std::vector<Eigen::Index> fit_rows(src.begin(), src.begin() + static_cast<std::ptrdiff_t>(n_fit));
        std::sort(fit_rows.begin(), fit_rows.end());
        const Eigen::MatrixXd xf = select_rows(table.x, fit_rows);
        const Eigen::VectorXd yf = select_rows(table.y, fit_rows);
        const DesignSpec spec = DesignSpec::linear(out.model.columns);
        if (config.model.link == Link::logit) {
            out.model.coefficients = fit_logistic(spec, xf, yf).coefficients;
        } else {
            const DesignBasis basis = DesignBasis::bind(spec, xf, table.covariate_names);
            out.model.coefficients = fit_weighted_ls(basis, xf, yf, Eigen::VectorXd::Ones(yf.size())).coefficients;
        }
        std::vector<char> used(static_cast<std::size_t>(table.rows()), 0);
        for (const auto i : fit_rows) used[static_cast<std::size_t>(i)] = 1;
        std::vector<Eigen::Index> keep;
        for (Eigen::Index i = 0; i < table.rows(); ++i) {
            if (!used[static_cast<std::size_t>(i)]) keep.push_back(i);
        }
        table = table.subset(keep);
        out.model_fitted = true;
        out.fit_rows = static_cast<Eigen::Index>(n_fit);
    }
    out.model.validate(table.covariates());
    attach_model(table, out.model, LossFunction(config.loss));
    out.loaded = std::move(loaded);
    return out;
}

AnchoredGrid anchored_grid(const ObservationTable& table, const NuisanceRecipe& recipe, const AnchorConfig& anchor) {
    if (recipe.outcome != OutcomeType::binary) throw ConfigError("prevalence anchoring needs a binary outcome");
    const FittedNuisance fitted = FittedNuisance::fit(table, recipe);
    AnchoredGrid out;
    if (anchor.prevalence) {
        out.anchor_prevalence = *anchor.prevalence;
    } else {
        const auto src = table.source_rows();
        double sum = 0.0;
        for (const auto i : src) sum += table.y(i);
        out.anchor_prevalence = sum / static_cast<double>(src.size());
        out.prevalence_from_source = true;
    }
    PrevalenceAnchor pa;
    pa.prevalence = out.anchor_prevalence;
    pa.lower_multiplier = anchor.lower_multiplier;
    pa.upper_multiplier = anchor.upper_multiplier;
    out.range = eta_grid_from_prevalence_range(table, *fitted.g(), fitted.p(), pa, anchor.step);
    return out;
}

bool AnalysisOutput::any_failed() const {
    auto failed = [](const std::optional<SensitivityCurve>& c) { return c && c->failed_points() > 0; };
    return curve.failed_points() > 0 || failed(jackknife) || failed(spline);
}

AnalysisOutput run_analysis(const AnalysisConfig& config) {
    TableSchema schema;
    schema.design = config.design;
    schema.covariates = config.covariates;
    if (config.data.empty()) throw ConfigError("config does not name a data file");
    return run_analysis(config, load_table(config.resolve(config.data), schema));
}

AnalysisOutput run_analysis(const AnalysisConfig& config, LoadedTable loaded) {
    config.validate();
    AnalysisOutput out;
    out.data = prepare_data(config, std::move(loaded));
    const ObservationTable& table = out.data.loaded.table;
    const NuisanceRecipe recipe = recipe_from_config(config);

    if (config.eta.anchor) {
        out.anchor = anchored_grid(table, recipe, *config.eta.anchor);
        out.grid = out.anchor->range.grid;
    } else {
        out.grid = config.eta.values;
    }

    CurveConfig cc;
    cc.estimator = config.estimator;
    cc.resample = config.resample;
    cc.resample.seed = config.seed.value_or(0);
    out.curve = sensitivity_curve(table, recipe, out.grid, cc);

    if (config.stability.jackknife) {
        CurveConfig jk = cc;
        jk.resample.method = ResampleMethod::jackknife;
        out.jackknife = sensitivity_curve(table, recipe, out.grid, jk);
    }
    if (config.stability.spline) {
        out.spline = sensitivity_curve(table, spline_recipe(config), out.grid, cc);
    }

    json report;
    report["format_version"] = kFormatVersion;
    report["tool"] = "tiltrisk";
    report["versions"] = {
        {"tiltrisk", library_version()},
        {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                      std::to_string(EIGEN_MINOR_VERSION)},
        {"nlohmann_json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                              std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                              std::to_string(NLOHMANN_JSON_VERSION_PATCH)},
    };
    report["config"] = config_to_json(config);
    report["seeds"] = {
        {"seed", config.seed ? json(*config.seed) : json(nullptr)},
        {"bootstrap_stream", "replicate r uses substream(seed, r)"},
        {"split_stream", config.model.fit_split ? json(kSplitStream) : json(nullptr)},
    };
    report["data"] = {
        {"rows", table.rows()},
        {"n_source", table.n_source()},
        {"n_target", table.n_target()},
        {"ignored_target_outcomes", out.data.loaded.ignored_target_outcomes},
        {"model_fit_rows", out.data.fit_rows},
    };
    const auto& coef = out.data.model.coefficients;
    report["model"] = {
        {"covariates", config.model.covariates},
        {"coefficients", std::vector<double>(coef.data(), coef.data() + coef.size())},
        {"link", to_string(out.data.model.link)},
        {"fitted", out.data.model_fitted},
    };
    json eta{{"mode", config.eta.anchor ? "anchor" : "grid"}, {"grid", out.grid}};
    if (out.anchor) {
        eta["anchor"] = {
            {"prevalence", out.anchor->anchor_prevalence},
            {"prevalence_from_source", out.anchor->prevalence_from_source},
            {"prevalence_lo", out.anchor->range.prevalence_lo},
            {"prevalence_hi", out.anchor->range.prevalence_hi},
            {"eta_lo", out.anchor->range.eta_lo},
            {"eta_hi", out.anchor->range.eta_hi},
        };
    } else {
        eta["anchor"] = nullptr;
    }
    report["eta"] = eta;
    report["curve"] = curve_json(out.curve, config.outcome);
    report["stability"] = {
        {"jackknife", out.jackknife ? curve_json(*out.jackknife, config.outcome) : json(nullptr)},
        {"spline", out.spline ? curve_json(*out.spline, config.outcome) : json(nullptr)},
    };
    report["status"] = out.any_failed() ? "partial" : "ok";
    out.report = std::move(report);
    return out;
}

std::string report_text(const nlohmann::json& report) { return report.dump(2) + "\n"; }

void write_outputs(const AnalysisConfig& config, const AnalysisOutput& output) {
    if (!config.curve_path.empty()) {
        const auto path = config.resolve(config.curve_path);
        write_text_file(path, curve_csv(curve_rows(output.curve)));
        if (output.jackknife) write_text_file(with_suffix(path, "_jackknife"), curve_csv(curve_rows(*output.jackknife)));
        if (output.spline) write_text_file(with_suffix(path, "_spline"), curve_csv(curve_rows(*output.spline)));
    }
    if (!config.report_path.empty()) {
        write_text_file(config.resolve(config.report_path), report_text(output.report));
    }
}

}  // namespace tiltrisk
