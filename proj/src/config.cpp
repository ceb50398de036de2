#include "tiltrisk/config.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "tiltrisk/error.hpp"
#include "tiltrisk/eta_select.hpp"
#include "tiltrisk/io.hpp"

namespace tiltrisk {

namespace {

using nlohmann::json;

void allow_keys(const json& j, std::initializer_list<const char*> keys, const std::string& where) {
    if (!j.is_object()) throw ConfigError(where + " must be a JSON object");
    for (const auto& [key, value] : j.items()) {
        if (std::none_of(keys.begin(), keys.end(), [&](const char* k) { return key == k; })) {
            throw ConfigError("unknown key '" + key + "' in " + where);
        }
    }
}

std::vector<std::string> string_list(const json& j, const std::string& where) {
    if (!j.is_array()) throw ConfigError(where + " must be an array of column names");
    std::vector<std::string> out;
    for (const auto& v : j) {
        if (!v.is_string()) throw ConfigError(where + " must be an array of column names");
        out.push_back(v.get<std::string>());
    }
    return out;
}

std::vector<double> number_list(const json& j, const std::string& where) {
    if (!j.is_array()) throw ConfigError(where + " must be an array of numbers");
    std::vector<double> out;
    for (const auto& v : j) {
        if (!v.is_number()) throw ConfigError(where + " must be an array of numbers");
        out.push_back(v.get<double>());
    }
    return out;
}

BasisConfig basis_from_json(const json& j, const std::string& where) {
    BasisConfig b;
    if (j.is_string()) {
        const auto kind = j.get<std::string>();
        if (kind == "intercept") {
            b.intercept_only = true;
        } else if (kind == "spline") {
            b.basis = BasisKind::spline;
        } else if (kind != "linear") {
            throw ConfigError(where + ": unknown basis '" + kind + "' (expected linear, spline, intercept)");
        }
        return b;
    }
    allow_keys(j, {"basis", "columns", "spline_columns", "degree", "knots"}, where);
    b = basis_from_json(j.value("basis", std::string("linear")), where);
    if (j.contains("columns")) b.columns = string_list(j["columns"], where + ".columns");
    if (j.contains("spline_columns")) b.spline_columns = string_list(j["spline_columns"], where + ".spline_columns");
    b.degree = j.value("degree", b.degree);
    b.knots = j.value("knots", b.knots);
    return b;
}

json basis_to_json(const BasisConfig& b) {
    json j{{"basis", b.intercept_only ? "intercept" : (b.basis == BasisKind::spline ? "spline" : "linear")},
           {"columns", b.columns}};
    if (b.basis == BasisKind::spline && !b.intercept_only) {
        j["spline_columns"] = b.spline_columns;
        j["degree"] = b.degree;
        j["knots"] = b.knots;
    }
    return j;
}

void check_subset(const std::vector<std::string>& names, const std::vector<std::string>& pool, const std::string& what,
                  const std::string& pool_name) {
    for (const auto& n : names) {
        if (std::find(pool.begin(), pool.end(), n) == pool.end()) {
            throw ConfigError(what + " column '" + n + "' is not among the " + pool_name);
        }
    }
}

void validate_basis(const BasisConfig& b, const std::vector<std::string>& covariates, const std::string& what) {
    check_subset(b.columns, covariates, what, "analysis covariates");
    if (b.basis == BasisKind::spline && !b.intercept_only) {
        const auto& pool = b.columns.empty() ? covariates : b.columns;
        check_subset(b.spline_columns, pool, what + " spline", "basis columns");
        if (b.degree < 1 || b.degree > 3) throw ConfigError(what + ": spline degree must be 1, 2 or 3");
        if (b.knots < 0) throw ConfigError(what + ": interior knot count must be nonnegative");
    }
}

Eigen::Index index_of(const std::vector<std::string>& names, const std::string& name) {
    return std::find(names.begin(), names.end(), name) - names.begin();
}

}  // namespace

bool AnalysisConfig::stochastic() const {
    return resample.method == ResampleMethod::bootstrap || model.fit_split.has_value();
}

std::filesystem::path AnalysisConfig::resolve(const std::filesystem::path& p) const {
    if (p.empty() || p.is_absolute() || base_dir.empty()) return p;
    return base_dir / p;
}

void AnalysisConfig::validate() const {
    if (covariates.empty()) throw ConfigError("config needs at least one covariate");
    const std::set<std::string> unique(covariates.begin(), covariates.end());
    if (unique.size() != covariates.size()) throw ConfigError("covariate names must be unique");
    if (unique.count("s") || unique.count("y")) throw ConfigError("covariates cannot be the s or y columns");

    check_subset(model.covariates, covariates, "model", "analysis covariates");
    if (model.coefficients.has_value() == model.fit_split.has_value()) {
        throw ConfigError("model needs exactly one of 'coefficients' or 'fit_split'");
    }
    if (model.coefficients &&
        model.coefficients->size() != static_cast<Eigen::Index>(model.covariates.size()) + 1) {
        throw ConfigError("model coefficients must be an intercept plus one per model covariate");
    }
    if (model.fit_split && !(*model.fit_split > 0.0 && *model.fit_split < 1.0)) {
        throw ConfigError("fit_split must lie in (0,1)");
    }
    if (loss == LossKind::brier && outcome != OutcomeType::binary) throw ConfigError("Brier loss needs a binary outcome");
    if (loss == LossKind::brier && model.link != Link::logit) throw ConfigError("Brier loss needs a logit-link model");

    validate_basis(outcome_basis, covariates, "nuisance.outcome");
    validate_basis(membership_basis, covariates, "nuisance.membership");
    if (selection_basis) validate_basis(*selection_basis, covariates, "nuisance.selection");
    if (stability.spline) validate_basis(*stability.spline, covariates, "stability.spline");

    if (eta.values.empty() == !eta.anchor.has_value()) {
        throw ConfigError("eta needs exactly one of an explicit 'grid' or a prevalence 'anchor'");
    }
    for (std::size_t k = 1; k < eta.values.size(); ++k) {
        if (!(eta.values[k - 1] < eta.values[k])) throw ConfigError("eta grid must be strictly increasing");
    }
    if (eta.anchor) {
        if (outcome != OutcomeType::binary) throw ConfigError("prevalence anchoring needs a binary outcome");
        if (eta.anchor->prevalence && !(*eta.anchor->prevalence > 0.0 && *eta.anchor->prevalence < 1.0)) {
            throw ConfigError("anchor prevalence must lie in (0,1)");
        }
        if (!(eta.anchor->lower_multiplier > 0.0 && eta.anchor->lower_multiplier <= eta.anchor->upper_multiplier)) {
            throw ConfigError("anchor multipliers must satisfy 0 < lower <= upper");
        }
        if (!(eta.anchor->step > 0.0)) throw ConfigError("anchor step must be positive");
    }
    if (estimator == EstimatorKind::aug_alt && design == StudyDesign::nested) {
        throw ConfigError("the aug-alt estimator is only defined for non-nested designs");
    }
    if (resample.method != ResampleMethod::none) resample.validate();
    if (stochastic() && !seed) throw ConfigError("a seed is required for bootstrap resampling and fit_split");
}

AnalysisConfig config_from_json(const json& j, const std::filesystem::path& base_dir) {
    AnalysisConfig c;
    c.base_dir = base_dir;
    try {
        allow_keys(j, {"format_version", "data", "design", "outcome", "loss", "covariates", "model", "nuisance", "eta",
                       "estimator", "resample", "seed", "outputs", "stability"},
                   "config");
        if (j.value("format_version", kFormatVersion) != kFormatVersion) {
            throw ConfigError("unsupported config format_version");
        }
        if (j.contains("data")) c.data = j["data"].get<std::string>();
        c.design = parse_design(j.value("design", std::string("non-nested")));
        c.outcome = parse_outcome_type(j.value("outcome", std::string("binary")));
        c.loss = parse_loss_kind(j.value("loss", std::string(c.outcome == OutcomeType::binary ? "brier" : "squared")));
        if (!j.contains("covariates")) throw ConfigError("config needs 'covariates'");
        c.covariates = string_list(j["covariates"], "covariates");

        if (!j.contains("model")) throw ConfigError("config needs a 'model' section");
        const json& m = j["model"];
        allow_keys(m, {"covariates", "coefficients", "fit_split", "link"}, "model");
        c.model.covariates = m.contains("covariates") ? string_list(m["covariates"], "model.covariates") : c.covariates;
        if (m.contains("coefficients")) {
            const auto v = number_list(m["coefficients"], "model.coefficients");
            c.model.coefficients = Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
        }
        if (m.contains("fit_split")) c.model.fit_split = m["fit_split"].get<double>();
        c.model.link = parse_link(
            m.value("link", std::string(c.outcome == OutcomeType::binary ? "logit" : "identity")));

        if (j.contains("nuisance")) {
            const json& nj = j["nuisance"];
            allow_keys(nj, {"outcome", "membership", "selection"}, "nuisance");
            if (nj.contains("outcome")) c.outcome_basis = basis_from_json(nj["outcome"], "nuisance.outcome");
            if (nj.contains("membership")) c.membership_basis = basis_from_json(nj["membership"], "nuisance.membership");
            if (nj.contains("selection")) c.selection_basis = basis_from_json(nj["selection"], "nuisance.selection");
        }

        if (!j.contains("eta")) throw ConfigError("config needs an 'eta' section");
        const json& ej = j["eta"];
        allow_keys(ej, {"grid", "anchor"}, "eta");
        if (ej.contains("grid")) {
            const json& g = ej["grid"];
            if (g.is_array()) {
                c.eta.values = number_list(g, "eta.grid");
            } else {
                allow_keys(g, {"lo", "hi", "step"}, "eta.grid");
                c.eta.values = eta_lattice(g.at("lo").get<double>(), g.at("hi").get<double>(),
                                           g.value("step", 0.05));
            }
            if (c.eta.values.empty()) throw ConfigError("eta grid is empty");
        }
        if (ej.contains("anchor")) {
            const json& a = ej["anchor"];
            allow_keys(a, {"prevalence", "multipliers", "step"}, "eta.anchor");
            AnchorConfig anchor;
            if (a.contains("prevalence") && !(a["prevalence"].is_string() && a["prevalence"] == "source")) {
                anchor.prevalence = a["prevalence"].get<double>();
            }
            if (a.contains("multipliers")) {
                const auto mult = number_list(a["multipliers"], "eta.anchor.multipliers");
                if (mult.size() != 2) throw ConfigError("eta.anchor.multipliers needs two values");
                anchor.lower_multiplier = mult[0];
                anchor.upper_multiplier = mult[1];
            }
            anchor.step = a.value("step", anchor.step);
            c.eta.anchor = anchor;
        }

        c.estimator = parse_estimator_kind(j.value("estimator", std::string("aug")));
        if (j.contains("seed") && !j["seed"].is_null()) c.seed = j["seed"].get<std::uint64_t>();
        c.resample = ResampleConfig::defaults_for(c.design, c.seed.value_or(0));
        if (j.contains("resample")) {
            const json& r = j["resample"];
            allow_keys(r, {"method", "replicates", "stratified", "level", "threads"}, "resample");
            c.resample.method = parse_resample_method(r.value("method", std::string("bootstrap")));
            c.resample.replicates = r.value("replicates", c.resample.replicates);
            c.resample.stratified = r.value("stratified", c.resample.stratified);
            c.resample.level = r.value("level", c.resample.level);
            c.resample.threads = r.value("threads", c.resample.threads);
        }

        if (j.contains("outputs")) {
            const json& o = j["outputs"];
            allow_keys(o, {"curve", "report"}, "outputs");
            if (o.contains("curve")) c.curve_path = o["curve"].get<std::string>();
            if (o.contains("report")) c.report_path = o["report"].get<std::string>();
        }
        if (j.contains("stability")) {
            const json& s = j["stability"];
            allow_keys(s, {"jackknife", "spline"}, "stability");
            c.stability.jackknife = s.value("jackknife", false);
            if (s.contains("spline")) {
                BasisConfig b = basis_from_json(s["spline"], "stability.spline");
                b.basis = BasisKind::spline;
                c.stability.spline = b;
            }
        }
    } catch (const json::exception& e) {
        throw ConfigError(std::string("invalid config: ") + e.what());
    }
    c.validate();
    return c;
}

json config_to_json(const AnalysisConfig& c) {
    json j;
    j["format_version"] = kFormatVersion;
    j["data"] = c.data.generic_string();
    j["design"] = to_string(c.design);
    j["outcome"] = to_string(c.outcome);
    j["loss"] = LossFunction(c.loss).name();
    j["covariates"] = c.covariates;
    json m{{"covariates", c.model.covariates}, {"link", to_string(c.model.link)}};
    if (c.model.coefficients) {
        m["coefficients"] = std::vector<double>(c.model.coefficients->data(),
                                                c.model.coefficients->data() + c.model.coefficients->size());
    }
    if (c.model.fit_split) m["fit_split"] = *c.model.fit_split;
    j["model"] = m;
    j["nuisance"] = {{"outcome", basis_to_json(c.outcome_basis)}, {"membership", basis_to_json(c.membership_basis)}};
    if (c.selection_basis) j["nuisance"]["selection"] = basis_to_json(*c.selection_basis);
    if (c.eta.anchor) {
        json a{{"multipliers", {c.eta.anchor->lower_multiplier, c.eta.anchor->upper_multiplier}},
               {"step", c.eta.anchor->step}};
        a["prevalence"] = c.eta.anchor->prevalence ? json(*c.eta.anchor->prevalence) : json("source");
        j["eta"] = {{"anchor", a}};
    } else {
        j["eta"] = {{"grid", c.eta.values}};
    }
    j["estimator"] = to_string(c.estimator);
    j["resample"] = {{"method", to_string(c.resample.method)},
                     {"replicates", c.resample.replicates},
                     {"stratified", c.resample.stratified},
                     {"level", c.resample.level},
                     {"threads", c.resample.threads}};
    j["seed"] = c.seed ? json(*c.seed) : json(nullptr);
    j["outputs"] = {{"curve", c.curve_path.generic_string()}, {"report", c.report_path.generic_string()}};
    json stab{{"jackknife", c.stability.jackknife}};
    if (c.stability.spline) stab["spline"] = basis_to_json(*c.stability.spline);
    j["stability"] = stab;
    return j;
}

AnalysisConfig load_config(const std::filesystem::path& path) {
    const std::string text = read_text_file(path);
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError("cannot parse " + path.string() + ": " + e.what());
    }
    return config_from_json(j, path.parent_path());
}

DesignSpec design_from_basis(const BasisConfig& basis, const std::vector<std::string>& covariates) {
    if (basis.intercept_only) return DesignSpec::intercept_only();
    const auto& names = basis.columns.empty() ? covariates : basis.columns;
    std::vector<Eigen::Index> cols;
    for (const auto& n : names) cols.push_back(index_of(covariates, n));
    if (basis.basis == BasisKind::linear) return DesignSpec::linear(cols);
    std::vector<Eigen::Index> spline_cols;
    for (const auto& n : basis.spline_columns.empty() ? names : basis.spline_columns) {
        spline_cols.push_back(index_of(covariates, n));
    }
    return DesignSpec::with_splines(cols, spline_cols, basis.degree, basis.knots);
}

NuisanceRecipe recipe_from_config(const AnalysisConfig& config) {
    NuisanceRecipe recipe;
    recipe.outcome = config.outcome;
    recipe.loss = LossFunction(config.loss);
    recipe.outcome_design = design_from_basis(config.outcome_basis, config.covariates);
    recipe.membership_design = design_from_basis(config.membership_basis, config.covariates);
    if (config.selection_basis) {
        recipe.selection_design = design_from_basis(*config.selection_basis, config.covariates);
    } else if (config.estimator == EstimatorKind::aug_alt) {
        recipe.selection_design = recipe.membership_design;
    }
    return recipe;
}

}  // namespace tiltrisk
