#include "tiltrisk/simgen.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "tiltrisk/error.hpp"
#include "tiltrisk/resampling.hpp"
#include "tiltrisk/tilt.hpp"

namespace tiltrisk {

namespace {

constexpr double kPositivityLow = 0.05;
constexpr double kPositivityHigh = 0.95;
constexpr Eigen::Index kBruteForceMaxRows = 8;
constexpr std::int64_t kOracleBatch = 1 << 16;

double logistic(double z) { return z >= 0.0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z)); }

double linear_predictor(const Eigen::VectorXd& coef, const Eigen::Ref<const Eigen::RowVectorXd>& x) {
    return coef(0) + x.dot(coef.tail(coef.size() - 1));
}

void require_size(const Eigen::VectorXd& v, Eigen::Index cols, const char* what) {
    if (v.size() != cols + 1) {
        std::ostringstream msg;
        msg << what << " needs " << cols + 1 << " coefficients (intercept + one per expanded column), got " << v.size();
        throw ConfigError(msg.str());
    }
}

// E|Z| for Z ~ N(d, sigma^2).
double folded_normal_mean(double d, double sigma) {
    const double z = d / sigma;
    return sigma * std::sqrt(2.0 / M_PI) * std::exp(-0.5 * z * z) + d * std::erf(z / std::sqrt(2.0));
}

Eigen::VectorXd json_vector(const nlohmann::json& j) {
    const auto v = j.get<std::vector<double>>();
    return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

std::vector<double> std_vector(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

// Expected summed target-row loss under the tilted joint distribution,
// by enumerating every outcome pattern of the target rows.
double enumerate_target_loss_sum(const ObservationTable& table, const Eigen::VectorXd& g, const LossFunction& loss,
                                 double eta) {
    if (table.rows() > kBruteForceMaxRows) {
        throw DataError("brute-force enumeration is limited to tables of at most 8 rows");
    }
    if (g.size() != table.rows()) throw DataError("g must have one value per table row");
    if (!table.has_model()) throw ConfigError("brute-force enumeration needs predictions attached to the table");
    const auto targets = table.target_rows();
    const auto m = targets.size();
    double total = 0.0;
    double mass = 0.0;
    for (std::uint32_t pattern = 0; pattern < (1u << m); ++pattern) {
        double weight = 1.0;
        double sum_loss = 0.0;
        for (std::size_t k = 0; k < m; ++k) {
            const Eigen::Index i = targets[k];
            const double y = (pattern >> k) & 1u ? 1.0 : 0.0;
            const double base = y == 1.0 ? g(i) : 1.0 - g(i);
            const double norm = std::exp(eta) * g(i) + (1.0 - g(i));
            weight *= std::exp(eta * y) * base / norm;
            sum_loss += loss(y, table.pred(i));
        }
        total += weight * sum_loss;
        mass += weight;
    }
    return total / mass;
}

}  // namespace

CovariateKind parse_covariate_kind(std::string_view name) {
    if (name == "uniform") return CovariateKind::uniform;
    if (name == "normal") return CovariateKind::normal;
    if (name == "bernoulli") return CovariateKind::bernoulli;
    if (name == "categorical") return CovariateKind::categorical;
    throw ConfigError("unknown covariate kind '" + std::string(name) +
                      "' (expected uniform, normal, bernoulli, categorical)");
}

std::string to_string(CovariateKind kind) {
    switch (kind) {
    case CovariateKind::uniform: return "uniform";
    case CovariateKind::normal: return "normal";
    case CovariateKind::bernoulli: return "bernoulli";
    case CovariateKind::categorical: return "categorical";
    }
    return "unknown";
}

Eigen::Index CovariateSpec::width() const {
    if (kind == CovariateKind::categorical) return std::max<Eigen::Index>(0, static_cast<Eigen::Index>(levels.size()) - 1);
    return 1;
}

Eigen::Index DgpSpec::columns() const {
    Eigen::Index total = 0;
    for (const auto& c : covariates) total += c.width();
    return total;
}

std::vector<std::string> DgpSpec::column_names() const {
    std::vector<std::string> names;
    for (std::size_t k = 0; k < covariates.size(); ++k) {
        const auto& c = covariates[k];
        const std::string base = c.name.empty() ? "x" + std::to_string(k + 1) : c.name;
        if (c.kind == CovariateKind::categorical) {
            for (std::size_t level = 2; level <= c.levels.size(); ++level) {
                names.push_back(base + "_" + std::to_string(level));
            }
        } else {
            names.push_back(base);
        }
    }
    return names;
}

LossFunction DgpSpec::loss_function() const { return LossFunction(loss); }

void DgpSpec::validate(bool require_positivity) const {
    if (covariates.empty()) throw ConfigError("DGP needs at least one covariate");
    if (n < 2) throw ConfigError("DGP sample size must be at least 2");
    for (const auto& c : covariates) {
        switch (c.kind) {
        case CovariateKind::uniform:
            if (!(c.a < c.b)) throw ConfigError("uniform covariate '" + c.name + "' needs a < b");
            break;
        case CovariateKind::normal:
            if (!(c.b > 0.0)) throw ConfigError("normal covariate '" + c.name + "' needs a positive sd");
            break;
        case CovariateKind::bernoulli:
            if (!(c.a >= 0.0 && c.a <= 1.0)) throw ConfigError("bernoulli covariate '" + c.name + "' needs a in [0,1]");
            break;
        case CovariateKind::categorical: {
            if (c.levels.size() < 2) throw ConfigError("categorical covariate '" + c.name + "' needs at least 2 levels");
            const double total = std::accumulate(c.levels.begin(), c.levels.end(), 0.0);
            const bool nonneg = std::all_of(c.levels.begin(), c.levels.end(), [](double v) { return v >= 0.0; });
            if (!nonneg || std::abs(total - 1.0) > 1e-9) {
                throw ConfigError("categorical covariate '" + c.name + "' level probabilities must sum to 1");
            }
            break;
        }
        }
    }
    const Eigen::Index d = columns();
    require_size(membership, d, "membership model");
    require_size(outcome_coefficients, d, "outcome model");
    for (const auto& t : outcome_quadratic) {
        if (t.column < 0 || t.column >= d) throw ConfigError("quadratic outcome term column out of range");
    }
    if (outcome == OutcomeType::continuous && !(sigma > 0.0)) throw ConfigError("continuous outcome needs sigma > 0");
    if (!std::isfinite(eta_true)) throw ConfigError("eta_true must be finite");
    if (outcome == OutcomeType::continuous && loss == LossKind::brier) {
        throw ConfigError("Brier loss needs a binary outcome");
    }
    if (loss == LossKind::custom) throw ConfigError("DGP losses must be brier, squared or absolute");
    model.validate(d);

    if (!require_positivity) return;
    double lo = membership(0);
    double hi = membership(0);
    Eigen::Index col = 0;
    for (const auto& c : covariates) {
        double c_lo = 0.0, c_hi = 0.0;
        if (c.kind == CovariateKind::categorical) {
            for (Eigen::Index k = 0; k < c.width(); ++k) {
                c_lo = std::min(c_lo, membership(col + 1 + k));
                c_hi = std::max(c_hi, membership(col + 1 + k));
            }
        } else {
            const double beta = membership(col + 1);
            if (c.kind == CovariateKind::normal && beta != 0.0) {
                throw ConfigError("membership coefficients on normal covariates must be zero to bound Pr[S=1|X]");
            }
            const double x_lo = c.kind == CovariateKind::uniform ? c.a : 0.0;
            const double x_hi = c.kind == CovariateKind::uniform ? c.b : (c.kind == CovariateKind::bernoulli ? 1.0 : 0.0);
            c_lo = std::min(beta * x_lo, beta * x_hi);
            c_hi = std::max(beta * x_lo, beta * x_hi);
        }
        lo += c_lo;
        hi += c_hi;
        col += c.width();
    }
    if (logistic(lo) < kPositivityLow || logistic(hi) > kPositivityHigh) {
        std::ostringstream msg;
        msg << "membership probabilities span [" << logistic(lo) << ", " << logistic(hi)
            << "], outside the required [0.05, 0.95]";
        throw ConfigError(msg.str());
    }
}

double DgpSpec::membership_probability(const Eigen::Ref<const Eigen::RowVectorXd>& x) const {
    return logistic(linear_predictor(membership, x));
}

double DgpSpec::outcome_linear_predictor(const Eigen::Ref<const Eigen::RowVectorXd>& x) const {
    double z = linear_predictor(outcome_coefficients, x);
    for (const auto& t : outcome_quadratic) z += t.coefficient * x(t.column) * x(t.column);
    return z;
}

double DgpSpec::outcome_mean(const Eigen::Ref<const Eigen::RowVectorXd>& x) const {
    const double z = outcome_linear_predictor(x);
    return outcome == OutcomeType::binary ? logistic(z) : z;
}

void to_json(nlohmann::json& j, const DgpSpec& spec) {
    nlohmann::json covs = nlohmann::json::array();
    for (const auto& c : spec.covariates) {
        nlohmann::json cj{{"name", c.name}, {"kind", to_string(c.kind)}};
        if (c.kind == CovariateKind::categorical) {
            cj["levels"] = c.levels;
        } else {
            cj["a"] = c.a;
            if (c.kind != CovariateKind::bernoulli) cj["b"] = c.b;
        }
        covs.push_back(cj);
    }
    nlohmann::json quad = nlohmann::json::array();
    for (const auto& t : spec.outcome_quadratic) quad.push_back({{"column", t.column}, {"coefficient", t.coefficient}});
    std::vector<Eigen::Index> model_cols(spec.model.columns.begin(), spec.model.columns.end());
    j = nlohmann::json{
        {"covariates", covs},
        {"design", to_string(spec.design)},
        {"n", spec.n},
        {"membership", std_vector(spec.membership)},
        {"outcome", to_string(spec.outcome)},
        {"outcome_coefficients", std_vector(spec.outcome_coefficients)},
        {"outcome_quadratic", quad},
        {"sigma", spec.sigma},
        {"eta_true", spec.eta_true},
        {"model",
         {{"coefficients", std_vector(spec.model.coefficients)},
          {"link", to_string(spec.model.link)},
          {"columns", model_cols}}},
        {"loss", LossFunction(spec.loss).name()},
    };
}

void from_json(const nlohmann::json& j, DgpSpec& spec) {
    try {
        spec = DgpSpec{};
        for (const auto& cj : j.at("covariates")) {
            CovariateSpec c;
            c.name = cj.value("name", "");
            c.kind = parse_covariate_kind(cj.at("kind").get<std::string>());
            if (c.kind == CovariateKind::categorical) {
                c.levels = cj.at("levels").get<std::vector<double>>();
            } else {
                c.a = cj.value("a", c.kind == CovariateKind::bernoulli ? 0.5 : 0.0);
                c.b = cj.value("b", 1.0);
            }
            spec.covariates.push_back(c);
        }
        spec.design = parse_design(j.value("design", "non-nested"));
        spec.n = j.value("n", Eigen::Index{1000});
        spec.membership = json_vector(j.at("membership"));
        spec.outcome = parse_outcome_type(j.value("outcome", "binary"));
        spec.outcome_coefficients = json_vector(j.at("outcome_coefficients"));
        if (j.contains("outcome_quadratic")) {
            for (const auto& t : j.at("outcome_quadratic")) {
                spec.outcome_quadratic.push_back({t.at("column").get<Eigen::Index>(), t.at("coefficient").get<double>()});
            }
        }
        spec.sigma = j.value("sigma", 1.0);
        spec.eta_true = j.value("eta_true", 0.0);
        const auto& mj = j.at("model");
        spec.model.coefficients = json_vector(mj.at("coefficients"));
        spec.model.link = parse_link(mj.value("link", spec.outcome == OutcomeType::binary ? "logit" : "identity"));
        spec.model.columns = mj.at("columns").get<std::vector<Eigen::Index>>();
        spec.loss = parse_loss_kind(j.value("loss", "brier"));
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("invalid DGP specification: ") + e.what());
    }
}

Eigen::RowVectorXd draw_covariates(const DgpSpec& spec, std::mt19937_64& rng) {
    Eigen::RowVectorXd x(spec.columns());
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    Eigen::Index col = 0;
    for (const auto& c : spec.covariates) {
        switch (c.kind) {
        case CovariateKind::uniform: x(col) = c.a + (c.b - c.a) * unit(rng); break;
        case CovariateKind::normal: x(col) = std::normal_distribution<double>(c.a, c.b)(rng); break;
        case CovariateKind::bernoulli: x(col) = unit(rng) < c.a ? 1.0 : 0.0; break;
        case CovariateKind::categorical: {
            const double u = unit(rng);
            double cum = 0.0;
            std::size_t level = c.levels.size() - 1;
            for (std::size_t k = 0; k < c.levels.size(); ++k) {
                cum += c.levels[k];
                if (u < cum) {
                    level = k;
                    break;
                }
            }
            for (Eigen::Index k = 0; k < c.width(); ++k) x(col + k) = static_cast<std::size_t>(k) + 1 == level ? 1.0 : 0.0;
            break;
        }
        }
        col += c.width();
    }
    return x;
}

SimulatedData generate(const DgpSpec& spec, std::uint64_t seed) {
    spec.validate();
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::normal_distribution<double> std_normal(0.0, 1.0);
    const Eigen::Index n = spec.n;
    Eigen::VectorXi s(n);
    Eigen::MatrixXd x(n, spec.columns());
    Eigen::VectorXd y(n);
    SimulatedData out;
    out.truth.p.resize(n);
    out.truth.mean.resize(n);
    std::vector<double> hidden;
    for (Eigen::Index i = 0; i < n; ++i) {
        x.row(i) = draw_covariates(spec, rng);
        const double p = spec.membership_probability(x.row(i));
        const double mean = spec.outcome_mean(x.row(i));
        out.truth.p(i) = p;
        out.truth.mean(i) = mean;
        s(i) = unit(rng) < p ? 1 : 0;
        double yi;
        if (spec.outcome == OutcomeType::binary) {
            const double prob = s(i) == 1 ? mean : tilted_bernoulli(mean, spec.eta_true);
            yi = unit(rng) < prob ? 1.0 : 0.0;
        } else {
            // Tilting N(m, sigma^2) by e^{eta y} shifts the mean by eta sigma^2.
            const double loc = s(i) == 1 ? mean : mean + spec.eta_true * spec.sigma * spec.sigma;
            yi = loc + spec.sigma * std_normal(rng);
        }
        if (s(i) == 1) {
            y(i) = yi;
        } else {
            y(i) = std::numeric_limits<double>::quiet_NaN();
            out.hidden.rows.push_back(i);
            hidden.push_back(yi);
        }
    }
    out.hidden.y = Eigen::Map<const Eigen::VectorXd>(hidden.data(), static_cast<Eigen::Index>(hidden.size()));
    out.table = make_table(spec.design, std::move(s), std::move(x), std::move(y), spec.column_names());
    attach_model(out.table, spec.model, spec.loss_function());
    return out;
}

double true_conditional_loss(const DgpSpec& spec, const Eigen::Ref<const Eigen::RowVectorXd>& x, double eta) {
    const double h = spec.model.predict_row(x);
    const double mean = spec.outcome_mean(x);
    if (spec.outcome == OutcomeType::binary) {
        const LossFunction loss = spec.loss_function();
        return binary_b(loss(1.0, h), loss(0.0, h), mean, eta);
    }
    const double d = mean + eta * spec.sigma * spec.sigma - h;
    switch (spec.loss) {
    case LossKind::squared: return d * d + spec.sigma * spec.sigma;
    case LossKind::absolute: return folded_normal_mean(d, spec.sigma);
    default: throw ConfigError("continuous oracle supports squared and absolute losses only");
    }
}

OracleValue true_phi_oracle(const DgpSpec& spec, double eta, std::int64_t n_mc, std::uint64_t seed) {
    spec.validate(false);
    if (n_mc < 2) throw ConfigError("oracle needs at least 2 Monte Carlo draws");
    // Ratio form E[(1-p) b] / E[1-p] with a delta-method standard error.
    double sum_w = 0.0, sum_wb = 0.0, sum_ww = 0.0, sum_wwb = 0.0, sum_wwbb = 0.0;
    for (std::int64_t start = 0, batch = 0; start < n_mc; start += kOracleBatch, ++batch) {
        auto rng = substream(seed, static_cast<std::uint64_t>(batch));
        const std::int64_t stop = std::min(n_mc, start + kOracleBatch);
        for (std::int64_t k = start; k < stop; ++k) {
            const Eigen::RowVectorXd x = draw_covariates(spec, rng);
            const double w = 1.0 - spec.membership_probability(x);
            const double b = true_conditional_loss(spec, x, eta);
            sum_w += w;
            sum_wb += w * b;
            sum_ww += w * w;
            sum_wwb += w * w * b;
            sum_wwbb += w * w * b * b;
        }
    }
    const auto m = static_cast<double>(n_mc);
    if (!(sum_w > 0.0)) throw NumericError("oracle: target population has no mass");
    OracleValue out;
    out.value = sum_wb / sum_w;
    const double r = out.value;
    const double resid_sq = (sum_wwbb - 2.0 * r * sum_wwb + r * r * sum_ww) / m;
    const double mean_w = sum_w / m;
    out.mc_se = std::sqrt(std::max(0.0, resid_sq) / m) / mean_w;
    return out;
}

OracleValue true_psi_oracle(const DgpSpec& spec, double eta, std::int64_t n_mc, std::uint64_t seed) {
    spec.validate(false);
    if (n_mc < 2) throw ConfigError("oracle needs at least 2 Monte Carlo draws");
    double sum = 0.0, sum_sq = 0.0;
    for (std::int64_t start = 0, batch = 0; start < n_mc; start += kOracleBatch, ++batch) {
        auto rng = substream(seed, static_cast<std::uint64_t>(batch));
        const std::int64_t stop = std::min(n_mc, start + kOracleBatch);
        for (std::int64_t k = start; k < stop; ++k) {
            const Eigen::RowVectorXd x = draw_covariates(spec, rng);
            const double p = spec.membership_probability(x);
            const double v = p * true_conditional_loss(spec, x, 0.0) + (1.0 - p) * true_conditional_loss(spec, x, eta);
            sum += v;
            sum_sq += v * v;
        }
    }
    const auto m = static_cast<double>(n_mc);
    OracleValue out;
    out.value = sum / m;
    out.mc_se = std::sqrt(std::max(0.0, sum_sq / m - out.value * out.value) / m);
    return out;
}

double brute_force_phi(const ObservationTable& table, const Eigen::VectorXd& g, const LossFunction& loss, double eta) {
    const Eigen::Index n0 = table.n_target();
    if (n0 == 0) throw DataError("brute-force phi needs at least one target row");
    return enumerate_target_loss_sum(table, g, loss, eta) / static_cast<double>(n0);
}

double brute_force_psi(const ObservationTable& table, const Eigen::VectorXd& g, const LossFunction& loss, double eta) {
    const double target = table.n_target() > 0 ? enumerate_target_loss_sum(table, g, loss, eta) : 0.0;
    double source = 0.0;
    for (Eigen::Index i = 0; i < table.rows(); ++i) {
        if (table.s(i) == 1) source += loss(table.y(i), table.pred(i));
    }
    return (source + target) / static_cast<double>(table.rows());
}

NuisanceRecipe dgp_recipe(const DgpSpec& spec, Misspecification miss, bool with_selection) {
    std::vector<Eigen::Index> all(static_cast<std::size_t>(spec.columns()));
    std::iota(all.begin(), all.end(), Eigen::Index{0});
    NuisanceRecipe recipe;
    recipe.outcome = spec.outcome;
    recipe.loss = spec.loss_function();
    recipe.outcome_design = miss == Misspecification::wrong_g ? DesignSpec::intercept_only() : DesignSpec::linear(all);
    recipe.membership_design = miss == Misspecification::wrong_p ? DesignSpec::intercept_only() : DesignSpec::linear(all);
    if (with_selection) recipe.selection_design = DesignSpec::linear(all);
    return recipe;
}

DgpSpec standard_binary_dgp(StudyDesign design, Eigen::Index n, double eta_true) {
    DgpSpec spec;
    spec.covariates = {
        {"x1", CovariateKind::uniform, -1.0, 1.0, {}},
        {"x2", CovariateKind::bernoulli, 0.5, 1.0, {}},
        {"x3", CovariateKind::uniform, 0.0, 1.0, {}},
    };
    spec.design = design;
    spec.n = n;
    spec.membership = (Eigen::VectorXd(4) << 0.3, -1.0, 0.5, 0.0).finished();
    spec.outcome = OutcomeType::binary;
    spec.outcome_coefficients = (Eigen::VectorXd(4) << -1.0, 1.2, -0.8, 0.5).finished();
    spec.eta_true = eta_true;
    spec.model.coefficients = (Eigen::VectorXd(3) << -0.9, 1.0, -0.6).finished();
    spec.model.link = Link::logit;
    spec.model.columns = {0, 1};
    spec.loss = LossKind::brier;
    return spec;
}

}  // namespace tiltrisk
