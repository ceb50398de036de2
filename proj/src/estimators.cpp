#include "tiltrisk/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "tiltrisk/error.hpp"

namespace tiltrisk {

EstimatorKind parse_estimator_kind(std::string_view name) {
    if (name == "cl") return EstimatorKind::cl;
    if (name == "aug") return EstimatorKind::aug;
    if (name == "aug-alt" || name == "aug_alt") return EstimatorKind::aug_alt;
    throw ConfigError("unknown estimator '" + std::string(name) + "' (expected cl, aug, aug-alt)");
}

std::string to_string(EstimatorKind kind) {
    switch (kind) {
    case EstimatorKind::cl: return "cl";
    case EstimatorKind::aug: return "aug";
    case EstimatorKind::aug_alt: return "aug-alt";
    }
    return "unknown";
}

namespace {

void require_design(const ObservationTable& table, StudyDesign design, const char* op) {
    if (table.design != design) {
        throw ConfigError(std::string(op) + " requires a " + to_string(design) + " table");
    }
    if (!table.has_model()) throw ConfigError(std::string(op) + " requires predictions attached to the table");
}

void require_sizes(const ObservationTable& table, const NuisanceSet& nuis, bool need_p, bool need_a) {
    const Eigen::Index n = table.rows();
    if (nuis.b.size() != n) throw DataError("nuisance b must have one value per table row");
    if (need_p && (nuis.p.size() != n || nuis.c.size() != n)) {
        throw DataError("nuisances p and c must have one value per table row");
    }
    if (need_a && (!nuis.a || nuis.a->size() != n)) {
        throw DataError("nuisance a must be available with one value per table row");
    }
}

EstimateDiagnostics base_diagnostics(const ObservationTable& table, const NuisanceSet& nuis) {
    EstimateDiagnostics d;
    d.p_clip_count = nuis.p_clip_count;
    d.c_clip_count = nuis.c_clip_count;
    d.positivity_warning = 2 * nuis.p_clip_count > table.rows();
    return d;
}

// Distance of an augmented estimate outside the range spanned by the source
// losses and the target-row b-hat values.
double overshoot(const ObservationTable& table, const NuisanceSet& nuis, double value) {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (Eigen::Index i = 0; i < table.rows(); ++i) {
        const double v = table.s(i) == 1 ? table.loss(i) : nuis.b(i);
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    return std::max({0.0, lo - value, value - hi});
}

EstimateResult make_result(double eta, double value, EstimatorKind kind, StudyDesign design,
                           EstimateDiagnostics diag) {
    EstimateResult r;
    r.eta = eta;
    r.estimate = value;
    r.kind = kind;
    r.design = design;
    r.diagnostics = diag;
    return r;
}

}  // namespace

Eigen::VectorXd augmentation_weights(const ObservationTable& table, const NuisanceSet& nuis, const Tilt& tilt) {
    Eigen::VectorXd w = Eigen::VectorXd::Zero(table.rows());
    for (Eigen::Index i = 0; i < table.rows(); ++i) {
        if (table.s(i) != 1) continue;
        const double p = nuis.p(i);
        if (!(p > 0.0 && p <= 1.0)) throw NumericError("membership probability must lie in (0,1]");
        if (!(nuis.c(i) > 0.0)) throw NumericError("tilted normalizer c must be positive");
        const double odds = (1.0 - p) / p;
        w(i) = odds == 0.0 ? 0.0 : odds * std::exp(tilt.exponent(table.y(i)) - std::log(nuis.c(i)));
    }
    if (!w.allFinite()) throw NumericError("augmentation weight overflow");
    return w;
}

Eigen::VectorXd selection_weights(const ObservationTable& table, const NuisanceSet& nuis, const Tilt& tilt) {
    Eigen::VectorXd w = Eigen::VectorXd::Zero(table.rows());
    for (Eigen::Index i = 0; i < table.rows(); ++i) {
        if (table.s(i) == 1) w(i) = std::exp((*nuis.a)(i) + tilt.exponent(table.y(i)));
    }
    if (!w.allFinite()) throw NumericError("selection weight overflow");
    return w;
}

EstimateResult phi_cl(const ObservationTable& table, const NuisanceSet& nuis, const Tilt& tilt) {
    require_design(table, StudyDesign::non_nested, "phi_cl");
    require_sizes(table, nuis, false, false);
    const Eigen::Index n0 = table.n_target();
    if (n0 == 0) throw DataError("phi_cl needs at least one target row");
    double sum = 0.0;
    for (Eigen::Index i = 0; i < table.rows(); ++i) {
        if (table.s(i) == 0) sum += nuis.b(i);
    }
    auto diag = base_diagnostics(table, nuis);
    return make_result(tilt.eta, sum / static_cast<double>(n0), EstimatorKind::cl, table.design, diag);
}

EstimateResult phi_aug(const ObservationTable& table, const NuisanceSet& nuis, const Tilt& tilt) {
    require_design(table, StudyDesign::non_nested, "phi_aug");
    require_sizes(table, nuis, true, false);
    const Eigen::Index n0 = table.n_target();
    if (n0 == 0) throw DataError("phi_aug needs at least one target row");
    const Eigen::VectorXd w = augmentation_weights(table, nuis, tilt);
    double sum = 0.0;
    for (Eigen::Index i = 0; i < table.rows(); ++i) {
        sum += table.s(i) == 0 ? nuis.b(i) : w(i) * (table.loss(i) - nuis.b(i));
    }
    const double value = sum / static_cast<double>(n0);
    auto diag = base_diagnostics(table, nuis);
    diag.max_weight = w.maxCoeff();
    diag.overshoot = overshoot(table, nuis, value);
    return make_result(tilt.eta, value, EstimatorKind::aug, table.design, diag);
}

EstimateResult phi_aug_alt(const ObservationTable& table, const NuisanceSet& nuis, const Tilt& tilt) {
    require_design(table, StudyDesign::non_nested, "phi_aug_alt");
    require_sizes(table, nuis, false, true);
    const Eigen::Index n0 = table.n_target();
    if (n0 == 0) throw DataError("phi_aug_alt needs at least one target row");
    const Eigen::VectorXd w = selection_weights(table, nuis, tilt);
    double sum = 0.0;
    for (Eigen::Index i = 0; i < table.rows(); ++i) {
        sum += table.s(i) == 0 ? nuis.b(i) : w(i) * (table.loss(i) - nuis.b(i));
    }
    const double value = sum / static_cast<double>(n0);
    auto diag = base_diagnostics(table, nuis);
    diag.max_weight = w.maxCoeff();
    diag.overshoot = overshoot(table, nuis, value);
    return make_result(tilt.eta, value, EstimatorKind::aug_alt, table.design, diag);
}

EstimateResult psi_cl(const ObservationTable& table, const NuisanceSet& nuis, const Tilt& tilt) {
    require_design(table, StudyDesign::nested, "psi_cl");
    require_sizes(table, nuis, false, false);
    double sum = 0.0;
    for (Eigen::Index i = 0; i < table.rows(); ++i) {
        sum += table.s(i) == 1 ? table.loss(i) : nuis.b(i);
    }
    auto diag = base_diagnostics(table, nuis);
    return make_result(tilt.eta, sum / static_cast<double>(table.rows()), EstimatorKind::cl, table.design, diag);
}

EstimateResult psi_aug(const ObservationTable& table, const NuisanceSet& nuis, const Tilt& tilt) {
    require_design(table, StudyDesign::nested, "psi_aug");
    require_sizes(table, nuis, true, false);
    const Eigen::VectorXd w = augmentation_weights(table, nuis, tilt);
    double sum = 0.0;
    for (Eigen::Index i = 0; i < table.rows(); ++i) {
        sum += table.s(i) == 1 ? table.loss(i) + w(i) * (table.loss(i) - nuis.b(i)) : nuis.b(i);
    }
    const double value = sum / static_cast<double>(table.rows());
    auto diag = base_diagnostics(table, nuis);
    diag.max_weight = w.maxCoeff();
    diag.overshoot = overshoot(table, nuis, value);
    return make_result(tilt.eta, value, EstimatorKind::aug, table.design, diag);
}

EstimateResult estimate(EstimatorKind kind, const ObservationTable& table, const NuisanceSet& nuis,
                        const Tilt& tilt) {
    if (table.design == StudyDesign::nested) {
        switch (kind) {
        case EstimatorKind::cl: return psi_cl(table, nuis, tilt);
        case EstimatorKind::aug: return psi_aug(table, nuis, tilt);
        case EstimatorKind::aug_alt: throw ConfigError("the aug-alt estimator is only defined for non-nested designs");
        }
    }
    switch (kind) {
    case EstimatorKind::cl: return phi_cl(table, nuis, tilt);
    case EstimatorKind::aug: return phi_aug(table, nuis, tilt);
    case EstimatorKind::aug_alt: return phi_aug_alt(table, nuis, tilt);
    }
    throw ConfigError("unknown estimator kind");
}

InfluenceValues influence_values_nonnested(const ObservationTable& table, const NuisanceSet& nuis, const Tilt& tilt,
                                           double plugged_estimate) {
    require_design(table, StudyDesign::non_nested, "influence_values_nonnested");
    require_sizes(table, nuis, true, false);
    const Eigen::Index n = table.rows();
    const Eigen::Index n0 = table.n_target();
    if (n0 == 0) throw DataError("influence values need at least one target row");
    const Eigen::VectorXd w = augmentation_weights(table, nuis, tilt);
    const double scale = static_cast<double>(n) / static_cast<double>(n0);
    InfluenceValues out;
    out.plugged = plugged_estimate;
    out.values.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double term = table.s(i) == 0 ? nuis.b(i) - plugged_estimate : w(i) * (table.loss(i) - nuis.b(i));
        out.values(i) = scale * term;
    }
    out.mean = out.values.mean();
    out.se = std::sqrt(out.values.squaredNorm() / static_cast<double>(n) / static_cast<double>(n));
    return out;
}

InfluenceValues influence_values_nested(const ObservationTable& table, const NuisanceSet& nuis, const Tilt& tilt,
                                        double plugged_estimate) {
    require_design(table, StudyDesign::nested, "influence_values_nested");
    require_sizes(table, nuis, true, false);
    const Eigen::Index n = table.rows();
    const Eigen::VectorXd w = augmentation_weights(table, nuis, tilt);
    InfluenceValues out;
    out.plugged = plugged_estimate;
    out.values.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double term =
            table.s(i) == 1 ? table.loss(i) + w(i) * (table.loss(i) - nuis.b(i)) : nuis.b(i);
        out.values(i) = term - plugged_estimate;
    }
    out.mean = out.values.mean();
    out.se = std::sqrt(out.values.squaredNorm() / static_cast<double>(n) / static_cast<double>(n));
    return out;
}

}  // namespace tiltrisk
