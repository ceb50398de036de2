#include "tiltrisk/curve.hpp"

#include <cmath>
#include <limits>

#include "tiltrisk/error.hpp"

namespace tiltrisk {

namespace {

bool same(const std::optional<double>& a, const std::optional<double>& b) {
    if (a.has_value() != b.has_value()) return false;
    if (!a) return true;
    return *a == *b || (std::isnan(*a) && std::isnan(*b));
}

bool same(double a, double b) { return a == b || (std::isnan(a) && std::isnan(b)); }

}  // namespace

std::string to_string(PointStatus status) {
    switch (status) {
    case PointStatus::ok: return "ok";
    case PointStatus::failed: return "failed";
    case PointStatus::ci_failed: return "ci_failed";
    }
    return "unknown";
}

PointStatus parse_point_status(std::string_view name) {
    if (name == "ok") return PointStatus::ok;
    if (name == "failed") return PointStatus::failed;
    if (name == "ci_failed") return PointStatus::ci_failed;
    throw DataError("unknown curve point status '" + std::string(name) + "'");
}

Eigen::Index SensitivityCurve::failed_points() const {
    Eigen::Index count = 0;
    for (const auto& p : points) count += p.status != PointStatus::ok;
    return count;
}

Eigen::VectorXd curve_estimates(const FittedNuisance& fitted, EstimatorKind kind, const std::vector<double>& grid) {
    Eigen::VectorXd out(static_cast<Eigen::Index>(grid.size()));
    for (std::size_t k = 0; k < grid.size(); ++k) {
        try {
            const NuisanceSet nuis = fitted.at(grid[k]);
            out(static_cast<Eigen::Index>(k)) = estimate(kind, fitted.table(), nuis, fitted.tilt(grid[k])).estimate;
        } catch (const Error&) {
            out(static_cast<Eigen::Index>(k)) = std::numeric_limits<double>::quiet_NaN();
        }
    }
    return out;
}

SensitivityCurve sensitivity_curve(const ObservationTable& table, const NuisanceRecipe& recipe,
                                   const std::vector<double>& grid, const CurveConfig& config) {
    if (grid.empty()) throw ConfigError("eta grid is empty");
    for (std::size_t k = 0; k < grid.size(); ++k) {
        if (!std::isfinite(grid[k])) throw ConfigError("eta grid values must be finite");
        if (k > 0 && !(grid[k - 1] < grid[k])) throw ConfigError("eta grid must be strictly increasing");
    }
    if (config.estimator == EstimatorKind::aug_alt && !recipe.selection_design) {
        throw ConfigError("the aug-alt estimator needs a selection-model design");
    }
    if (config.resample.method != ResampleMethod::none) config.resample.validate();

    const FittedNuisance fitted = FittedNuisance::fit(table, recipe);
    SensitivityCurve curve;
    curve.estimator = config.estimator;
    curve.design = table.design;
    curve.resample = config.resample.method;
    curve.seed = config.resample.seed;
    curve.g_diagnostics = fitted.g_diagnostics();
    curve.p_diagnostics = fitted.p_diagnostics();
    curve.p_clip_count = fitted.p_clip_count();

    for (const double eta : grid) {
        CurvePoint point;
        point.eta = eta;
        try {
            const NuisanceSet nuis = fitted.at(eta);
            point.result = estimate(config.estimator, fitted.table(), nuis, fitted.tilt(eta));
        } catch (const Error& e) {
            point.status = PointStatus::failed;
            point.message = e.what();
            point.result.eta = eta;
            point.result.kind = config.estimator;
            point.result.design = table.design;
            point.result.estimate = std::numeric_limits<double>::quiet_NaN();
        }
        curve.points.push_back(std::move(point));
    }

    if (config.resample.method == ResampleMethod::none) return curve;

    const CurveEstimator replicate = [&](const ObservationTable& t) {
        return curve_estimates(FittedNuisance::fit(t, recipe), config.estimator, grid);
    };
    std::vector<IntervalEstimate> intervals;
    std::string failure;
    if (config.resample.method == ResampleMethod::bootstrap) {
        intervals = bootstrap_curve(table, replicate, config.resample);
        curve.replicates = config.resample.replicates;
    } else {
        curve.replicates = static_cast<int>(table.rows());
        try {
            intervals = jackknife_curve(table, replicate, config.resample.level, config.resample.threads);
        } catch (const Error& e) {
            failure = e.what();
        }
    }

    for (std::size_t k = 0; k < curve.points.size(); ++k) {
        CurvePoint& point = curve.points[k];
        if (point.status == PointStatus::failed) continue;
        if (!failure.empty()) {
            point.status = PointStatus::ci_failed;
            point.message = failure;
            continue;
        }
        const IntervalEstimate& iv = intervals[k];
        point.resample_failures = iv.failures;
        if (!std::isfinite(iv.se)) {
            point.status = PointStatus::ci_failed;
            point.message = std::to_string(iv.failures) + " of " + std::to_string(iv.replicates) +
                            " resampled estimates failed";
            continue;
        }
        point.result.se = iv.se;
        point.result.ci = std::make_pair(iv.lo, iv.hi);
    }
    return curve;
}

bool CurveRow::operator==(const CurveRow& other) const {
    return same(eta, other.eta) && same(estimate, other.estimate) && same(se, other.se) && same(ci_lo, other.ci_lo) &&
           same(ci_hi, other.ci_hi) && same(max_weight, other.max_weight) && clip_count == other.clip_count &&
           status == other.status;
}

std::vector<CurveRow> curve_rows(const SensitivityCurve& curve) {
    std::vector<CurveRow> rows;
    rows.reserve(curve.points.size());
    for (const auto& p : curve.points) {
        CurveRow row;
        row.eta = p.eta;
        row.estimate = p.result.estimate;
        row.se = p.result.se;
        if (p.result.ci) {
            row.ci_lo = p.result.ci->first;
            row.ci_hi = p.result.ci->second;
        }
        row.max_weight = p.result.diagnostics.max_weight;
        row.clip_count = p.result.diagnostics.p_clip_count + p.result.diagnostics.c_clip_count;
        row.status = p.status;
        rows.push_back(row);
    }
    return rows;
}

}  // namespace tiltrisk
