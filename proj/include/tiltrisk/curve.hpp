#pragma once

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "tiltrisk/estimators.hpp"
#include "tiltrisk/nuisance.hpp"
#include "tiltrisk/resampling.hpp"

namespace tiltrisk {

struct CurveConfig {
    EstimatorKind estimator = EstimatorKind::aug;
    // method none leaves se and ci empty
    ResampleConfig resample;
};

enum class PointStatus { ok, failed, ci_failed };

std::string to_string(PointStatus status);
PointStatus parse_point_status(std::string_view name);

struct CurvePoint {
    double eta = 0.0;
    EstimateResult result;
    PointStatus status = PointStatus::ok;
    std::string message;
    int resample_failures = 0;
};

struct SensitivityCurve {
    std::vector<CurvePoint> points;
    EstimatorKind estimator = EstimatorKind::cl;
    StudyDesign design = StudyDesign::non_nested;
    ResampleMethod resample = ResampleMethod::none;
    int replicates = 0;
    std::uint64_t seed = 0;
    FitDiagnostics g_diagnostics;
    FitDiagnostics p_diagnostics;
    Eigen::Index p_clip_count = 0;

    Eigen::Index failed_points() const;
};

// Point estimates at every eta from one nuisance fit; NaN where the
// estimator fails.
Eigen::VectorXd curve_estimates(const FittedNuisance& fitted, EstimatorKind kind, const std::vector<double>& grid);

// Fits g and p once, refreshes b, c (and a) per eta, and attaches resampled
// intervals. Nuisances are refit inside every bootstrap or jackknife
// replicate. A failing grid point is marked and the sweep continues.
SensitivityCurve sensitivity_curve(const ObservationTable& table, const NuisanceRecipe& recipe,
                                   const std::vector<double>& grid, const CurveConfig& config);

// One CSV row of a curve.
struct CurveRow {
    double eta = 0.0;
    double estimate = 0.0;
    std::optional<double> se;
    std::optional<double> ci_lo;
    std::optional<double> ci_hi;
    double max_weight = 0.0;
    Eigen::Index clip_count = 0;
    PointStatus status = PointStatus::ok;

    bool operator==(const CurveRow& other) const;
};

std::vector<CurveRow> curve_rows(const SensitivityCurve& curve);

}  // namespace tiltrisk
