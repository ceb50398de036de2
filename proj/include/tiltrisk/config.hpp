#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "json.hpp"
#include "tiltrisk/design.hpp"
#include "tiltrisk/estimators.hpp"
#include "tiltrisk/loss.hpp"
#include "tiltrisk/nuisance.hpp"
#include "tiltrisk/resampling.hpp"
#include "tiltrisk/table.hpp"

namespace tiltrisk {

inline constexpr int kFormatVersion = 1;

// Basis for one nuisance regression. Empty `columns` means every analysis
// covariate; for spline bases empty `spline_columns` means every column.
struct BasisConfig {
    BasisKind basis = BasisKind::linear;
    std::vector<std::string> columns;
    std::vector<std::string> spline_columns;
    int degree = 3;
    int knots = 2;
    bool intercept_only = false;
};

struct ModelConfig {
    std::vector<std::string> covariates;  // X*, a subset of the analysis covariates
    std::optional<Eigen::VectorXd> coefficients;
    std::optional<double> fit_split;  // fraction of source rows used to fit h
    Link link = Link::logit;
};

struct AnchorConfig {
    std::optional<double> prevalence;  // empty: outcome mean among source rows
    double lower_multiplier = 0.5;
    double upper_multiplier = 2.0;
    double step = 0.05;
};

// Exactly one of an explicit grid or a prevalence anchor.
struct GridConfig {
    std::vector<double> values;
    std::optional<AnchorConfig> anchor;
};

struct StabilityConfig {
    bool jackknife = false;
    std::optional<BasisConfig> spline;  // replaces the g and p bases
};

struct AnalysisConfig {
    std::filesystem::path base_dir;  // relative paths resolve against this
    std::filesystem::path data;
    StudyDesign design = StudyDesign::non_nested;
    OutcomeType outcome = OutcomeType::binary;
    LossKind loss = LossKind::brier;
    std::vector<std::string> covariates;
    ModelConfig model;
    BasisConfig outcome_basis;
    BasisConfig membership_basis;
    std::optional<BasisConfig> selection_basis;
    GridConfig eta;
    EstimatorKind estimator = EstimatorKind::aug;
    ResampleConfig resample;
    std::optional<std::uint64_t> seed;
    std::filesystem::path curve_path;
    std::filesystem::path report_path;
    StabilityConfig stability;

    // Throws ConfigError on inconsistent settings, including a missing seed
    // when a stochastic step (bootstrap, fit split) is requested.
    void validate() const;
    bool stochastic() const;
    std::filesystem::path resolve(const std::filesystem::path& p) const;
};

AnalysisConfig config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
nlohmann::json config_to_json(const AnalysisConfig& config);
AnalysisConfig load_config(const std::filesystem::path& path);

// Maps a basis config onto column indices of the analysis covariates.
DesignSpec design_from_basis(const BasisConfig& basis, const std::vector<std::string>& covariates);

NuisanceRecipe recipe_from_config(const AnalysisConfig& config);

}  // namespace tiltrisk
