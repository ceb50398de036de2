#pragma once

#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "tiltrisk/config.hpp"
#include "tiltrisk/curve.hpp"
#include "tiltrisk/eta_select.hpp"
#include "tiltrisk/io.hpp"

namespace tiltrisk {

std::string library_version();

struct PreparedData {
    LoadedTable loaded;
    PredictionModel model;
    bool model_fitted = false;     // h was fit on a split of the source rows
    Eigen::Index fit_rows = 0;     // source rows used to fit h
};

// Loads the CSV and attaches h, fitting it on a random split of the source
// rows when fit_split is configured (those rows are then dropped).
PreparedData prepare_data(const AnalysisConfig& config);
PreparedData prepare_data(const AnalysisConfig& config, LoadedTable loaded);

struct AnchoredGrid {
    double anchor_prevalence = 0.0;
    bool prevalence_from_source = false;
    EtaRange range;
};

AnchoredGrid anchored_grid(const ObservationTable& table, const NuisanceRecipe& recipe, const AnchorConfig& anchor);

struct AnalysisOutput {
    PreparedData data;
    std::vector<double> grid;
    std::optional<AnchoredGrid> anchor;
    SensitivityCurve curve;
    std::optional<SensitivityCurve> jackknife;
    std::optional<SensitivityCurve> spline;
    nlohmann::json report;

    bool any_failed() const;
};

AnalysisOutput run_analysis(const AnalysisConfig& config);
AnalysisOutput run_analysis(const AnalysisConfig& config, LoadedTable loaded);

// Writes the curve CSV (plus _jackknife and _spline variants) and the JSON
// report to the configured paths.
void write_outputs(const AnalysisConfig& config, const AnalysisOutput& output);

std::string report_text(const nlohmann::json& report);

}  // namespace tiltrisk
