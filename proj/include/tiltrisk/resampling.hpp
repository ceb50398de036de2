#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "tiltrisk/table.hpp"

namespace tiltrisk {

enum class ResampleMethod { none, bootstrap, jackknife };

ResampleMethod parse_resample_method(std::string_view name);
std::string to_string(ResampleMethod method);

struct ResampleConfig {
    ResampleMethod method = ResampleMethod::bootstrap;
    int replicates = 1000;
    std::uint64_t seed = 0;
    bool stratified = true;  // resample within S strata
    double level = 0.95;
    int threads = 1;

    void validate() const;
    // Stratified for non-nested designs, simple for nested ones.
    static ResampleConfig defaults_for(StudyDesign design, std::uint64_t seed);
};

struct IntervalEstimate {
    double estimate = 0.0;
    double se = 0.0;
    double lo = 0.0;
    double hi = 0.0;
    int failures = 0;
    int replicates = 0;
};

using ScalarEstimator = std::function<double(const ObservationTable&)>;
// Vector-valued estimators (e.g. one entry per eta); NaN marks a failed entry.
using CurveEstimator = std::function<Eigen::VectorXd(const ObservationTable&)>;

// Standard normal quantile.
double normal_quantile(double p);

// Independent generator for replicate `index`; depends only on (seed, index).
std::mt19937_64 substream(std::uint64_t seed, std::uint64_t index);

std::vector<Eigen::Index> bootstrap_indices(const ObservationTable& table, bool stratified, std::mt19937_64& rng);

// Wald interval from the bootstrap standard deviation. Throws NumericError
// when more than 20% of replicates fail.
IntervalEstimate bootstrap_ci(const ObservationTable& table, const ScalarEstimator& estimator,
                              const ResampleConfig& config);

// Per-entry version; entries with more than 20% failed replicates get NaN se
// and interval instead of throwing.
std::vector<IntervalEstimate> bootstrap_curve(const ObservationTable& table, const CurveEstimator& estimator,
                                              const ResampleConfig& config);

// Leave-one-out jackknife. Throws naming the row whose deletion failed.
IntervalEstimate jackknife_ci(const ObservationTable& table, const ScalarEstimator& estimator, double level = 0.95);

std::vector<IntervalEstimate> jackknife_curve(const ObservationTable& table, const CurveEstimator& estimator,
                                              double level = 0.95, int threads = 1);

}  // namespace tiltrisk
