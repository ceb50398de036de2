#pragma once

// Target-population risk under the exponential tilt sensitivity model.
//
// Non-nested designs (separate source and target samples) target
//   phi(eta) = E[ b(X;eta) | S=0 ],
// nested designs (source nested in a target cohort) target
//   psi(eta) = E[ S L ] + E[ (1-S) b(X;eta) ],
// where b(X;eta) = E[L e^{eta q(Y)} | X,S=1] / E[e^{eta q(Y)} | X,S=1].
//
// The conditional-loss (cl) estimators average b-hat; the augmented (aug)
// estimators add an inverse-odds weighted residual correction that makes them
// doubly robust. aug-alt uses the selection-model offset a(X;eta) instead of
// p-hat and c-hat to build the same weights.

#include <optional>
#include <string>
#include <utility>

#include <Eigen/Core>

#include "tiltrisk/nuisance.hpp"
#include "tiltrisk/table.hpp"
#include "tiltrisk/tilt.hpp"

namespace tiltrisk {

enum class EstimatorKind { cl, aug, aug_alt };

EstimatorKind parse_estimator_kind(std::string_view name);
std::string to_string(EstimatorKind kind);

struct EstimateDiagnostics {
    Eigen::Index p_clip_count = 0;
    Eigen::Index c_clip_count = 0;
    double max_weight = 0.0;          // largest augmentation weight on a source row
    bool positivity_warning = false;  // p-hat at a clip bound on more than half the rows
    double overshoot = 0.0;           // distance outside the observed loss range, never truncated
};

struct EstimateResult {
    double eta = 0.0;
    double estimate = 0.0;
    std::optional<double> se;
    std::optional<std::pair<double, double>> ci;
    EstimatorKind kind = EstimatorKind::cl;
    StudyDesign design = StudyDesign::non_nested;
    EstimateDiagnostics diagnostics;
};

EstimateResult phi_cl(const ObservationTable& table, const NuisanceSet& nuis, const Tilt& tilt);
EstimateResult phi_aug(const ObservationTable& table, const NuisanceSet& nuis, const Tilt& tilt);
EstimateResult phi_aug_alt(const ObservationTable& table, const NuisanceSet& nuis, const Tilt& tilt);
EstimateResult psi_cl(const ObservationTable& table, const NuisanceSet& nuis, const Tilt& tilt);
EstimateResult psi_aug(const ObservationTable& table, const NuisanceSet& nuis, const Tilt& tilt);

// Dispatches on kind and the table's design. aug_alt is non-nested only.
EstimateResult estimate(EstimatorKind kind, const ObservationTable& table, const NuisanceSet& nuis, const Tilt& tilt);

// Per-row augmentation weight ((1-p)/p) e^{eta q(Y)} / c on source rows, 0 on target rows.
Eigen::VectorXd augmentation_weights(const ObservationTable& table, const NuisanceSet& nuis, const Tilt& tilt);

// Per-row weight e^{a + eta q(Y)} on source rows, 0 on target rows.
Eigen::VectorXd selection_weights(const ObservationTable& table, const NuisanceSet& nuis, const Tilt& tilt);

struct InfluenceValues {
    Eigen::VectorXd values;
    double mean = 0.0;
    double plugged = 0.0;
    double se = 0.0;  // sqrt(mean(values^2) / n)
};

InfluenceValues influence_values_nonnested(const ObservationTable& table, const NuisanceSet& nuis, const Tilt& tilt,
                                           double plugged_estimate);
InfluenceValues influence_values_nested(const ObservationTable& table, const NuisanceSet& nuis, const Tilt& tilt,
                                        double plugged_estimate);

}  // namespace tiltrisk
