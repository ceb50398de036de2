#pragma once

// Anchoring the sensitivity parameter to a hypothesized outcome prevalence.
//
// For binary Y with identity q, the prevalence implied in the target sample by
// a given eta is the average tilted probability over target rows (non-nested)
// or the cohort mixture p g + (1-p) tilted(g, eta) (nested). Both maps are
// strictly increasing in eta whenever some g lies in (0,1), so each
// prevalence has a unique eta, found by bracketed bisection.

#include <vector>

#include <Eigen/Core>

#include "tiltrisk/table.hpp"

namespace tiltrisk {

struct PrevalenceAnchor {
    double prevalence = 0.0;  // mu (non-nested) or alpha (nested)
    double lower_multiplier = 0.5;
    double upper_multiplier = 2.0;

    void validate() const;
};

struct RootOptions {
    double function_tolerance = 1e-10;
    double initial_half_width = 1.0;
    double max_abs_eta = 50.0;
    int max_iterations = 400;
};

struct AttainableRange {
    double lo = 0.0;  // infimum as eta -> -inf
    double hi = 1.0;  // supremum as eta -> +inf
};

double implied_prevalence_nonnested(const ObservationTable& table, const Eigen::VectorXd& g, double eta);
double implied_prevalence_nested(const ObservationTable& table, const Eigen::VectorXd& g, const Eigen::VectorXd& p,
                                 double eta);

AttainableRange attainable_nonnested(const ObservationTable& table, const Eigen::VectorXd& g);
AttainableRange attainable_nested(const ObservationTable& table, const Eigen::VectorXd& g, const Eigen::VectorXd& p);

// g and p hold one value per table row.
double eta_from_prevalence_nonnested(const ObservationTable& table, const Eigen::VectorXd& g, double mu,
                                     const RootOptions& options = {});
double eta_from_prevalence_nested(const ObservationTable& table, const Eigen::VectorXd& g, const Eigen::VectorXd& p,
                                  double alpha, const RootOptions& options = {});

// Inclusive grid from lo to hi, endpoints rounded outward to multiples of step.
std::vector<double> eta_lattice(double lo, double hi, double step);

struct EtaRange {
    double prevalence_lo = 0.0;
    double prevalence_hi = 0.0;
    double eta_lo = 0.0;
    double eta_hi = 0.0;
    std::vector<double> grid;
};

// Solves for eta at anchor * {lower, upper} multipliers (clamped into (0,1))
// and returns the lattice between them. p is used only for nested tables.
EtaRange eta_grid_from_prevalence_range(const ObservationTable& table, const Eigen::VectorXd& g,
                                        const Eigen::VectorXd& p, const PrevalenceAnchor& anchor, double step);

}  // namespace tiltrisk
