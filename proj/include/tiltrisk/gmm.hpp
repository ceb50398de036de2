#pragma once

#include <Eigen/Core>

#include "tiltrisk/design.hpp"
#include "tiltrisk/table.hpp"
#include "tiltrisk/tilt.hpp"

namespace tiltrisk {

struct GmmOptions {
    double tolerance = 1e-10;  // Euclidean norm of the sample moment vector
    int max_iterations = 200;
};

// Parametric selection offset a(X, theta; eta) = d(X)' theta.
struct ParametricA {
    Eigen::VectorXd theta;
    DesignBasis design;
    double eta = 0.0;
    int iterations = 0;
    double moment_norm = 0.0;

    Eigen::VectorXd predict(const Eigen::MatrixXd& covariates) const;
};

// Sample moments (1/n0) sum_i [S_i e^{a(X_i,theta)+eta q(Y_i)} - (1 - S_i)] d(X_i),
// one per design column. Zero at the true theta when the model for a is correct.
Eigen::VectorXd gmm_moments(const Eigen::MatrixXd& design_matrix, const ObservationTable& table, const Tilt& tilt,
                            const Eigen::VectorXd& theta);

// Solves the just-identified moment equations by damped Newton with a
// central-difference Jacobian. Throws NumericError carrying the final moment
// norm if it does not converge.
ParametricA fit_a_gmm(const DesignBasis& design, const ObservationTable& table, const Tilt& tilt,
                      const GmmOptions& options = {});

}  // namespace tiltrisk
