#pragma once

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "tiltrisk/design.hpp"

namespace tiltrisk {

struct IrlsOptions {
    double tolerance = 1e-8;  // max absolute coefficient change
    int max_iterations = 100;
    double ridge = 1e-4;              // penalty used after separation
    double separation_bound = 1e-10;  // fitted probabilities beyond this flag separation
};

struct LogisticSolution {
    Eigen::VectorXd coefficients;
    bool converged = false;
    int iterations = 0;
    bool ridge = false;
};

// Weighted logistic regression by iteratively reweighted least squares on a
// ready-made design matrix. Detected separation triggers a ridge refit; the
// returned solution then has converged=false and ridge=true.
LogisticSolution irls_logistic(const Eigen::MatrixXd& design, const Eigen::VectorXd& targets,
                               const Eigen::VectorXd& weights, const std::vector<std::string>& column_names,
                               const IrlsOptions& options = {});

// Throws DataError naming the columns that are linear combinations of others.
void require_full_rank(const Eigen::MatrixXd& design, const std::vector<std::string>& column_names);

inline constexpr double kGlmPredictionClip = 1e-8;

struct GlmFit {
    Eigen::VectorXd coefficients;
    bool converged = false;
    int iterations = 0;
    bool ridge_fallback = false;
    DesignBasis design;

    // Probabilities clipped to [1e-8, 1 - 1e-8].
    Eigen::VectorXd predict(const Eigen::MatrixXd& covariates) const;
    Eigen::VectorXd linear_predictor(const Eigen::MatrixXd& covariates) const;
};

GlmFit fit_logistic(const DesignBasis& design, const Eigen::MatrixXd& covariates, const Eigen::VectorXd& targets,
                    const std::optional<Eigen::VectorXd>& case_weights = std::nullopt,
                    const IrlsOptions& options = {});

// Binds spline knots on the fitting covariates themselves.
GlmFit fit_logistic(const DesignSpec& design, const Eigen::MatrixXd& covariates, const Eigen::VectorXd& targets,
                    const std::optional<Eigen::VectorXd>& case_weights = std::nullopt,
                    const IrlsOptions& options = {});

}  // namespace tiltrisk
