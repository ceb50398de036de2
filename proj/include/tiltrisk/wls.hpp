#pragma once

#include <Eigen/Core>

#include "tiltrisk/design.hpp"
#include "tiltrisk/tilt.hpp"

namespace tiltrisk {

struct ClippedValues {
    Eigen::VectorXd values;
    Eigen::Index clipped = 0;
};

struct WlsFit {
    Eigen::VectorXd coefficients;
    Eigen::VectorXd weights;
    DesignBasis design;

    Eigen::VectorXd predict(const Eigen::MatrixXd& covariates) const;
    ClippedValues predict_floored(const Eigen::MatrixXd& covariates, double floor) const;
};

// Weighted least squares of target on the design. Weights must be positive;
// they are rescaled by their maximum before solving, which leaves the
// solution unchanged.
WlsFit fit_weighted_ls(const DesignBasis& design, const Eigen::MatrixXd& covariates, const Eigen::VectorXd& target,
                       const Eigen::VectorXd& weights);

// b(X;eta) for continuous outcomes: regression of the losses on the design
// with weights e^{eta q(Y)}, over source rows.
WlsFit fit_b_continuous(const DesignBasis& design, const Eigen::MatrixXd& source_covariates,
                        const Eigen::VectorXd& losses, const Tilt& tilt, const Eigen::VectorXd& outcomes);

inline constexpr double kNormalizerFloor = 1e-6;

// c(X;eta) for continuous outcomes: least squares of e^{eta q(Y)} on the
// design. Predict with predict_floored(.., kNormalizerFloor).
WlsFit fit_c_continuous(const DesignBasis& design, const Eigen::MatrixXd& source_covariates, const Tilt& tilt,
                        const Eigen::VectorXd& outcomes);

}  // namespace tiltrisk
