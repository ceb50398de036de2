#include "tiltrisk/wls.hpp"

#include <sstream>

#include <Eigen/QR>

#include "tiltrisk/error.hpp"
#include "tiltrisk/glm.hpp"

namespace tiltrisk {

Eigen::VectorXd WlsFit::predict(const Eigen::MatrixXd& covariates) const {
    return design.matrix(covariates) * coefficients;
}

ClippedValues WlsFit::predict_floored(const Eigen::MatrixXd& covariates, double floor) const {
    ClippedValues out{predict(covariates), 0};
    for (Eigen::Index i = 0; i < out.values.size(); ++i) {
        if (!(out.values(i) >= floor)) {
            out.values(i) = floor;
            ++out.clipped;
        }
    }
    return out;
}

WlsFit fit_weighted_ls(const DesignBasis& design, const Eigen::MatrixXd& covariates, const Eigen::VectorXd& target,
                       const Eigen::VectorXd& weights) {
    const Eigen::MatrixXd x = design.matrix(covariates);
    if (x.rows() != target.size() || x.rows() != weights.size()) {
        throw DataError("weighted least squares: design, target and weights disagree on row count");
    }
    if (x.rows() < x.cols()) {
        std::ostringstream msg;
        msg << "weighted least squares needs at least as many rows as columns (" << x.rows() << " < " << x.cols()
            << ")";
        throw DataError(msg.str());
    }
    if (!target.allFinite()) throw DataError("weighted least squares: non-finite target");
    for (Eigen::Index i = 0; i < weights.size(); ++i) {
        if (!(weights(i) > 0.0) || !std::isfinite(weights(i))) {
            throw NumericError("weighted least squares: weights must be positive and finite");
        }
    }
    require_full_rank(x, design.column_names());

    const Eigen::ArrayXd root = (weights / weights.maxCoeff()).array().sqrt();
    const Eigen::MatrixXd xs = x.array().colwise() * root;
    const Eigen::VectorXd ys = (target.array() * root).matrix();
    const auto qr = xs.colPivHouseholderQr();
    Eigen::VectorXd beta = qr.solve(ys);
    // one round of iterative refinement on the normal equations
    const Eigen::VectorXd resid = ys - xs * beta;
    beta += qr.solve(resid);

    WlsFit fit;
    fit.coefficients = beta;
    fit.weights = weights;
    fit.design = design;
    return fit;
}

WlsFit fit_b_continuous(const DesignBasis& design, const Eigen::MatrixXd& source_covariates,
                        const Eigen::VectorXd& losses, const Tilt& tilt, const Eigen::VectorXd& outcomes) {
    if (losses.size() != outcomes.size()) throw DataError("fit_b_continuous: losses and outcomes disagree in length");
    Eigen::VectorXd w(outcomes.size());
    for (Eigen::Index i = 0; i < w.size(); ++i) w(i) = tilt_weight(outcomes(i), tilt);
    return fit_weighted_ls(design, source_covariates, losses, w);
}

WlsFit fit_c_continuous(const DesignBasis& design, const Eigen::MatrixXd& source_covariates, const Tilt& tilt,
                        const Eigen::VectorXd& outcomes) {
    Eigen::VectorXd target(outcomes.size());
    for (Eigen::Index i = 0; i < target.size(); ++i) target(i) = tilt_weight(outcomes(i), tilt);
    return fit_weighted_ls(design, source_covariates, target, Eigen::VectorXd::Ones(outcomes.size()));
}

}  // namespace tiltrisk
