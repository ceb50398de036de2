#include "tiltrisk/glm.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <Eigen/Cholesky>
#include <Eigen/QR>

#include "tiltrisk/error.hpp"

namespace tiltrisk {

namespace {

double softplus(double z) { return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

double sigmoid(double z) {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

// Columns that are identically one are treated as intercepts and left unpenalized.
Eigen::VectorXd penalty_mask(const Eigen::MatrixXd& design) {
    Eigen::VectorXd mask = Eigen::VectorXd::Ones(design.cols());
    for (Eigen::Index j = 0; j < design.cols(); ++j) {
        if ((design.col(j).array() == 1.0).all()) mask(j) = 0.0;
    }
    return mask;
}

double penalized_loglik(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const Eigen::VectorXd& w,
                        const Eigen::VectorXd& beta, double lambda, const Eigen::VectorXd& mask) {
    const Eigen::VectorXd eta = x * beta;
    double ll = 0.0;
    for (Eigen::Index i = 0; i < eta.size(); ++i) ll += w(i) * (y(i) * eta(i) - softplus(eta(i)));
    return ll - 0.5 * lambda * (mask.array() * beta.array().square()).sum();
}

struct IrlsRun {
    Eigen::VectorXd beta;
    bool converged = false;
    bool separated = false;
    int iterations = 0;
};

IrlsRun run_irls(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const Eigen::VectorXd& w, double lambda,
                 const IrlsOptions& options) {
    const Eigen::VectorXd mask = penalty_mask(x);
    IrlsRun run;
    run.beta = Eigen::VectorXd::Zero(x.cols());
    int diverging = 0;
    double ll = penalized_loglik(x, y, w, run.beta, lambda, mask);
    for (int it = 1; it <= options.max_iterations; ++it) {
        run.iterations = it;
        const Eigen::VectorXd eta = x * run.beta;
        Eigen::VectorXd p(eta.size());
        for (Eigen::Index i = 0; i < eta.size(); ++i) p(i) = sigmoid(eta(i));
        const Eigen::VectorXd curvature = (w.array() * p.array() * (1.0 - p.array())).matrix();
        Eigen::VectorXd grad = x.transpose() * (w.array() * (y - p).array()).matrix();
        grad -= lambda * (mask.array() * run.beta.array()).matrix();
        Eigen::MatrixXd hess = x.transpose() * curvature.asDiagonal() * x;
        hess.diagonal() += lambda * mask;

        Eigen::VectorXd step;
        Eigen::LDLT<Eigen::MatrixXd> ldlt(hess);
        if (ldlt.info() == Eigen::Success && ldlt.isPositive()) {
            step = ldlt.solve(grad);
        } else {
            step = hess.colPivHouseholderQr().solve(grad);
        }
        if (!step.allFinite()) break;

        // Step halving keeps the penalized log-likelihood nondecreasing.
        double t = 1.0;
        Eigen::VectorXd candidate = run.beta + step;
        double ll_new = penalized_loglik(x, y, w, candidate, lambda, mask);
        for (int h = 0; h < 30 && !(ll_new >= ll - 1e-12 * std::abs(ll)); ++h) {
            t *= 0.5;
            candidate = run.beta + t * step;
            ll_new = penalized_loglik(x, y, w, candidate, lambda, mask);
        }
        const double change = (t * step).cwiseAbs().maxCoeff();
        const double old_norm = run.beta.norm();
        run.beta = candidate;
        ll = ll_new;
        if (change < options.tolerance) {
            run.converged = true;
            break;
        }

        if (lambda == 0.0) {
            const Eigen::VectorXd fitted = x * run.beta;
            bool extreme = false;
            for (Eigen::Index i = 0; i < fitted.size() && !extreme; ++i) {
                const double pi = sigmoid(fitted(i));
                extreme = pi < options.separation_bound || pi > 1.0 - options.separation_bound;
            }
            diverging = (extreme && run.beta.norm() > old_norm) ? diverging + 1 : 0;
            if (diverging >= 5) {
                run.separated = true;
                break;
            }
        }
    }
    if (!run.converged && !run.separated && lambda == 0.0) {
        const Eigen::VectorXd fitted = x * run.beta;
        for (Eigen::Index i = 0; i < fitted.size(); ++i) {
            const double pi = sigmoid(fitted(i));
            if (pi < options.separation_bound || pi > 1.0 - options.separation_bound) run.separated = true;
        }
    }
    return run;
}

}  // namespace

void require_full_rank(const Eigen::MatrixXd& design, const std::vector<std::string>& column_names) {
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
    qr.setThreshold(1e-10);
    qr.compute(design);
    const Eigen::Index rank = qr.rank();
    if (rank == design.cols()) return;
    std::ostringstream msg;
    msg << "rank-deficient design (rank " << rank << " of " << design.cols() << "); dependent columns:";
    const auto& perm = qr.colsPermutation().indices();
    for (Eigen::Index k = rank; k < design.cols(); ++k) {
        const Eigen::Index j = perm(k);
        msg << ' ' << (j < static_cast<Eigen::Index>(column_names.size()) ? column_names[static_cast<std::size_t>(j)]
                                                                           : "col" + std::to_string(j));
    }
    throw DataError(msg.str());
}

LogisticSolution irls_logistic(const Eigen::MatrixXd& design, const Eigen::VectorXd& targets,
                               const Eigen::VectorXd& weights, const std::vector<std::string>& column_names,
                               const IrlsOptions& options) {
    if (design.rows() != targets.size() || design.rows() != weights.size()) {
        throw DataError("logistic regression: design, targets and weights disagree on row count");
    }
    if (design.rows() <= design.cols()) {
        std::ostringstream msg;
        msg << "logistic regression needs more rows than columns (" << design.rows() << " rows, " << design.cols()
            << " columns)";
        throw DataError(msg.str());
    }
    for (Eigen::Index i = 0; i < targets.size(); ++i) {
        if (targets(i) != 0.0 && targets(i) != 1.0) {
            std::ostringstream msg;
            msg << "logistic regression target must be 0 or 1, row " << i << " has " << targets(i);
            throw DomainError(msg.str());
        }
        if (!(weights(i) > 0.0) || !std::isfinite(weights(i))) {
            throw DataError("logistic regression case weights must be positive and finite");
        }
    }
    require_full_rank(design, column_names);

    IrlsRun run = run_irls(design, targets, weights, 0.0, options);
    LogisticSolution out;
    if (run.separated) {
        IrlsRun ridge = run_irls(design, targets, weights, options.ridge, options);
        out.coefficients = ridge.beta;
        out.converged = false;
        out.iterations = run.iterations + ridge.iterations;
        out.ridge = true;
        return out;
    }
    out.coefficients = run.beta;
    out.converged = run.converged;
    out.iterations = run.iterations;
    return out;
}

Eigen::VectorXd GlmFit::linear_predictor(const Eigen::MatrixXd& covariates) const {
    return design.matrix(covariates) * coefficients;
}

Eigen::VectorXd GlmFit::predict(const Eigen::MatrixXd& covariates) const {
    Eigen::VectorXd eta = linear_predictor(covariates);
    for (Eigen::Index i = 0; i < eta.size(); ++i) {
        eta(i) = std::clamp(sigmoid(eta(i)), kGlmPredictionClip, 1.0 - kGlmPredictionClip);
    }
    return eta;
}

GlmFit fit_logistic(const DesignBasis& design, const Eigen::MatrixXd& covariates, const Eigen::VectorXd& targets,
                    const std::optional<Eigen::VectorXd>& case_weights, const IrlsOptions& options) {
    const Eigen::MatrixXd x = design.matrix(covariates);
    const Eigen::VectorXd w = case_weights ? *case_weights : Eigen::VectorXd::Ones(x.rows());
    const LogisticSolution sol = irls_logistic(x, targets, w, design.column_names(), options);
    GlmFit fit;
    fit.coefficients = sol.coefficients;
    fit.converged = sol.converged;
    fit.iterations = sol.iterations;
    fit.ridge_fallback = sol.ridge;
    fit.design = design;
    return fit;
}

GlmFit fit_logistic(const DesignSpec& design, const Eigen::MatrixXd& covariates, const Eigen::VectorXd& targets,
                    const std::optional<Eigen::VectorXd>& case_weights, const IrlsOptions& options) {
    return fit_logistic(DesignBasis::bind(design, covariates), covariates, targets, case_weights, options);
}

}  // namespace tiltrisk
