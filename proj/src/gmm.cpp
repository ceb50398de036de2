#include "tiltrisk/gmm.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <Eigen/QR>

#include "tiltrisk/error.hpp"
#include "tiltrisk/glm.hpp"

namespace tiltrisk {

Eigen::VectorXd ParametricA::predict(const Eigen::MatrixXd& covariates) const {
    return design.matrix(covariates) * theta;
}

Eigen::VectorXd gmm_moments(const Eigen::MatrixXd& d, const ObservationTable& table, const Tilt& tilt,
                            const Eigen::VectorXd& theta) {
    const auto n0 = static_cast<double>(table.n_target());
    Eigen::VectorXd m = Eigen::VectorXd::Zero(d.cols());
    for (Eigen::Index i = 0; i < table.rows(); ++i) {
        double r;
        if (table.s(i) == 1) {
            const double z = d.row(i).dot(theta) + tilt.exponent(table.y(i));
            r = std::exp(z);
        } else {
            r = -1.0;
        }
        m += r * d.row(i).transpose();
    }
    return m / n0;
}

ParametricA fit_a_gmm(const DesignBasis& design, const ObservationTable& table, const Tilt& tilt,
                      const GmmOptions& options) {
    if (table.n_source() == 0 || table.n_target() == 0) {
        throw DataError("fit_a_gmm needs both source and target rows");
    }
    const Eigen::MatrixXd d = design.matrix(table.x);
    require_full_rank(d, design.column_names());

    const Eigen::Index k = d.cols();
    Eigen::VectorXd theta = Eigen::VectorXd::Zero(k);
    auto moments = [&](const Eigen::VectorXd& t) { return gmm_moments(d, table, tilt, t); };
    auto norm_of = [](const Eigen::VectorXd& m) { return m.allFinite() ? m.norm() : HUGE_VAL; };

    Eigen::VectorXd m = moments(theta);
    double norm = norm_of(m);
    int it = 0;
    for (; it < options.max_iterations && norm >= options.tolerance; ++it) {
        Eigen::MatrixXd jac(k, k);
        for (Eigen::Index j = 0; j < k; ++j) {
            const double h = 1e-6 * std::max(1.0, std::abs(theta(j)));
            Eigen::VectorXd up = theta, down = theta;
            up(j) += h;
            down(j) -= h;
            jac.col(j) = (moments(up) - moments(down)) / (2.0 * h);
        }
        const Eigen::VectorXd step = jac.colPivHouseholderQr().solve(-m);
        if (!step.allFinite()) break;
        double t = 1.0;
        Eigen::VectorXd candidate = theta + step;
        Eigen::VectorXd m_new = moments(candidate);
        double norm_new = norm_of(m_new);
        for (int h = 0; h < 40 && !(norm_new < norm); ++h) {
            t *= 0.5;
            candidate = theta + t * step;
            m_new = moments(candidate);
            norm_new = norm_of(m_new);
        }
        if (!(norm_new < norm)) break;
        theta = candidate;
        m = m_new;
        norm = norm_new;
    }
    if (!(norm < options.tolerance)) {
        std::ostringstream msg;
        msg << "GMM for the selection offset did not converge after " << it << " iterations (moment norm " << norm
            << ")";
        throw NumericError(msg.str());
    }
    ParametricA out;
    out.theta = theta;
    out.design = design;
    out.eta = tilt.eta;
    out.iterations = it;
    out.moment_norm = norm;
    return out;
}

}  // namespace tiltrisk
