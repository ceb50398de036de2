#pragma once

#include <cmath>
#include <random>

#include <Eigen/Core>

#include "tiltrisk/loss.hpp"
#include "tiltrisk/nuisance.hpp"
#include "tiltrisk/table.hpp"

namespace testutil {

inline double logit(double p) { return std::log(p / (1.0 - p)); }

// Random binary table with a one-covariate logistic model attached and
// arbitrary (not fitted) nuisance values in (0,1).
struct RandomCase {
    tiltrisk::ObservationTable table;
    Eigen::VectorXd g;
    Eigen::VectorXd p;
};

inline RandomCase random_case(std::mt19937_64& rng, Eigen::Index n, tiltrisk::StudyDesign design,
                              bool all_source = false) {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    Eigen::VectorXi s(n);
    Eigen::MatrixXd x(n, 2);
    Eigen::VectorXd y(n);
    RandomCase out;
    out.g.resize(n);
    out.p.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        s(i) = all_source ? 1 : (unit(rng) < 0.6 ? 1 : 0);
        x(i, 0) = 2.0 * unit(rng) - 1.0;
        x(i, 1) = unit(rng);
        y(i) = s(i) == 1 ? (unit(rng) < 0.4 ? 1.0 : 0.0) : std::nan("");
        out.g(i) = 0.05 + 0.9 * unit(rng);
        out.p(i) = 0.05 + 0.9 * unit(rng);
    }
    if (!all_source) {
        s(0) = 1;
        y(0) = 1.0;
        s(1) = 0;
        y(1) = std::nan("");
    }
    out.table = tiltrisk::make_table(design, s, x, y, {"x1", "x2"});
    tiltrisk::PredictionModel model;
    model.coefficients = Eigen::Vector2d(-0.3, 1.1);
    model.columns = {0};
    tiltrisk::attach_model(out.table, model, tiltrisk::LossFunction::brier());
    return out;
}

}  // namespace testutil
