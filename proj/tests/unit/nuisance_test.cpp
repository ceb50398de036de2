#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <string>

#include <Eigen/Cholesky>

#include "helpers.hpp"
#include "tiltrisk/design.hpp"
#include "tiltrisk/error.hpp"
#include "tiltrisk/glm.hpp"
#include "tiltrisk/gmm.hpp"
#include "tiltrisk/nuisance.hpp"
#include "tiltrisk/wls.hpp"

using namespace tiltrisk;

namespace {

// Cox-de Boor recursion, right-continuous except at the last knot.
double cox_de_boor(const Eigen::VectorXd& t, int i, int p, double x) {
    if (p == 0) {
        const double last = t(t.size() - 1);
        if (x == last) return (t(i) < x && t(i + 1) == last) ? 1.0 : 0.0;
        return (t(i) <= x && x < t(i + 1)) ? 1.0 : 0.0;
    }
    double out = 0.0;
    if (t(i + p) > t(i)) out += (x - t(i)) / (t(i + p) - t(i)) * cox_de_boor(t, i, p - 1, x);
    if (t(i + p + 1) > t(i + 1)) out += (t(i + p + 1) - x) / (t(i + p + 1) - t(i + 1)) * cox_de_boor(t, i + 1, p - 1, x);
    return out;
}

Eigen::VectorXd uniform_column(std::mt19937_64& rng, Eigen::Index n, double lo = 0.0, double hi = 1.0) {
    std::uniform_real_distribution<double> u(lo, hi);
    Eigen::VectorXd v(n);
    for (Eigen::Index i = 0; i < n; ++i) v(i) = u(rng);
    return v;
}

}  // namespace

TEST(FitLogistic, InterceptOnlyHalf) {
    Eigen::MatrixXd x(10, 1);
    x.setZero();
    Eigen::VectorXd y(10);
    y << 1, 0, 1, 0, 1, 0, 1, 0, 1, 0;
    const GlmFit fit = fit_logistic(DesignSpec::intercept_only(), x, y);
    ASSERT_EQ(fit.coefficients.size(), 1);
    EXPECT_NEAR(fit.coefficients(0), 0.0, 1e-12);
    EXPECT_TRUE(fit.converged);
}

TEST(FitLogistic, InterceptOnlyThreeOfTen) {
    Eigen::MatrixXd x = Eigen::MatrixXd::Zero(10, 1);
    Eigen::VectorXd y = Eigen::VectorXd::Zero(10);
    y.head(3).setOnes();
    const GlmFit fit = fit_logistic(DesignSpec::intercept_only(), x, y);
    EXPECT_NEAR(fit.coefficients(0), std::log(0.3 / 0.7), 1e-10);
    EXPECT_NEAR(fit.coefficients(0), -0.8473, 1e-4);
}

TEST(FitLogistic, InterceptOnlyWeightedMean) {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(0.1, 3.0), unit(0.0, 1.0);
    for (int rep = 0; rep < 20; ++rep) {
        Eigen::VectorXd y(40), w(40);
        for (int i = 0; i < 40; ++i) {
            y(i) = unit(rng) < 0.35 ? 1.0 : 0.0;
            w(i) = u(rng);
        }
        y(0) = 1.0;
        y(1) = 0.0;
        const GlmFit fit = fit_logistic(DesignSpec::intercept_only(), Eigen::MatrixXd::Zero(40, 1), y, w);
        const double mean = y.dot(w) / w.sum();
        EXPECT_NEAR(fit.coefficients(0), testutil::logit(mean), 1e-10);
    }
}

TEST(FitLogistic, SeparationFallsBackToRidge) {
    Eigen::MatrixXd x(8, 1);
    x << -4, -3, -2, -1, 1, 2, 3, 4;
    Eigen::VectorXd y(8);
    y << 0, 0, 0, 0, 1, 1, 1, 1;
    const GlmFit fit = fit_logistic(DesignSpec::linear({0}), x, y);
    EXPECT_FALSE(fit.converged);
    EXPECT_TRUE(fit.ridge_fallback);
    EXPECT_TRUE(fit.coefficients.allFinite());
    const Eigen::VectorXd p = fit.predict(x);
    EXPECT_TRUE((p.array() >= kGlmPredictionClip).all());
    EXPECT_TRUE((p.array() <= 1.0 - kGlmPredictionClip).all());
}

TEST(FitLogistic, RankDeficiencyNamesColumns) {
    std::mt19937_64 rng(5);
    Eigen::MatrixXd x(30, 3);
    x.col(0) = uniform_column(rng, 30);
    x.col(1) = uniform_column(rng, 30);
    x.col(2) = 2.0 * x.col(0) - x.col(1);
    Eigen::VectorXd y = Eigen::VectorXd::Zero(30);
    y.head(12).setOnes();
    try {
        fit_logistic(DesignBasis::bind(DesignSpec::linear({0, 1, 2}), x, {"a", "b", "c"}), x, y);
        FAIL() << "expected DataError";
    } catch (const DataError& e) {
        const std::string msg = e.what();
        EXPECT_NE(msg.find("rank-deficient"), std::string::npos);
        EXPECT_NE(msg.find("dependent columns"), std::string::npos);
    }
}

TEST(FitLogistic, NonBinaryTarget) {
    Eigen::MatrixXd x = Eigen::MatrixXd::Zero(5, 1);
    Eigen::VectorXd y(5);
    y << 0, 1, 0.5, 1, 0;
    EXPECT_THROW(fit_logistic(DesignSpec::intercept_only(), x, y), DomainError);
}

TEST(FitLogistic, ScoreEquationsHold) {
    std::mt19937_64 rng(99);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (int rep = 0; rep < 25; ++rep) {
        const Eigen::Index n = 300;
        Eigen::MatrixXd x(n, 2);
        x.col(0) = uniform_column(rng, n, -2.0, 2.0);
        x.col(1) = uniform_column(rng, n);
        Eigen::VectorXd y(n), w(n);
        for (Eigen::Index i = 0; i < n; ++i) {
            const double pr = 1.0 / (1.0 + std::exp(-(0.2 + 0.8 * x(i, 0) - 1.0 * x(i, 1))));
            y(i) = unit(rng) < pr ? 1.0 : 0.0;
            w(i) = rep % 2 == 0 ? 1.0 : 0.5 + unit(rng);
        }
        const DesignSpec spec = DesignSpec::linear({0, 1});
        const GlmFit fit = fit_logistic(spec, x, y, w);
        ASSERT_FALSE(fit.ridge_fallback);
        const Eigen::MatrixXd d = fit.design.matrix(x);
        Eigen::VectorXd resid(n);
        for (Eigen::Index i = 0; i < n; ++i) resid(i) = w(i) * (y(i) - 1.0 / (1.0 + std::exp(-d.row(i).dot(fit.coefficients))));
        const Eigen::VectorXd score = d.transpose() * resid;
        EXPECT_LT(score.cwiseAbs().maxCoeff(), 1e-6);
    }
}

TEST(FitLogistic, Deterministic) {
    std::mt19937_64 rng(1);
    Eigen::MatrixXd x(200, 1);
    x.col(0) = uniform_column(rng, 200, -1.0, 1.0);
    Eigen::VectorXd y(200);
    for (int i = 0; i < 200; ++i) y(i) = (x(i, 0) + 0.3 * std::sin(17.0 * i) > 0.0) ? 1.0 : 0.0;
    const GlmFit a = fit_logistic(DesignSpec::linear({0}), x, y);
    const GlmFit b = fit_logistic(DesignSpec::linear({0}), x, y);
    EXPECT_EQ(a.coefficients, b.coefficients);
}

TEST(Spline, DegreeOneNoKnotsIsTwoHats) {
    Eigen::VectorXd col(5);
    col << 0.0, 0.25, 0.5, 0.75, 1.0;
    const Eigen::MatrixXd b = spline_expand(col, 1, 0);
    ASSERT_EQ(b.cols(), 2);
    for (Eigen::Index i = 0; i < col.size(); ++i) {
        EXPECT_NEAR(b(i, 0), 1.0 - col(i), 1e-15);
        EXPECT_NEAR(b(i, 1), col(i), 1e-15);
    }
}

TEST(Spline, CubicTwoKnotsHasSixColumns) {
    std::mt19937_64 rng(8);
    const Eigen::VectorXd col = uniform_column(rng, 100);
    EXPECT_EQ(spline_expand(col, 3, 2).cols(), 6);
}

TEST(Spline, ConstantColumnRejected) {
    EXPECT_THROW(spline_expand(Eigen::VectorXd::Constant(20, 3.0), 3, 2), DataError);
    EXPECT_THROW(spline_expand(Eigen::VectorXd::LinSpaced(20, 0, 1), 4, 0), ConfigError);
}

TEST(Spline, PartitionOfUnityAndCoxDeBoor) {
    std::mt19937_64 rng(12);
    for (int degree = 1; degree <= 3; ++degree) {
        for (int knots = 0; knots <= 4; ++knots) {
            const Eigen::VectorXd col = uniform_column(rng, 200, -3.0, 5.0);
            const SplineKnots k = place_knots(col, degree, knots);
            EXPECT_EQ(k.knots(0), col.minCoeff());
            EXPECT_EQ(k.knots(k.knots.size() - 1), col.maxCoeff());
            const Eigen::MatrixXd b = bspline_basis(col, k);
            ASSERT_EQ(b.cols(), degree + knots + 1);
            for (Eigen::Index i = 0; i < col.size(); ++i) {
                EXPECT_NEAR(b.row(i).sum(), 1.0, 1e-12);
                for (Eigen::Index j = 0; j < b.cols(); ++j) {
                    EXPECT_NEAR(b(i, j), cox_de_boor(k.knots, static_cast<int>(j), degree, col(i)), 1e-12);
                }
            }
        }
    }
}

TEST(Spline, KnotsAtQuantiles) {
    const Eigen::VectorXd col = Eigen::VectorXd::LinSpaced(101, 0.0, 100.0);
    const SplineKnots k = place_knots(col, 3, 3);
    EXPECT_NEAR(k.knots(4), 25.0, 1e-12);
    EXPECT_NEAR(k.knots(5), 50.0, 1e-12);
    EXPECT_NEAR(k.knots(6), 75.0, 1e-12);
}

TEST(Spline, FrozenBasisEvaluatesOnNewRows) {
    std::mt19937_64 rng(2);
    Eigen::MatrixXd x(50, 2);
    x.col(0) = uniform_column(rng, 50);
    x.col(1) = uniform_column(rng, 50);
    const DesignBasis basis = DesignBasis::bind(DesignSpec::with_splines({0, 1}, {0}, 3, 2), x, {"u", "v"});
    // intercept + 5 spline columns (first dropped) + linear v
    EXPECT_EQ(basis.cols(), 1 + 5 + 1);
    Eigen::MatrixXd outside(2, 2);
    outside << -1.0, 0.5, 2.0, 0.5;
    const Eigen::MatrixXd m = basis.matrix(outside);
    EXPECT_TRUE(m.allFinite());
}

TEST(Wls, Examples) {
    const DesignSpec io = DesignSpec::intercept_only();
    Eigen::MatrixXd x = Eigen::MatrixXd::Zero(2, 1);
    const DesignBasis basis = DesignBasis::bind(io, x);
    const Eigen::Vector2d losses(1.0, 3.0);
    const WlsFit eq = fit_weighted_ls(basis, x, losses, Eigen::Vector2d(1.0, 1.0));
    EXPECT_NEAR(eq.predict(x)(0), 2.0, 1e-14);
    const WlsFit uneq = fit_weighted_ls(basis, x, losses, Eigen::Vector2d(3.0, 1.0));
    EXPECT_NEAR(uneq.predict(x)(0), 1.5, 1e-14);
}

TEST(Wls, BTiltWeightsMatchWeightedMean) {
    Eigen::MatrixXd x = Eigen::MatrixXd::Zero(2, 1);
    const DesignBasis basis = DesignBasis::bind(DesignSpec::intercept_only(), x);
    // weights e^{eta y} with y = {ln 3, 0}, eta = 1 -> {3, 1}
    const WlsFit fit = fit_b_continuous(basis, x, Eigen::Vector2d(1.0, 3.0), Tilt(1.0), Eigen::Vector2d(std::log(3.0), 0.0));
    EXPECT_NEAR(fit.predict(x)(0), 1.5, 1e-13);
}

TEST(Wls, ZeroTiltIsOrdinaryLeastSquares) {
    std::mt19937_64 rng(4);
    const Eigen::Index n = 80;
    Eigen::MatrixXd x(n, 2);
    x.col(0) = uniform_column(rng, n);
    x.col(1) = uniform_column(rng, n);
    const Eigen::VectorXd y = uniform_column(rng, n, -2.0, 2.0);
    const Eigen::VectorXd l = uniform_column(rng, n);
    const DesignBasis basis = DesignBasis::bind(DesignSpec::linear({0, 1}), x);
    const WlsFit fit = fit_b_continuous(basis, x, l, Tilt(0.0), y);
    const Eigen::MatrixXd d = basis.matrix(x);
    const Eigen::VectorXd ols = (d.transpose() * d).ldlt().solve(d.transpose() * l);
    EXPECT_LT((fit.coefficients - ols).cwiseAbs().maxCoeff(), 1e-10);
    EXPECT_TRUE((fit.weights.array() == 1.0).all());
}

TEST(Wls, NormalEquationResidualGradient) {
    std::mt19937_64 rng(6);
    const Eigen::Index n = 150;
    Eigen::MatrixXd x(n, 2);
    x.col(0) = uniform_column(rng, n);
    x.col(1) = uniform_column(rng, n);
    const Eigen::VectorXd y = uniform_column(rng, n, -1.0, 1.0);
    const Eigen::VectorXd l = uniform_column(rng, n);
    const DesignBasis basis = DesignBasis::bind(DesignSpec::with_splines({0, 1}, {0}, 3, 2), x);
    const Tilt tilt(0.7);
    const WlsFit fit = fit_b_continuous(basis, x, l, tilt, y);
    const Eigen::MatrixXd d = basis.matrix(x);
    Eigen::VectorXd w(n);
    for (Eigen::Index i = 0; i < n; ++i) w(i) = std::exp(0.7 * y(i));
    const Eigen::VectorXd grad = d.transpose() * (w.asDiagonal() * (l - d * fit.coefficients));
    EXPECT_LT(grad.norm(), 1e-8);
}

TEST(FitC, Examples) {
    Eigen::MatrixXd x = Eigen::MatrixXd::Zero(2, 1);
    const DesignBasis basis = DesignBasis::bind(DesignSpec::intercept_only(), x);
    const WlsFit zero = fit_c_continuous(basis, x, Tilt(0.0), Eigen::Vector2d(0.3, -1.2));
    EXPECT_NEAR(zero.predict(x)(0), 1.0, 1e-14);
    const WlsFit c = fit_c_continuous(basis, x, Tilt(std::log(4.0)), Eigen::Vector2d(0.0, 1.0));
    EXPECT_NEAR(c.predict(x)(0), 2.5, 1e-13);
}

TEST(FitC, FloorsNonPositivePredictions) {
    Eigen::MatrixXd x(4, 1);
    x << 0.0, 1.0, 2.0, 3.0;
    const DesignBasis basis = DesignBasis::bind(DesignSpec::linear({0}), x);
    // e^{y} decreasing steeply in x, so extrapolation to x=6 is negative
    const Eigen::Vector4d y(std::log(10.0), std::log(7.0), std::log(4.0), std::log(1.0));
    const WlsFit c = fit_c_continuous(basis, x, Tilt(1.0), y);
    Eigen::MatrixXd far(2, 1);
    far << 0.0, 6.0;
    const ClippedValues v = c.predict_floored(far, kNormalizerFloor);
    EXPECT_EQ(v.clipped, 1);
    EXPECT_EQ(v.values(1), kNormalizerFloor);
    EXPECT_NEAR(v.values(0), 10.0, 1e-12);
}

namespace {

ObservationTable random_gmm_table(std::mt19937_64& rng, Eigen::Index n) {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    Eigen::VectorXi s(n);
    Eigen::MatrixXd x(n, 1);
    Eigen::VectorXd y(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        s(i) = unit(rng) < 0.5 ? 1 : 0;
        x(i, 0) = unit(rng);
        y(i) = s(i) == 1 ? (unit(rng) < 0.4 ? 1.0 : 0.0) : std::nan("");
    }
    s(0) = 1;
    y(0) = 1.0;
    s(1) = 0;
    return make_table(StudyDesign::non_nested, s, x, y);
}

}  // namespace

TEST(Gmm, InterceptOnlyClosedFormAcrossDatasets) {
    std::mt19937_64 rng(77);
    for (int rep = 0; rep < 50; ++rep) {
        const ObservationTable t = random_gmm_table(rng, 20 + rep * 3);
        const DesignBasis basis = DesignBasis::bind(DesignSpec::intercept_only(), t.x);
        for (const double eta : {-1.0, 0.0, 1.0}) {
            double sum = 0.0;
            for (const auto i : t.source_rows()) sum += std::exp(eta * t.y(i));
            const double expected = std::log(static_cast<double>(t.n_target()) / sum);
            const ParametricA a = fit_a_gmm(basis, t, Tilt(eta));
            EXPECT_NEAR(a.theta(0), expected, 1e-10) << "rep " << rep << " eta " << eta;
            EXPECT_LT(a.moment_norm, 1e-8);
            if (eta == 0.0) {
                EXPECT_NEAR(a.theta(0), std::log(static_cast<double>(t.n_target()) / t.n_source()), 1e-10);
            }
        }
    }
}

TEST(Gmm, VectorMomentsVanish) {
    std::mt19937_64 rng(78);
    const ObservationTable t = random_gmm_table(rng, 400);
    const DesignBasis basis = DesignBasis::bind(DesignSpec::linear({0}), t.x);
    const ParametricA a = fit_a_gmm(basis, t, Tilt(0.6));
    const Eigen::VectorXd m = gmm_moments(basis.matrix(t.x), t, Tilt(0.6), a.theta);
    EXPECT_LT(m.cwiseAbs().maxCoeff(), 1e-8);
}

TEST(Gmm, EmptyStratum) {
    Eigen::VectorXi s = Eigen::VectorXi::Ones(4);
    Eigen::MatrixXd x = Eigen::MatrixXd::Zero(4, 1);
    Eigen::VectorXd y(4);
    y << 0, 1, 0, 1;
    const ObservationTable t = make_table(StudyDesign::nested, s, x, y);
    EXPECT_THROW(fit_a_gmm(DesignBasis::bind(DesignSpec::intercept_only(), t.x), t, Tilt(0.0)), DataError);
}

TEST(Nuisance, ClipAndBinaryConsistency) {
    Eigen::VectorXd p(4);
    p << 0.001, 0.5, 0.995, 0.01;
    EXPECT_EQ(clip_probabilities(p), 2);
    EXPECT_EQ(p(0), 0.01);
    EXPECT_EQ(p(2), 0.99);

    std::mt19937_64 rng(9);
    auto rc = testutil::random_case(rng, 30, StudyDesign::non_nested);
    const NuisanceSet ns = binary_nuisance(rc.table, rc.g, rc.p, LossFunction::brier(), 0.8);
    for (Eigen::Index i = 0; i < 30; ++i) {
        const double h = rc.table.pred(i);
        EXPECT_EQ(ns.c(i), binary_c(rc.g(i), 0.8));
        EXPECT_EQ(ns.b(i), binary_b((1 - h) * (1 - h), h * h, rc.g(i), 0.8));
    }
}

TEST(Nuisance, FittedClipsMembership) {
    std::mt19937_64 rng(10);
    auto rc = testutil::random_case(rng, 200, StudyDesign::non_nested);
    NuisanceRecipe recipe;
    recipe.outcome_design = DesignSpec::linear({0, 1});
    recipe.membership_design = DesignSpec::linear({0, 1});
    const FittedNuisance f = FittedNuisance::fit(rc.table, recipe);
    EXPECT_TRUE((f.p().array() >= kMembershipClipLow).all());
    EXPECT_TRUE((f.p().array() <= kMembershipClipHigh).all());
    const NuisanceSet ns = f.at(0.3);
    EXPECT_TRUE((ns.c.array() >= kNormalizerFloor).all());
    recipe.q = [](double y) { return y; };
    EXPECT_THROW(FittedNuisance::fit(rc.table, recipe), ConfigError);
}
