#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "helpers.hpp"
#include "tiltrisk/error.hpp"
#include "tiltrisk/estimators.hpp"
#include "tiltrisk/gmm.hpp"
#include "tiltrisk/nuisance.hpp"
#include "tiltrisk/simgen.hpp"

using namespace tiltrisk;

namespace {

// Three source rows then three target rows with hand-set nuisances.
struct HandCase {
    ObservationTable table;
    NuisanceSet nuis;
};

HandCase hand_case(StudyDesign design) {
    Eigen::VectorXi s(6);
    s << 1, 1, 1, 0, 0, 0;
    Eigen::MatrixXd x(6, 1);
    x << 0.1, 0.2, 0.3, 0.4, 0.5, 0.6;
    Eigen::VectorXd y(6);
    y << 0, 1, 1, NAN, NAN, NAN;
    HandCase out;
    out.table = make_table(design, s, x, y);
    out.table.pred = Eigen::VectorXd::Constant(6, 0.5);
    out.table.loss.resize(6);
    out.table.loss << 0.1, 0.4, 0.9, NAN, NAN, NAN;
    out.nuis.p.resize(6);
    out.nuis.p << 0.5, 0.8, 0.25, 0.3, 0.3, 0.3;
    out.nuis.c.resize(6);
    out.nuis.c << 1.2, 1.5, 2.0, 1.0, 1.0, 1.0;
    out.nuis.b.resize(6);
    out.nuis.b << 0.2, 0.3, 0.5, 0.25, 0.35, 0.45;
    return out;
}

const Tilt kLn2(std::log(2.0));

}  // namespace

TEST(PhiCl, Examples) {
    HandCase h = hand_case(StudyDesign::non_nested);
    EXPECT_NEAR(phi_cl(h.table, h.nuis, kLn2).estimate, 0.35, 1e-15);

    // Two target rows with b 0.2 and 0.4.
    Eigen::VectorXi s(3);
    s << 1, 0, 0;
    Eigen::VectorXd y(3);
    y << 1, NAN, NAN;
    ObservationTable t = make_table(StudyDesign::non_nested, s, Eigen::MatrixXd::Zero(3, 1), y);
    t.pred = Eigen::VectorXd::Constant(3, 0.5);
    t.loss = Eigen::Vector3d(0.25, NAN, NAN);
    NuisanceSet ns;
    ns.b = Eigen::Vector3d(0.9, 0.2, 0.4);
    EXPECT_NEAR(phi_cl(t, ns, Tilt(0.0)).estimate, 0.3, 1e-15);
}

TEST(PhiCl, BinaryConstantRowsGiveCoreTiltValue) {
    // h = 0.1 on every row: L(1,h) = 0.81, L(0,h) = 0.01.
    Eigen::VectorXi s(4);
    s << 1, 0, 0, 0;
    Eigen::VectorXd y(4);
    y << 1, NAN, NAN, NAN;
    ObservationTable t = make_table(StudyDesign::non_nested, s, Eigen::MatrixXd::Zero(4, 1), y);
    PredictionModel m;
    m.coefficients = Eigen::VectorXd::Constant(1, testutil::logit(0.1));
    attach_model(t, m, LossFunction::brier());
    const NuisanceSet ns = binary_nuisance(t, Eigen::VectorXd::Constant(4, 0.2), Eigen::VectorXd::Constant(4, 0.5),
                                           LossFunction::brier(), std::log(4.0));
    EXPECT_NEAR(phi_cl(t, ns, Tilt(std::log(4.0))).estimate, 0.41, 1e-14);
}

TEST(PhiCl, ZeroTiltMatchesBruteForceOnFourRows) {
    std::mt19937_64 rng(4);
    auto rc = testutil::random_case(rng, 4, StudyDesign::non_nested);
    const NuisanceSet ns = binary_nuisance(rc.table, rc.g, rc.p, LossFunction::brier(), 0.0);
    EXPECT_NEAR(phi_cl(rc.table, ns, Tilt(0.0)).estimate, brute_force_phi(rc.table, rc.g, LossFunction::brier(), 0.0),
                1e-12);
}

TEST(PhiCl, Errors) {
    HandCase h = hand_case(StudyDesign::nested);
    EXPECT_THROW(phi_cl(h.table, h.nuis, kLn2), ConfigError);
    HandCase g = hand_case(StudyDesign::non_nested);
    g.table.design = StudyDesign::nested;
    EXPECT_NO_THROW(psi_cl(g.table, g.nuis, kLn2));
}

TEST(PhiAug, HandComputation) {
    const HandCase h = hand_case(StudyDesign::non_nested);
    // Source weights ((1-p)/p) e^{eta y} / c: 1/1.2, 0.25*2/1.5, 3*2/2.
    const double aug = (1.0 / 1.2) * (0.1 - 0.2) + (0.25 * 2.0 / 1.5) * (0.4 - 0.3) + 3.0 * (0.9 - 0.5);
    const double expected = (0.25 + 0.35 + 0.45 + aug) / 3.0;
    EXPECT_NEAR(expected, 2.2 / 3.0, 1e-15);
    const EstimateResult r = phi_aug(h.table, h.nuis, kLn2);
    EXPECT_NEAR(r.estimate, expected, 1e-14);
    EXPECT_NEAR(r.diagnostics.max_weight, 3.0, 1e-14);
    EXPECT_EQ(r.kind, EstimatorKind::aug);
}

TEST(PhiAug, MembershipOneEqualsCl) {
    HandCase h = hand_case(StudyDesign::non_nested);
    h.nuis.p.setOnes();
    EXPECT_EQ(phi_aug(h.table, h.nuis, kLn2).estimate, phi_cl(h.table, h.nuis, kLn2).estimate);
}

TEST(PhiAug, ZeroTiltMatchesTransportDoublyRobust) {
    std::mt19937_64 rng(21);
    for (int rep = 0; rep < 20; ++rep) {
        auto rc = testutil::random_case(rng, 150, StudyDesign::non_nested);
        NuisanceRecipe recipe;
        recipe.outcome_design = DesignSpec::linear({0, 1});
        recipe.membership_design = DesignSpec::linear({0, 1});
        const FittedNuisance f = FittedNuisance::fit(rc.table, recipe);
        const NuisanceSet ns = f.at(0.0);
        EXPECT_TRUE((ns.c.array() == 1.0).all());

        // Eta-free transport estimator: mean over targets of E[L|X,S=1]
        // plus inverse-odds weighted source residuals.
        const auto& t = rc.table;
        const Eigen::VectorXd& g = *f.g();
        double sum = 0.0;
        double n0 = 0.0;
        for (Eigen::Index i = 0; i < t.rows(); ++i) {
            const double h = t.pred(i);
            const double m = g(i) * (1.0 - h) * (1.0 - h) + (1.0 - g(i)) * h * h;
            if (t.s(i) == 0) {
                sum += m;
                n0 += 1.0;
            } else {
                sum += (1.0 - f.p()(i)) / f.p()(i) * (t.loss(i) - m);
            }
        }
        EXPECT_NEAR(phi_aug(t, ns, Tilt(0.0)).estimate, sum / n0, 1e-12);
    }
}

TEST(PhiAugAlt, HandComputationWithInterceptGmm) {
    const HandCase h = hand_case(StudyDesign::non_nested);
    NuisanceSet ns = h.nuis;
    const ParametricA a = fit_a_gmm(DesignBasis::bind(DesignSpec::intercept_only(), h.table.x), h.table, Tilt(0.0));
    EXPECT_NEAR(a.theta(0), 0.0, 1e-12);  // n0 = n1
    ns.a = a.predict(h.table.x);
    // weights e^theta = 1: (1/3)[sum b_target + sum residuals]
    const double expected = (1.05 + (0.1 - 0.2) + (0.4 - 0.3) + (0.9 - 0.5)) / 3.0;
    EXPECT_NEAR(phi_aug_alt(h.table, ns, Tilt(0.0)).estimate, expected, 1e-12);
}

TEST(PhiAugAlt, ZeroResidualsGiveCl) {
    HandCase h = hand_case(StudyDesign::non_nested);
    h.nuis.b.head(3) = h.table.loss.head(3);
    h.nuis.a = Eigen::VectorXd::Constant(6, 0.7);
    EXPECT_NEAR(phi_aug_alt(h.table, h.nuis, kLn2).estimate, phi_cl(h.table, h.nuis, kLn2).estimate, 1e-15);
    EXPECT_THROW(estimate(EstimatorKind::aug_alt, hand_case(StudyDesign::nested).table, h.nuis, kLn2), ConfigError);
}

TEST(PsiCl, Examples) {
    const HandCase h = hand_case(StudyDesign::nested);
    EXPECT_NEAR(psi_cl(h.table, h.nuis, kLn2).estimate, (0.1 + 0.4 + 0.9 + 0.25 + 0.35 + 0.45) / 6.0, 1e-15);

    Eigen::VectorXi s(4);
    s << 1, 1, 0, 0;
    Eigen::VectorXd y(4);
    y << 0, 1, NAN, NAN;
    ObservationTable t = make_table(StudyDesign::nested, s, Eigen::MatrixXd::Zero(4, 1), y);
    t.pred = Eigen::VectorXd::Constant(4, 0.5);
    t.loss = Eigen::Vector4d(0.1, 0.3, NAN, NAN);
    NuisanceSet ns;
    ns.b = Eigen::Vector4d(0.0, 0.0, 0.2, 0.4);
    EXPECT_NEAR(psi_cl(t, ns, Tilt(0.0)).estimate, 0.25, 1e-15);
}

TEST(PsiCl, AllSourceIsAverageLoss) {
    std::mt19937_64 rng(31);
    auto rc = testutil::random_case(rng, 40, StudyDesign::nested, true);
    const NuisanceSet ns = binary_nuisance(rc.table, rc.g, rc.p, LossFunction::brier(), 1.3);
    EXPECT_NEAR(psi_cl(rc.table, ns, Tilt(1.3)).estimate, rc.table.loss.mean(), 1e-14);
}

TEST(PsiCl, ZeroTiltMatchesBruteForceOnFourRows) {
    std::mt19937_64 rng(5);
    auto rc = testutil::random_case(rng, 4, StudyDesign::nested);
    const NuisanceSet ns = binary_nuisance(rc.table, rc.g, rc.p, LossFunction::brier(), 0.0);
    EXPECT_NEAR(psi_cl(rc.table, ns, Tilt(0.0)).estimate, brute_force_psi(rc.table, rc.g, LossFunction::brier(), 0.0),
                1e-12);
}

TEST(PsiAug, HandComputation) {
    const HandCase h = hand_case(StudyDesign::nested);
    const double aug = (1.0 / 1.2) * (0.1 - 0.2) + (0.25 * 2.0 / 1.5) * (0.4 - 0.3) + 3.0 * (0.9 - 0.5);
    const double expected = (0.1 + 0.4 + 0.9 + 0.25 + 0.35 + 0.45 + aug) / 6.0;
    EXPECT_NEAR(psi_aug(h.table, h.nuis, kLn2).estimate, expected, 1e-14);
    EXPECT_NEAR(expected, 0.6, 1e-15);
}

TEST(PsiAug, ReductionsToCl) {
    HandCase h = hand_case(StudyDesign::nested);
    NuisanceSet one = h.nuis;
    one.p.setOnes();
    EXPECT_EQ(psi_aug(h.table, one, kLn2).estimate, psi_cl(h.table, one, kLn2).estimate);
    NuisanceSet fit = h.nuis;
    fit.b.head(3) = h.table.loss.head(3);
    EXPECT_NEAR(psi_aug(h.table, fit, kLn2).estimate, psi_cl(h.table, fit, kLn2).estimate, 1e-15);
}

TEST(Influence, NonNestedHandValues) {
    const HandCase h = hand_case(StudyDesign::non_nested);
    const double plugged = 2.2 / 3.0;
    const InfluenceValues iv = influence_values_nonnested(h.table, h.nuis, kLn2, plugged);
    Eigen::VectorXd expected(6);
    expected << 2.0 * (-0.1 / 1.2), 2.0 * (0.1 / 3.0), 2.0 * 1.2, 2.0 * (0.25 - plugged), 2.0 * (0.35 - plugged),
        2.0 * (0.45 - plugged);
    for (int i = 0; i < 6; ++i) EXPECT_NEAR(iv.values(i), expected(i), 1e-14);
    EXPECT_NEAR(iv.mean, 0.0, 1e-15);
    EXPECT_NEAR(iv.se, std::sqrt(expected.squaredNorm() / 6.0 / 6.0), 1e-15);
}

TEST(Influence, NestedHandValues) {
    const HandCase h = hand_case(StudyDesign::nested);
    const InfluenceValues iv = influence_values_nested(h.table, h.nuis, kLn2, 0.6);
    Eigen::VectorXd expected(6);
    expected << 0.1 - 0.1 / 1.2 - 0.6, 0.4 + 0.1 / 3.0 - 0.6, 0.9 + 1.2 - 0.6, 0.25 - 0.6, 0.35 - 0.6, 0.45 - 0.6;
    for (int i = 0; i < 6; ++i) EXPECT_NEAR(iv.values(i), expected(i), 1e-14);
    EXPECT_NEAR(iv.mean, 0.0, 1e-15);
}

TEST(Influence, ConstantLossGivesZeros) {
    HandCase h = hand_case(StudyDesign::non_nested);
    h.table.loss.head(3).setConstant(0.3);
    h.nuis.b.setConstant(0.3);
    const InfluenceValues iv = influence_values_nonnested(h.table, h.nuis, kLn2, 0.3);
    EXPECT_EQ(iv.values.cwiseAbs().maxCoeff(), 0.0);

    std::mt19937_64 rng(1);
    auto rc = testutil::random_case(rng, 10, StudyDesign::nested, true);
    rc.table.loss.setConstant(0.3);
    NuisanceSet ns;
    ns.b = Eigen::VectorXd::Constant(10, 0.3);
    ns.p = Eigen::VectorXd::Ones(10);
    ns.c = Eigen::VectorXd::Ones(10);
    EXPECT_EQ(influence_values_nested(rc.table, ns, kLn2, 0.3).values.cwiseAbs().maxCoeff(), 0.0);
}

class RandomTables : public ::testing::TestWithParam<int> {};

TEST_P(RandomTables, ReductionParameterizationAndCentering) {
    std::mt19937_64 rng(1000 + GetParam());
    std::uniform_real_distribution<double> eta_dist(-2.0, 2.0);
    const double eta = eta_dist(rng);
    const Tilt tilt(eta);

    auto nn = testutil::random_case(rng, 200, StudyDesign::non_nested);
    NuisanceSet ns = binary_nuisance(nn.table, nn.g, nn.p, LossFunction::brier(), eta);
    NuisanceSet ones = ns;
    ones.p.setOnes();
    EXPECT_EQ(phi_aug(nn.table, ones, tilt).estimate, phi_cl(nn.table, ones, tilt).estimate);

    Eigen::VectorXd a(ns.p.size());
    for (Eigen::Index i = 0; i < a.size(); ++i) a(i) = selection_a(ns.p(i), ns.c(i));
    ns.a = a;
    const double aug = phi_aug(nn.table, ns, tilt).estimate;
    EXPECT_NEAR(phi_aug_alt(nn.table, ns, tilt).estimate, aug, 1e-12);
    EXPECT_LT(std::abs(influence_values_nonnested(nn.table, ns, tilt, aug).mean), 1e-10);

    auto ne = testutil::random_case(rng, 200, StudyDesign::nested);
    NuisanceSet nsn = binary_nuisance(ne.table, ne.g, ne.p, LossFunction::brier(), eta);
    NuisanceSet onesn = nsn;
    onesn.p.setOnes();
    EXPECT_EQ(psi_aug(ne.table, onesn, tilt).estimate, psi_cl(ne.table, onesn, tilt).estimate);
    const double augn = psi_aug(ne.table, nsn, tilt).estimate;
    EXPECT_LT(std::abs(influence_values_nested(ne.table, nsn, tilt, augn).mean), 1e-10);
}

INSTANTIATE_TEST_SUITE_P(Hundred, RandomTables, ::testing::Range(0, 100));

TEST(BruteForce, ExactNuisancesMatchOnSmallTables) {
    std::mt19937_64 rng(55);
    for (int rep = 0; rep < 200; ++rep) {
        const Eigen::Index n = 2 + rep % 7;
        auto rc = testutil::random_case(rng, n, rep % 2 ? StudyDesign::nested : StudyDesign::non_nested);
        const double eta = -1.5 + 0.01 * rep;
        const NuisanceSet ns = binary_nuisance(rc.table, rc.g, rc.p, LossFunction::brier(), eta);
        if (rc.table.design == StudyDesign::non_nested) {
            EXPECT_NEAR(phi_cl(rc.table, ns, Tilt(eta)).estimate, brute_force_phi(rc.table, rc.g, LossFunction::brier(), eta), 1e-12);
        } else {
            EXPECT_NEAR(psi_cl(rc.table, ns, Tilt(eta)).estimate, brute_force_psi(rc.table, rc.g, LossFunction::brier(), eta), 1e-12);
        }
    }
}

TEST(Estimators, BrierAugmentationOvershootIsReportedNotTruncated) {
    HandCase h = hand_case(StudyDesign::non_nested);
    h.table.loss(2) = 1.0;
    h.nuis.b(2) = 0.0;
    h.nuis.p(2) = 0.01;
    const EstimateResult r = phi_aug(h.table, h.nuis, kLn2);
    EXPECT_GT(r.estimate, 1.0);
    EXPECT_GT(r.diagnostics.overshoot, 0.0);
}
