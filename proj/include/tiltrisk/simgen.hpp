#pragma once

// Synthetic data with known ground truth.
//
// Covariates are drawn independently, S | X is logistic in X, and source
// outcomes follow either a logistic model (binary Y) or a linear-Gaussian
// model (continuous Y). Target outcomes are drawn from the exponentially
// tilted source conditional at eta_true and kept out of the returned table.

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "json.hpp"
#include "tiltrisk/design.hpp"
#include "tiltrisk/loss.hpp"
#include "tiltrisk/nuisance.hpp"
#include "tiltrisk/table.hpp"

namespace tiltrisk {

enum class CovariateKind { uniform, normal, bernoulli, categorical };

CovariateKind parse_covariate_kind(std::string_view name);
std::string to_string(CovariateKind kind);

// uniform: U(a, b); normal: N(a, b^2); bernoulli: Bernoulli(a);
// categorical: levels 1..K with probabilities `levels`, expanded to K-1
// indicator columns (level 1 is the reference).
struct CovariateSpec {
    std::string name;
    CovariateKind kind = CovariateKind::uniform;
    double a = 0.0;
    double b = 1.0;
    std::vector<double> levels;

    Eigen::Index width() const;
};

struct QuadraticTerm {
    Eigen::Index column = 0;
    double coefficient = 0.0;
};

struct DgpSpec {
    std::vector<CovariateSpec> covariates;
    StudyDesign design = StudyDesign::non_nested;
    Eigen::Index n = 1000;

    // logit Pr[S=1|X] = membership(0) + sum_j membership(j+1) x_j over expanded columns
    Eigen::VectorXd membership;

    OutcomeType outcome = OutcomeType::binary;
    // logit g(X) (binary) or E[Y|X,S=1] (continuous), same layout as membership
    Eigen::VectorXd outcome_coefficients;
    std::vector<QuadraticTerm> outcome_quadratic;
    double sigma = 1.0;  // continuous residual sd

    double eta_true = 0.0;

    PredictionModel model;
    LossKind loss = LossKind::brier;

    Eigen::Index columns() const;
    std::vector<std::string> column_names() const;
    LossFunction loss_function() const;

    // Structural checks; with require_positivity also bounds Pr[S=1|X] in
    // [0.05, 0.95] over the covariate support (normal covariates must then
    // carry zero membership coefficients).
    void validate(bool require_positivity = true) const;

    double membership_probability(const Eigen::Ref<const Eigen::RowVectorXd>& x) const;
    double outcome_linear_predictor(const Eigen::Ref<const Eigen::RowVectorXd>& x) const;
    // g(X) for binary outcomes, E[Y|X,S=1] for continuous ones.
    double outcome_mean(const Eigen::Ref<const Eigen::RowVectorXd>& x) const;
};

void to_json(nlohmann::json& j, const DgpSpec& spec);
void from_json(const nlohmann::json& j, DgpSpec& spec);

// Target outcomes; never read by estimators.
struct HiddenOutcomes {
    std::vector<Eigen::Index> rows;
    Eigen::VectorXd y;
};

// True nuisance values per row of the generated table.
struct TrueNuisance {
    Eigen::VectorXd p;     // Pr[S=1|X]
    Eigen::VectorXd mean;  // g(X) or E[Y|X,S=1]
};

struct SimulatedData {
    ObservationTable table;
    HiddenOutcomes hidden;
    TrueNuisance truth;
};

Eigen::RowVectorXd draw_covariates(const DgpSpec& spec, std::mt19937_64& rng);

SimulatedData generate(const DgpSpec& spec, std::uint64_t seed);

// Exact b(X;eta) for one covariate row under the DGP.
double true_conditional_loss(const DgpSpec& spec, const Eigen::Ref<const Eigen::RowVectorXd>& x, double eta);

struct OracleValue {
    double value = 0.0;
    double mc_se = 0.0;
};

// Monte Carlo value of the non-nested target risk E[b(X;eta) | S=0].
OracleValue true_phi_oracle(const DgpSpec& spec, double eta, std::int64_t n_mc, std::uint64_t seed);
// Monte Carlo value of the nested target risk E[S L] + E[(1-S) b(X;eta)].
OracleValue true_psi_oracle(const DgpSpec& spec, double eta, std::int64_t n_mc, std::uint64_t seed);

// Exhaustive enumeration of every target-outcome pattern for binary tables
// of at most 8 rows. g holds the exact Pr[Y=1|X,S=1] per row.
double brute_force_phi(const ObservationTable& table, const Eigen::VectorXd& g, const LossFunction& loss, double eta);
double brute_force_psi(const ObservationTable& table, const Eigen::VectorXd& g, const LossFunction& loss, double eta);

enum class Misspecification { none, wrong_p, wrong_g };

// Linear main effects on every expanded column for g (or the b/c
// regressions) and p; wrong_p and wrong_g replace the corresponding design
// with an intercept-only one.
NuisanceRecipe dgp_recipe(const DgpSpec& spec, Misspecification miss = Misspecification::none,
                          bool with_selection = false);

// A small well-specified binary DGP used by selftest and the examples.
DgpSpec standard_binary_dgp(StudyDesign design = StudyDesign::non_nested, Eigen::Index n = 2000,
                            double eta_true = 0.5);

}  // namespace tiltrisk
