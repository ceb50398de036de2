#pragma once

#include <functional>
#include <optional>

#include <Eigen/Core>

#include "tiltrisk/design.hpp"
#include "tiltrisk/glm.hpp"
#include "tiltrisk/loss.hpp"
#include "tiltrisk/table.hpp"
#include "tiltrisk/tilt.hpp"

namespace tiltrisk {

enum class OutcomeType { binary, continuous };

OutcomeType parse_outcome_type(std::string_view name);
std::string to_string(OutcomeType type);

inline constexpr double kMembershipClipLow = 0.01;
inline constexpr double kMembershipClipHigh = 0.99;

// Nuisance functions evaluated on every row of one table at one eta.
// p: Pr[S=1|X]; c: E[e^{eta q(Y)}|X,S=1]; b: tilted conditional loss;
// a: selection offset (alternative parameterization); g: Pr[Y=1|X,S=1].
struct NuisanceSet {
    double eta = 0.0;
    Eigen::VectorXd p;
    Eigen::VectorXd b;
    Eigen::VectorXd c;
    std::optional<Eigen::VectorXd> a;
    std::optional<Eigen::VectorXd> g;
    Eigen::Index p_clip_count = 0;
    Eigen::Index c_clip_count = 0;
};

// Binary closed forms: c = binary_c(g, eta), b = binary_b(L(1,h), L(0,h), g, eta).
NuisanceSet binary_nuisance(const ObservationTable& table, const Eigen::VectorXd& g, const Eigen::VectorXd& p,
                            const LossFunction& loss, double eta);

// Clips into [lo, hi] and returns the number of values moved.
Eigen::Index clip_probabilities(Eigen::VectorXd& p, double lo = kMembershipClipLow, double hi = kMembershipClipHigh);

// How to fit the nuisance functions for a table.
struct NuisanceRecipe {
    OutcomeType outcome = OutcomeType::binary;
    DesignSpec outcome_design;     // g (binary) or the b/c regressions (continuous)
    DesignSpec membership_design;  // p
    std::optional<DesignSpec> selection_design;  // a, fitted by GMM when present
    LossFunction loss = LossFunction::brier();
    std::function<double(double)> q;  // continuous outcomes only; empty = identity
    double p_clip_low = kMembershipClipLow;
    double p_clip_high = kMembershipClipHigh;
};

struct FitDiagnostics {
    bool converged = true;
    int iterations = 0;
    bool ridge_fallback = false;
};

// The eta-independent part of the nuisance fit (g and p), plus what is
// needed to refresh the eta-dependent parts (b, c, a) at any eta.
class FittedNuisance {
public:
    static FittedNuisance fit(const ObservationTable& table, const NuisanceRecipe& recipe);

    NuisanceSet at(double eta) const;

    const ObservationTable& table() const { return table_; }
    const NuisanceRecipe& recipe() const { return recipe_; }
    const std::optional<Eigen::VectorXd>& g() const { return g_; }
    const Eigen::VectorXd& p() const { return p_; }
    Eigen::Index p_clip_count() const { return p_clip_count_; }
    const FitDiagnostics& g_diagnostics() const { return g_diag_; }
    const FitDiagnostics& p_diagnostics() const { return p_diag_; }

    Tilt tilt(double eta) const { return Tilt(eta, recipe_.q); }

private:
    ObservationTable table_;
    NuisanceRecipe recipe_;
    DesignBasis outcome_basis_;
    std::optional<DesignBasis> selection_basis_;
    std::optional<Eigen::VectorXd> g_;
    Eigen::VectorXd p_;
    Eigen::Index p_clip_count_ = 0;
    FitDiagnostics g_diag_;
    FitDiagnostics p_diag_;
};

}  // namespace tiltrisk
