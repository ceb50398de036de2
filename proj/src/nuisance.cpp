#include "tiltrisk/nuisance.hpp"

#include <algorithm>

#include "tiltrisk/error.hpp"
#include "tiltrisk/gmm.hpp"
#include "tiltrisk/wls.hpp"

namespace tiltrisk {

OutcomeType parse_outcome_type(std::string_view name) {
    if (name == "binary") return OutcomeType::binary;
    if (name == "continuous") return OutcomeType::continuous;
    throw ConfigError("unknown outcome type '" + std::string(name) + "' (expected binary, continuous)");
}

std::string to_string(OutcomeType type) { return type == OutcomeType::binary ? "binary" : "continuous"; }

Eigen::Index clip_probabilities(Eigen::VectorXd& p, double lo, double hi) {
    Eigen::Index count = 0;
    for (Eigen::Index i = 0; i < p.size(); ++i) {
        const double v = std::clamp(p(i), lo, hi);
        if (v != p(i)) {
            p(i) = v;
            ++count;
        }
    }
    return count;
}

NuisanceSet binary_nuisance(const ObservationTable& table, const Eigen::VectorXd& g, const Eigen::VectorXd& p,
                            const LossFunction& loss, double eta) {
    if (!table.has_model()) throw ConfigError("binary nuisances need predictions attached to the table");
    const Eigen::Index n = table.rows();
    if (g.size() != n || p.size() != n) throw DataError("nuisance vectors must have one value per table row");
    NuisanceSet out;
    out.eta = eta;
    out.p = p;
    out.g = g;
    out.b.resize(n);
    out.c.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double l1 = loss(1.0, table.pred(i));
        const double l0 = loss(0.0, table.pred(i));
        out.c(i) = binary_c(g(i), eta);
        out.b(i) = binary_b(l1, l0, g(i), eta);
    }
    return out;
}

FittedNuisance FittedNuisance::fit(const ObservationTable& table, const NuisanceRecipe& recipe) {
    if (!table.has_model()) throw ConfigError("nuisance fitting needs predictions attached to the table");
    if (recipe.outcome == OutcomeType::binary && recipe.q) {
        throw ConfigError("binary-outcome closed forms require the identity outcome transform q");
    }
    FittedNuisance out;
    out.table_ = table;
    out.recipe_ = recipe;
    out.outcome_basis_ = DesignBasis::bind(recipe.outcome_design, table.x, table.covariate_names);
    if (recipe.selection_design) {
        out.selection_basis_ = DesignBasis::bind(*recipe.selection_design, table.x, table.covariate_names);
    }

    if (recipe.outcome == OutcomeType::binary) {
        const auto src = table.source_rows();
        const GlmFit g_fit =
            fit_logistic(out.outcome_basis_, select_rows(table.x, src), select_rows(table.y, src));
        out.g_ = g_fit.predict(table.x);
        out.g_diag_ = FitDiagnostics{g_fit.converged, g_fit.iterations, g_fit.ridge_fallback};
    }

    if (table.n_target() > 0) {
        const DesignBasis p_basis = DesignBasis::bind(recipe.membership_design, table.x, table.covariate_names);
        const GlmFit p_fit = fit_logistic(p_basis, table.x, table.s.cast<double>());
        out.p_ = p_fit.predict(table.x);
        out.p_diag_ = FitDiagnostics{p_fit.converged, p_fit.iterations, p_fit.ridge_fallback};
        out.p_clip_count_ = clip_probabilities(out.p_, recipe.p_clip_low, recipe.p_clip_high);
    } else {
        // Every row is a source row; the membership probability is one.
        out.p_ = Eigen::VectorXd::Ones(table.rows());
    }
    return out;
}

NuisanceSet FittedNuisance::at(double eta) const {
    NuisanceSet out;
    const Tilt tilt_spec = tilt(eta);
    if (recipe_.outcome == OutcomeType::binary) {
        out = binary_nuisance(table_, *g_, p_, recipe_.loss, eta);
    } else {
        const auto src = table_.source_rows();
        const Eigen::MatrixXd xs = select_rows(table_.x, src);
        const Eigen::VectorXd ys = select_rows(table_.y, src);
        const Eigen::VectorXd ls = select_rows(table_.loss, src);
        const WlsFit b_fit = fit_b_continuous(outcome_basis_, xs, ls, tilt_spec, ys);
        const WlsFit c_fit = fit_c_continuous(outcome_basis_, xs, tilt_spec, ys);
        out.eta = eta;
        out.p = p_;
        out.b = b_fit.predict(table_.x);
        const ClippedValues c = c_fit.predict_floored(table_.x, kNormalizerFloor);
        out.c = c.values;
        out.c_clip_count = c.clipped;
    }
    out.p_clip_count = p_clip_count_;
    if (selection_basis_) {
        const ParametricA a_fit = fit_a_gmm(*selection_basis_, table_, tilt_spec);
        out.a = a_fit.predict(table_.x);
    }
    return out;
}

}  // namespace tiltrisk
