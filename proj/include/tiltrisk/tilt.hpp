#pragma once

// Exponential tilt kernel.
//
// The target-population outcome density is the source density reweighted by
// e^{eta q(y)} and renormalized. For binary outcomes with identity q the tilt
// has closed forms for the tilted probability, the normalizer c(X;eta) and
// the tilted conditional loss b(X;eta); these are the building blocks every
// estimator in the library uses.

#include <cmath>
#include <functional>
#include <limits>
#include <sstream>
#include <string>

#include <Eigen/Core>

#include "tiltrisk/error.hpp"

namespace tiltrisk {

// Above this |eta q(y)| the kernels switch to log-space rearrangements.
inline constexpr double kDirectExponentLimit = 30.0;

template <typename Scalar>
struct TiltSpec {
    Scalar eta = Scalar(0);
    // Monotone outcome transform; empty means identity.
    std::function<Scalar(Scalar)> q;

    TiltSpec() = default;
    explicit TiltSpec(Scalar eta_, std::function<Scalar(Scalar)> q_ = {})
        : eta(eta_), q(std::move(q_)) {}

    bool identity_q() const { return !q; }
    Scalar transform(Scalar y) const { return q ? q(y) : y; }
    Scalar exponent(Scalar y) const { return eta * transform(y); }
};

using Tilt = TiltSpec<double>;

// Throws ConfigError unless eta is finite and q is nondecreasing on an evenly
// spaced probe grid over [lo, hi].
template <typename Scalar>
void validate_tilt(const TiltSpec<Scalar>& tilt, Scalar lo, Scalar hi, int probes = 100) {
    using std::isfinite;
    if (!isfinite(tilt.eta)) {
        throw ConfigError("tilt parameter eta must be finite");
    }
    if (tilt.identity_q()) return;
    if (probes < 2) probes = 2;
    Scalar prev = tilt.q(lo);
    for (int k = 1; k < probes; ++k) {
        const Scalar y = lo + (hi - lo) * Scalar(k) / Scalar(probes - 1);
        const Scalar cur = tilt.q(y);
        if (!(cur >= prev)) {
            std::ostringstream msg;
            msg << "outcome transform q is not nondecreasing near y=" << y;
            throw ConfigError(msg.str());
        }
        prev = cur;
    }
}

template <typename Scalar>
Scalar log_max_value() {
    return std::log(std::numeric_limits<Scalar>::max());
}

// e^{eta q(y)}.
template <typename Scalar>
Scalar tilt_weight(Scalar y, const TiltSpec<Scalar>& tilt) {
    using std::exp;
    using std::isfinite;
    const Scalar z = tilt.exponent(y);
    if (!isfinite(z) || z > log_max_value<Scalar>()) {
        std::ostringstream msg;
        msg << "tilt weight overflows: eta*q(y) = " << z << " at y=" << y
            << " exceeds " << log_max_value<Scalar>();
        throw NumericError(msg.str());
    }
    return exp(z);
}

namespace detail {

template <typename Scalar>
void require_probability(Scalar g, const char* what) {
    if (!(g >= Scalar(0) && g <= Scalar(1))) {
        std::ostringstream msg;
        msg << what << " must lie in [0,1], got " << g;
        throw DomainError(msg.str());
    }
}

template <typename Scalar>
Scalar logistic(Scalar z) {
    using std::exp;
    if (z >= Scalar(0)) return Scalar(1) / (Scalar(1) + exp(-z));
    const Scalar e = exp(z);
    return e / (Scalar(1) + e);
}

}  // namespace detail

// Pr[Y=1 | X, S=0] implied by the tilt: e^eta g / (e^eta g + 1 - g).
template <typename Scalar>
Scalar tilted_bernoulli(Scalar g, Scalar eta) {
    using std::exp;
    using std::log;
    detail::require_probability(g, "outcome probability g");
    if (eta == Scalar(0) || g == Scalar(0) || g == Scalar(1)) return g;
    if (std::abs(eta) <= kDirectExponentLimit) {
        const Scalar e = exp(eta);
        return e * g / (e * g + Scalar(1) - g);
    }
    return detail::logistic(eta + log(g) - std::log1p(-g));
}

// Tilted normalizer E[e^{eta Y} | X, S=1] = e^eta g + 1 - g.
template <typename Scalar>
Scalar binary_c(Scalar g, Scalar eta) {
    using std::exp;
    detail::require_probability(g, "outcome probability g");
    if (eta == Scalar(0)) return Scalar(1);
    if (eta > log_max_value<Scalar>()) {
        std::ostringstream msg;
        msg << "binary normalizer overflows at eta=" << eta;
        throw NumericError(msg.str());
    }
    return exp(eta) * g + Scalar(1) - g;
}

// log of binary_c, finite for any finite eta when 0 < g < 1.
template <typename Scalar>
Scalar log_binary_c(Scalar g, Scalar eta) {
    using std::log;
    detail::require_probability(g, "outcome probability g");
    if (std::abs(eta) <= kDirectExponentLimit) return log(binary_c(g, eta));
    if (g == Scalar(0)) return Scalar(0);
    if (g == Scalar(1)) return eta;
    // log(e^{eta + log g} + e^{log(1-g)})
    const Scalar u = eta + log(g);
    const Scalar v = std::log1p(-g);
    const Scalar m = u > v ? u : v;
    return m + log(std::exp(u - m) + std::exp(v - m));
}

// Tilted conditional loss b(X;eta) for binary Y from the two candidate losses
// l1 = L(1, h) and l0 = L(0, h). Convex combination weighted by the tilted
// probability, so it always lies between l0 and l1.
template <typename Scalar>
Scalar binary_b(Scalar l1, Scalar l0, Scalar g, Scalar eta) {
    const Scalar w = tilted_bernoulli(g, eta);
    return w * l1 + (Scalar(1) - w) * l0;
}

// Selection-model offset a(X;eta) = logit(1 - p) - ln c, where p = Pr[S=1|X].
template <typename Scalar>
Scalar selection_a(Scalar p_source, Scalar c) {
    using std::log;
    if (!(p_source > Scalar(0) && p_source < Scalar(1))) {
        std::ostringstream msg;
        msg << "positivity violation: Pr[S=1|X] = " << p_source << " must lie in (0,1)";
        throw NumericError(msg.str());
    }
    if (!(c > Scalar(0))) {
        std::ostringstream msg;
        msg << "tilted normalizer must be positive, got " << c;
        throw NumericError(msg.str());
    }
    return log((Scalar(1) - p_source) / p_source) - log(c);
}

// Tilted distribution over a finite outcome support:
// e^{eta q(y_k)} p_k / sum_j e^{eta q(y_j)} p_j.
template <typename Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, 1> tilted_probabilities(
    const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& support,
    const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& probs, const TiltSpec<Scalar>& tilt) {
    using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
    if (support.size() != probs.size() || support.size() == 0) {
        throw DomainError("tilted_probabilities: support and probabilities must be nonempty and match");
    }
    Vec z(support.size());
    for (Eigen::Index k = 0; k < support.size(); ++k) z(k) = tilt.exponent(support(k));
    const Scalar shift = z.cwiseAbs().maxCoeff() > kDirectExponentLimit ? z.maxCoeff() : Scalar(0);
    Vec w = ((z.array() - shift).exp() * probs.array()).matrix();
    const Scalar total = w.sum();
    if (!(total > Scalar(0))) {
        throw NumericError("tilted_probabilities: tilted mass is zero");
    }
    return w / total;
}

// Tilted conditional mean of `values` over a finite support.
template <typename Scalar>
Scalar tilted_mean(const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& support,
                   const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& probs,
                   const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& values,
                   const TiltSpec<Scalar>& tilt) {
    return tilted_probabilities(support, probs, tilt).dot(values);
}

}  // namespace tiltrisk
