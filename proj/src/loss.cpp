#include "tiltrisk/loss.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "tiltrisk/error.hpp"

namespace tiltrisk {

namespace {
// Logit-link predictions are kept strictly inside (0,1).
constexpr double kPredictionClip = 1e-12;
}  // namespace

LossFunction LossFunction::custom(std::function<double(double, double)> fn, std::string name) {
    if (!fn) throw ConfigError("custom loss requires a callable");
    LossFunction loss(LossKind::custom);
    loss.custom_ = std::move(fn);
    loss.custom_name_ = std::move(name);
    return loss;
}

std::string LossFunction::name() const {
    switch (kind_) {
    case LossKind::brier: return "brier";
    case LossKind::squared: return "squared";
    case LossKind::absolute: return "absolute";
    case LossKind::custom: return custom_name_;
    }
    return "unknown";
}

double LossFunction::operator()(double y, double pred) const {
    switch (kind_) {
    case LossKind::brier:
        if (!(y == 0.0 || y == 1.0)) {
            std::ostringstream msg;
            msg << "Brier loss requires a binary outcome, got y=" << y;
            throw DomainError(msg.str());
        }
        if (!(pred >= 0.0 && pred <= 1.0)) {
            std::ostringstream msg;
            msg << "Brier loss requires a prediction in [0,1], got " << pred;
            throw DomainError(msg.str());
        }
        return (y - pred) * (y - pred);
    case LossKind::squared:
        return (y - pred) * (y - pred);
    case LossKind::absolute:
        return std::abs(y - pred);
    case LossKind::custom: {
        const double value = custom_(y, pred);
        if (!(value >= 0.0)) {
            std::ostringstream msg;
            msg << "custom loss '" << custom_name_ << "' returned " << value;
            throw DomainError(msg.str());
        }
        return value;
    }
    }
    return 0.0;
}

double eval_loss(const LossFunction& loss, double y, double pred) { return loss(y, pred); }

LossKind parse_loss_kind(std::string_view name) {
    if (name == "brier") return LossKind::brier;
    if (name == "squared" || name == "squared-error" || name == "mse") return LossKind::squared;
    if (name == "absolute" || name == "absolute-deviation") return LossKind::absolute;
    throw ConfigError("unknown loss '" + std::string(name) + "' (expected brier, squared, absolute)");
}

Link parse_link(std::string_view name) {
    if (name == "logit") return Link::logit;
    if (name == "identity") return Link::identity;
    throw ConfigError("unknown link '" + std::string(name) + "' (expected logit, identity)");
}

std::string to_string(Link link) { return link == Link::logit ? "logit" : "identity"; }

void PredictionModel::validate(Eigen::Index covariate_count) const {
    if (coefficients.size() != static_cast<Eigen::Index>(columns.size()) + 1) {
        std::ostringstream msg;
        msg << "prediction model has " << coefficients.size() << " coefficients but "
            << columns.size() << " columns (+ intercept) selected";
        throw ConfigError(msg.str());
    }
    for (const auto c : columns) {
        if (c < 0 || c >= covariate_count) {
            std::ostringstream msg;
            msg << "prediction model column index " << c << " out of range";
            throw ConfigError(msg.str());
        }
    }
    if (!coefficients.allFinite()) throw ConfigError("prediction model coefficients must be finite");
}

double PredictionModel::predict_row(const Eigen::Ref<const Eigen::RowVectorXd>& x) const {
    double z = coefficients(0);
    for (std::size_t j = 0; j < columns.size(); ++j) {
        z += coefficients(static_cast<Eigen::Index>(j) + 1) * x(columns[j]);
    }
    if (link == Link::identity) return z;
    const double p = z >= 0.0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
    return std::clamp(p, kPredictionClip, 1.0 - kPredictionClip);
}

Eigen::VectorXd PredictionModel::predict(const Eigen::MatrixXd& x) const {
    Eigen::VectorXd out(x.rows());
    for (Eigen::Index i = 0; i < x.rows(); ++i) out(i) = predict_row(x.row(i));
    return out;
}

}  // namespace tiltrisk
