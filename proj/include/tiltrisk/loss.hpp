#pragma once

#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

namespace tiltrisk {

enum class LossKind { brier, squared, absolute, custom };

// L(y, pred) >= 0. Brier and squared share a formula; Brier additionally
// enforces binary y and pred in [0,1].
class LossFunction {
public:
    LossFunction() = default;
    explicit LossFunction(LossKind kind) : kind_(kind) {}

    static LossFunction brier() { return LossFunction(LossKind::brier); }
    static LossFunction squared() { return LossFunction(LossKind::squared); }
    static LossFunction absolute() { return LossFunction(LossKind::absolute); }
    static LossFunction custom(std::function<double(double, double)> fn, std::string name = "custom");

    LossKind kind() const { return kind_; }
    std::string name() const;
    double operator()(double y, double pred) const;

private:
    LossKind kind_ = LossKind::brier;
    std::function<double(double, double)> custom_;
    std::string custom_name_;
};

double eval_loss(const LossFunction& loss, double y, double pred);

LossKind parse_loss_kind(std::string_view name);

enum class Link { logit, identity };

Link parse_link(std::string_view name);
std::string to_string(Link link);

// Fixed prediction model h(X*, beta): an intercept followed by one
// coefficient per selected covariate column.
struct PredictionModel {
    Eigen::VectorXd coefficients;
    Link link = Link::logit;
    std::vector<Eigen::Index> columns;

    // Throws ConfigError when coefficient length != columns + 1.
    void validate(Eigen::Index covariate_count) const;
    double predict_row(const Eigen::Ref<const Eigen::RowVectorXd>& x) const;
    Eigen::VectorXd predict(const Eigen::MatrixXd& x) const;
};

}  // namespace tiltrisk
