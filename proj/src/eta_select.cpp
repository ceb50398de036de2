#include "tiltrisk/eta_select.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <sstream>

#include "tiltrisk/error.hpp"
#include "tiltrisk/tilt.hpp"

namespace tiltrisk {

namespace {

// Keeps anchored prevalences strictly inside (0,1).
constexpr double kPrevalenceMargin = 1e-6;

void require_rows(const ObservationTable& table, const Eigen::VectorXd& v, const char* what) {
    if (v.size() != table.rows()) {
        throw DataError(std::string(what) + " must have one value per table row");
    }
}

std::string range_message(const char* what, double target, const AttainableRange& r) {
    std::ostringstream msg;
    msg << what << " " << target << " is not attainable; the tilt can only reach the open interval (" << r.lo << ", "
        << r.hi << ")";
    return msg.str();
}

double solve_increasing(const std::function<double(double)>& f, double target, const AttainableRange& range,
                        const char* what, const RootOptions& options) {
    if (!(range.lo < range.hi)) {
        throw DataError(std::string("every fitted outcome probability is 0 or 1; the implied ") + what +
                        " does not depend on eta");
    }
    if (!(target > range.lo && target < range.hi)) throw DataError(range_message(what, target, range));

    double lo = -options.initial_half_width;
    double hi = options.initial_half_width;
    while (f(lo) > target) {
        if (lo <= -options.max_abs_eta) throw NumericError(range_message(what, target, range));
        lo = std::max(2.0 * lo, -options.max_abs_eta);
    }
    while (f(hi) < target) {
        if (hi >= options.max_abs_eta) throw NumericError(range_message(what, target, range));
        hi = std::min(2.0 * hi, options.max_abs_eta);
    }
    double mid = 0.5 * (lo + hi);
    for (int it = 0; it < options.max_iterations; ++it) {
        mid = 0.5 * (lo + hi);
        const double fm = f(mid) - target;
        if (fm == 0.0) return mid;
        if (fm < 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
        if (hi - lo <= 1e-13 * std::max(1.0, std::abs(mid))) break;
    }
    mid = 0.5 * (lo + hi);
    if (!(std::abs(f(mid) - target) <= options.function_tolerance)) {
        std::ostringstream msg;
        msg << "eta root finder stopped with residual " << std::abs(f(mid) - target);
        throw NumericError(msg.str());
    }
    return mid;
}

}  // namespace

void PrevalenceAnchor::validate() const {
    if (!(prevalence > 0.0 && prevalence < 1.0)) {
        throw ConfigError("prevalence anchor must lie in (0,1)");
    }
    if (!(lower_multiplier > 0.0 && lower_multiplier <= upper_multiplier)) {
        throw ConfigError("prevalence multipliers must satisfy 0 < lower <= upper");
    }
}

double implied_prevalence_nonnested(const ObservationTable& table, const Eigen::VectorXd& g, double eta) {
    require_rows(table, g, "g");
    double sum = 0.0;
    Eigen::Index n0 = 0;
    for (Eigen::Index i = 0; i < table.rows(); ++i) {
        if (table.s(i) != 0) continue;
        sum += tilted_bernoulli(g(i), eta);
        ++n0;
    }
    if (n0 == 0) throw DataError("prevalence anchoring needs target rows");
    return sum / static_cast<double>(n0);
}

double implied_prevalence_nested(const ObservationTable& table, const Eigen::VectorXd& g, const Eigen::VectorXd& p,
                                 double eta) {
    require_rows(table, g, "g");
    require_rows(table, p, "p");
    double sum = 0.0;
    for (Eigen::Index i = 0; i < table.rows(); ++i) {
        sum += p(i) * g(i) + (1.0 - p(i)) * tilted_bernoulli(g(i), eta);
    }
    return sum / static_cast<double>(table.rows());
}

AttainableRange attainable_nonnested(const ObservationTable& table, const Eigen::VectorXd& g) {
    require_rows(table, g, "g");
    double ones = 0.0, positive = 0.0;
    Eigen::Index n0 = 0;
    for (Eigen::Index i = 0; i < table.rows(); ++i) {
        if (table.s(i) != 0) continue;
        ++n0;
        if (g(i) == 1.0) ones += 1.0;
        if (g(i) > 0.0) positive += 1.0;
    }
    if (n0 == 0) throw DataError("prevalence anchoring needs target rows");
    return {ones / static_cast<double>(n0), positive / static_cast<double>(n0)};
}

AttainableRange attainable_nested(const ObservationTable& table, const Eigen::VectorXd& g, const Eigen::VectorXd& p) {
    require_rows(table, g, "g");
    require_rows(table, p, "p");
    double lo = 0.0, hi = 0.0;
    for (Eigen::Index i = 0; i < table.rows(); ++i) {
        const double fixed = p(i) * g(i);
        lo += fixed + (1.0 - p(i)) * (g(i) == 1.0 ? 1.0 : 0.0);
        hi += fixed + (1.0 - p(i)) * (g(i) > 0.0 ? 1.0 : 0.0);
    }
    const auto n = static_cast<double>(table.rows());
    return {lo / n, hi / n};
}

double eta_from_prevalence_nonnested(const ObservationTable& table, const Eigen::VectorXd& g, double mu,
                                     const RootOptions& options) {
    const AttainableRange range = attainable_nonnested(table, g);
    return solve_increasing([&](double eta) { return implied_prevalence_nonnested(table, g, eta); }, mu, range,
                            "target prevalence", options);
}

double eta_from_prevalence_nested(const ObservationTable& table, const Eigen::VectorXd& g, const Eigen::VectorXd& p,
                                  double alpha, const RootOptions& options) {
    const AttainableRange range = attainable_nested(table, g, p);
    return solve_increasing([&](double eta) { return implied_prevalence_nested(table, g, p, eta); }, alpha, range,
                            "marginal prevalence", options);
}

std::vector<double> eta_lattice(double lo, double hi, double step) {
    if (!(step > 0.0) || !std::isfinite(step)) throw ConfigError("eta grid step must be positive");
    if (!(lo <= hi)) throw ConfigError("eta grid lower end exceeds upper end");
    if (lo == hi) return {lo};
    const auto k_lo = static_cast<long long>(std::floor(lo / step + 1e-9));
    const auto k_hi = static_cast<long long>(std::ceil(hi / step - 1e-9));
    std::vector<double> grid;
    grid.reserve(static_cast<std::size_t>(k_hi - k_lo + 1));
    for (long long k = k_lo; k <= k_hi; ++k) {
        // snap to 12 decimals so lattice points print cleanly
        grid.push_back(std::round(static_cast<double>(k) * step * 1e12) / 1e12);
    }
    if (grid.size() == 1) grid.push_back(std::round(static_cast<double>(k_hi + 1) * step * 1e12) / 1e12);
    return grid;
}

EtaRange eta_grid_from_prevalence_range(const ObservationTable& table, const Eigen::VectorXd& g,
                                        const Eigen::VectorXd& p, const PrevalenceAnchor& anchor, double step) {
    anchor.validate();
    EtaRange out;
    out.prevalence_lo = std::clamp(anchor.prevalence * anchor.lower_multiplier, kPrevalenceMargin,
                                   1.0 - kPrevalenceMargin);
    out.prevalence_hi = std::clamp(anchor.prevalence * anchor.upper_multiplier, kPrevalenceMargin,
                                   1.0 - kPrevalenceMargin);
    if (table.design == StudyDesign::nested) {
        out.eta_lo = eta_from_prevalence_nested(table, g, p, out.prevalence_lo);
        out.eta_hi = eta_from_prevalence_nested(table, g, p, out.prevalence_hi);
    } else {
        out.eta_lo = eta_from_prevalence_nonnested(table, g, out.prevalence_lo);
        out.eta_hi = eta_from_prevalence_nonnested(table, g, out.prevalence_hi);
    }
    out.grid = eta_lattice(out.eta_lo, out.eta_hi, step);
    return out;
}

}  // namespace tiltrisk
