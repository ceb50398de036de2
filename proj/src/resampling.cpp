#include "tiltrisk/resampling.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>
#include <sstream>
#include <thread>

#include "tiltrisk/error.hpp"

namespace tiltrisk {

namespace {

constexpr double kMaxFailureFraction = 0.2;
const double kNaN = std::numeric_limits<double>::quiet_NaN();

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

// Runs fn(0..count-1) over `threads` workers; each index is handled once.
template <typename Fn>
void run_indexed(int count, int threads, Fn&& fn) {
    threads = std::clamp(threads, 1, std::max(1, count));
    if (threads == 1) {
        for (int r = 0; r < count; ++r) fn(r);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(threads));
    for (int t = 0; t < threads; ++t) {
        pool.emplace_back([&, t] {
            for (int r = t; r < count; r += threads) fn(r);
        });
    }
    for (auto& th : pool) th.join();
}

// Sample standard deviation of the finite entries; deviations are taken from
// the first finite entry so identical replicates give exactly zero.
std::pair<double, int> finite_sd(const std::vector<double>& values) {
    double anchor = kNaN;
    for (double v : values) {
        if (std::isfinite(v)) {
            anchor = v;
            break;
        }
    }
    int m = 0;
    double sum = 0.0;
    for (double v : values) {
        if (std::isfinite(v)) {
            sum += v - anchor;
            ++m;
        }
    }
    if (m < 2) return {kNaN, m};
    const double mean = sum / m;
    double ss = 0.0;
    for (double v : values) {
        if (std::isfinite(v)) ss += (v - anchor - mean) * (v - anchor - mean);
    }
    return {std::sqrt(ss / (m - 1)), m};
}

IntervalEstimate wald(double estimate, double se, double level) {
    IntervalEstimate out;
    out.estimate = estimate;
    out.se = se;
    const double z = normal_quantile(1.0 - (1.0 - level) / 2.0);
    out.lo = estimate - z * se;
    out.hi = estimate + z * se;
    return out;
}

}  // namespace

ResampleMethod parse_resample_method(std::string_view name) {
    if (name == "none") return ResampleMethod::none;
    if (name == "bootstrap") return ResampleMethod::bootstrap;
    if (name == "jackknife") return ResampleMethod::jackknife;
    throw ConfigError("unknown resampling method '" + std::string(name) + "' (expected none, bootstrap, jackknife)");
}

std::string to_string(ResampleMethod method) {
    switch (method) {
    case ResampleMethod::none: return "none";
    case ResampleMethod::bootstrap: return "bootstrap";
    case ResampleMethod::jackknife: return "jackknife";
    }
    return "unknown";
}

void ResampleConfig::validate() const {
    if (method == ResampleMethod::bootstrap && replicates < 2) {
        throw ConfigError("bootstrap needs at least 2 replicates");
    }
    if (!(level > 0.0 && level < 1.0)) throw ConfigError("confidence level must lie in (0,1)");
    if (threads < 1) throw ConfigError("thread count must be at least 1");
}

ResampleConfig ResampleConfig::defaults_for(StudyDesign design, std::uint64_t seed) {
    ResampleConfig cfg;
    cfg.seed = seed;
    cfg.stratified = design == StudyDesign::non_nested;
    return cfg;
}

double normal_quantile(double p) {
    if (!(p > 0.0 && p < 1.0)) throw DomainError("normal quantile needs p in (0,1)");
    // Acklam's rational approximation followed by one Halley step.
    static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
                               1.383577518672690e+02,  -3.066479806614716e+01, 2.506628277459239e+00};
    static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
                               6.680131188771972e+01,  -1.328068155288572e+01};
    static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
                               -2.549732539343734e+00, 4.374664141464968e+00,  2.938163982698783e+00};
    static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
                               3.754408661907416e+00};
    const double plow = 0.02425;
    double x;
    if (p < plow) {
        const double q = std::sqrt(-2.0 * std::log(p));
        x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    } else if (p > 1.0 - plow) {
        const double q = std::sqrt(-2.0 * std::log1p(-p));
        x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    } else {
        const double q = p - 0.5;
        const double r = q * q;
        x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
            (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
    }
    const double e = 0.5 * std::erfc(-x / std::sqrt(2.0)) - p;
    const double u = e * std::sqrt(2.0 * M_PI) * std::exp(x * x / 2.0);
    return x - u / (1.0 + x * u / 2.0);
}

std::mt19937_64 substream(std::uint64_t seed, std::uint64_t index) {
    return std::mt19937_64(splitmix64(seed ^ splitmix64(index + 0x632BE59BD9B4E019ULL)));
}

std::vector<Eigen::Index> bootstrap_indices(const ObservationTable& table, bool stratified, std::mt19937_64& rng) {
    std::vector<Eigen::Index> out;
    out.reserve(static_cast<std::size_t>(table.rows()));
    auto draw_from = [&](const std::vector<Eigen::Index>& pool) {
        if (pool.empty()) return;
        std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
        for (std::size_t k = 0; k < pool.size(); ++k) out.push_back(pool[pick(rng)]);
    };
    if (stratified) {
        draw_from(table.source_rows());
        draw_from(table.target_rows());
    } else {
        std::vector<Eigen::Index> all(static_cast<std::size_t>(table.rows()));
        for (Eigen::Index i = 0; i < table.rows(); ++i) all[static_cast<std::size_t>(i)] = i;
        draw_from(all);
    }
    return out;
}

std::vector<IntervalEstimate> bootstrap_curve(const ObservationTable& table, const CurveEstimator& estimator,
                                              const ResampleConfig& config) {
    config.validate();
    const Eigen::VectorXd full = estimator(table);
    const Eigen::Index k = full.size();
    const int reps = config.replicates;
    std::vector<Eigen::VectorXd> draws(static_cast<std::size_t>(reps));
    run_indexed(reps, config.threads, [&](int r) {
        auto rng = substream(config.seed, static_cast<std::uint64_t>(r));
        const auto idx = bootstrap_indices(table, config.stratified, rng);
        Eigen::VectorXd value;
        try {
            value = estimator(table.subset(idx));
            if (value.size() != k) value = Eigen::VectorXd::Constant(k, kNaN);
        } catch (const std::exception&) {
            value = Eigen::VectorXd::Constant(k, kNaN);
        }
        draws[static_cast<std::size_t>(r)] = std::move(value);
    });

    std::vector<IntervalEstimate> out(static_cast<std::size_t>(k));
    std::vector<double> column(static_cast<std::size_t>(reps));
    for (Eigen::Index j = 0; j < k; ++j) {
        for (int r = 0; r < reps; ++r) column[static_cast<std::size_t>(r)] = draws[static_cast<std::size_t>(r)](j);
        const auto [sd, valid] = finite_sd(column);
        const int failures = reps - valid;
        IntervalEstimate est;
        if (std::isfinite(full(j)) && failures <= kMaxFailureFraction * reps && std::isfinite(sd)) {
            est = wald(full(j), sd, config.level);
        } else {
            est.estimate = full(j);
            est.se = est.lo = est.hi = kNaN;
        }
        est.failures = failures;
        est.replicates = reps;
        out[static_cast<std::size_t>(j)] = est;
    }
    return out;
}

IntervalEstimate bootstrap_ci(const ObservationTable& table, const ScalarEstimator& estimator,
                              const ResampleConfig& config) {
    const auto curve = bootstrap_curve(
        table, [&](const ObservationTable& t) { return Eigen::VectorXd::Constant(1, estimator(t)); }, config);
    const IntervalEstimate& est = curve.front();
    if (est.failures > kMaxFailureFraction * est.replicates) {
        std::ostringstream msg;
        msg << "bootstrap: " << est.failures << " of " << est.replicates << " replicates failed";
        throw NumericError(msg.str());
    }
    if (!std::isfinite(est.se)) throw NumericError("bootstrap: standard error is not finite");
    return est;
}

std::vector<IntervalEstimate> jackknife_curve(const ObservationTable& table, const CurveEstimator& estimator,
                                              double level, int threads) {
    const Eigen::Index n = table.rows();
    if (n < 3) throw DataError("jackknife needs at least 3 rows");
    if (!(level > 0.0 && level < 1.0)) throw ConfigError("confidence level must lie in (0,1)");
    const Eigen::VectorXd full = estimator(table);
    const Eigen::Index k = full.size();
    std::vector<Eigen::VectorXd> loo(static_cast<std::size_t>(n));
    std::vector<std::string> errors(static_cast<std::size_t>(n));
    run_indexed(static_cast<int>(n), threads, [&](int i) {
        try {
            loo[static_cast<std::size_t>(i)] = estimator(table.without_row(i));
        } catch (const std::exception& e) {
            errors[static_cast<std::size_t>(i)] = e.what();
        }
    });
    for (Eigen::Index i = 0; i < n; ++i) {
        if (!errors[static_cast<std::size_t>(i)].empty()) {
            std::ostringstream msg;
            msg << "jackknife: estimator failed with row " << i + 1 << " left out: " << errors[static_cast<std::size_t>(i)];
            throw NumericError(msg.str());
        }
    }

    std::vector<IntervalEstimate> out(static_cast<std::size_t>(k));
    const auto nd = static_cast<double>(n);
    for (Eigen::Index j = 0; j < k; ++j) {
        bool ok = std::isfinite(full(j));
        const double anchor = loo[0](j);
        double sum = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) {
            const double v = loo[static_cast<std::size_t>(i)](j);
            ok = ok && std::isfinite(v);
            sum += v - anchor;
        }
        IntervalEstimate est;
        est.replicates = static_cast<int>(n);
        if (!ok) {
            est.estimate = full(j);
            est.se = est.lo = est.hi = kNaN;
            est.failures = 1;
        } else {
            const double mean = sum / nd;
            double ss = 0.0;
            for (Eigen::Index i = 0; i < n; ++i) {
                const double dev = loo[static_cast<std::size_t>(i)](j) - anchor - mean;
                ss += dev * dev;
            }
            est = wald(full(j), std::sqrt((nd - 1.0) / nd * ss), level);
            est.replicates = static_cast<int>(n);
        }
        out[static_cast<std::size_t>(j)] = est;
    }
    return out;
}

IntervalEstimate jackknife_ci(const ObservationTable& table, const ScalarEstimator& estimator, double level) {
    const auto curve = jackknife_curve(
        table, [&](const ObservationTable& t) { return Eigen::VectorXd::Constant(1, estimator(t)); }, level);
    if (!std::isfinite(curve.front().se)) throw NumericError("jackknife: estimator returned a non-finite value");
    return curve.front();
}

}  // namespace tiltrisk
