#include "tiltrisk/design.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "tiltrisk/error.hpp"

namespace tiltrisk {

DesignSpec DesignSpec::intercept_only() { return DesignSpec{}; }

DesignSpec DesignSpec::linear(const std::vector<Eigen::Index>& columns) {
    DesignSpec spec;
    for (const auto c : columns) spec.terms.push_back(DesignTerm{c, BasisKind::linear, 0, 0});
    return spec;
}

DesignSpec DesignSpec::with_splines(const std::vector<Eigen::Index>& columns,
                                    const std::vector<Eigen::Index>& spline_columns, int degree,
                                    int interior_knots) {
    DesignSpec spec;
    for (const auto c : columns) {
        const bool spline = std::find(spline_columns.begin(), spline_columns.end(), c) != spline_columns.end();
        spec.terms.push_back(spline ? DesignTerm{c, BasisKind::spline, degree, interior_knots}
                                    : DesignTerm{c, BasisKind::linear, 0, 0});
    }
    return spec;
}

void DesignSpec::validate() const {
    for (const auto& term : terms) {
        if (term.column < 0) throw ConfigError("design term has a negative column index");
        if (term.basis == BasisKind::spline) {
            if (term.degree < 1 || term.degree > 3) {
                throw ConfigError("spline degree must be 1, 2 or 3, got " + std::to_string(term.degree));
            }
            if (term.interior_knots < 0) throw ConfigError("interior knot count must be >= 0");
        }
    }
    if (!intercept && terms.empty()) throw ConfigError("design has no columns");
}

namespace {

double quantile_sorted(const std::vector<double>& sorted, double prob) {
    const double h = prob * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

// Nonzero basis functions at x for knot span `span` (Cox-de Boor recursion).
void basis_functions(Eigen::Index span, double x, int degree, const Eigen::VectorXd& u, double* out) {
    std::vector<double> left(static_cast<std::size_t>(degree) + 1), right(static_cast<std::size_t>(degree) + 1);
    out[0] = 1.0;
    for (int j = 1; j <= degree; ++j) {
        left[j] = x - u(span + 1 - j);
        right[j] = u(span + j) - x;
        double saved = 0.0;
        for (int r = 0; r < j; ++r) {
            const double temp = out[r] / (right[r + 1] + left[j - r]);
            out[r] = saved + right[r + 1] * temp;
            saved = left[j - r] * temp;
        }
        out[j] = saved;
    }
}

}  // namespace

SplineKnots place_knots(const Eigen::VectorXd& column, int degree, int interior_knots) {
    if (degree < 1 || degree > 3) {
        throw ConfigError("spline degree must be 1, 2 or 3, got " + std::to_string(degree));
    }
    if (interior_knots < 0) throw ConfigError("interior knot count must be >= 0");
    std::vector<double> sorted(column.data(), column.data() + column.size());
    std::sort(sorted.begin(), sorted.end());
    const auto distinct = static_cast<int>(std::unique(sorted.begin(), sorted.end()) - sorted.begin());
    if (distinct < interior_knots + degree + 1) {
        std::ostringstream msg;
        msg << "spline basis needs at least " << interior_knots + degree + 1
            << " distinct values in the column, found " << distinct;
        throw DataError(msg.str());
    }
    sorted.assign(column.data(), column.data() + column.size());
    std::sort(sorted.begin(), sorted.end());
    const double lo = sorted.front();
    const double hi = sorted.back();

    SplineKnots out;
    out.degree = degree;
    out.knots.resize(interior_knots + 2 * (degree + 1));
    Eigen::Index k = 0;
    for (int r = 0; r <= degree; ++r) out.knots(k++) = lo;
    double prev = lo;
    for (int j = 1; j <= interior_knots; ++j) {
        const double knot = quantile_sorted(sorted, static_cast<double>(j) / (interior_knots + 1));
        if (!(knot > prev && knot < hi)) {
            throw DataError("spline interior knots coincide; column has too many ties for the requested knots");
        }
        out.knots(k++) = knot;
        prev = knot;
    }
    for (int r = 0; r <= degree; ++r) out.knots(k++) = hi;
    return out;
}

Eigen::MatrixXd bspline_basis(const Eigen::VectorXd& values, const SplineKnots& knots) {
    const int p = knots.degree;
    const Eigen::Index nb = knots.basis_size();
    const double lo = knots.knots(0);
    const double hi = knots.knots(knots.knots.size() - 1);
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(values.size(), nb);
    std::vector<double> local(static_cast<std::size_t>(p) + 1);
    for (Eigen::Index i = 0; i < values.size(); ++i) {
        const double x = std::clamp(values(i), lo, hi);
        Eigen::Index span = nb - 1;
        if (x < hi) {
            // last index with knots(span) <= x, restricted to [p, nb-1]
            span = p;
            while (span + 1 < nb && knots.knots(span + 1) <= x) ++span;
        }
        basis_functions(span, x, p, knots.knots, local.data());
        for (int r = 0; r <= p; ++r) out(i, span - p + r) = local[static_cast<std::size_t>(r)];
    }
    return out;
}

Eigen::MatrixXd spline_expand(const Eigen::VectorXd& column, int degree, int interior_knots) {
    return bspline_basis(column, place_knots(column, degree, interior_knots));
}

DesignBasis DesignBasis::bind(const DesignSpec& spec, const Eigen::MatrixXd& covariates,
                              const std::vector<std::string>& names) {
    spec.validate();
    DesignBasis out;
    out.spec_ = spec;
    auto name_of = [&](Eigen::Index c) {
        return c < static_cast<Eigen::Index>(names.size()) ? names[static_cast<std::size_t>(c)]
                                                           : "x" + std::to_string(c + 1);
    };
    if (spec.intercept) out.column_names_.push_back("(intercept)");
    for (const auto& term : spec.terms) {
        if (term.column >= covariates.cols()) {
            std::ostringstream msg;
            msg << "design column " << term.column << " out of range (" << covariates.cols() << " covariates)";
            throw ConfigError(msg.str());
        }
        if (term.basis == BasisKind::linear) {
            out.knots_.emplace_back();
            out.column_names_.push_back(name_of(term.column));
            continue;
        }
        out.knots_.push_back(place_knots(covariates.col(term.column), term.degree, term.interior_knots));
        const Eigen::Index nb = out.knots_.back().basis_size();
        for (Eigen::Index b = spec.intercept ? 1 : 0; b < nb; ++b) {
            out.column_names_.push_back(name_of(term.column) + "_bs" + std::to_string(b + 1));
        }
    }
    return out;
}

Eigen::MatrixXd DesignBasis::matrix(const Eigen::MatrixXd& covariates) const {
    Eigen::MatrixXd out(covariates.rows(), cols());
    Eigen::Index c = 0;
    if (spec_.intercept) out.col(c++).setOnes();
    for (std::size_t t = 0; t < spec_.terms.size(); ++t) {
        const auto& term = spec_.terms[t];
        if (term.basis == BasisKind::linear) {
            out.col(c++) = covariates.col(term.column);
            continue;
        }
        const Eigen::MatrixXd basis = bspline_basis(covariates.col(term.column), knots_[t]);
        const Eigen::Index first = spec_.intercept ? 1 : 0;
        const Eigen::Index width = basis.cols() - first;
        out.middleCols(c, width) = basis.rightCols(width);
        c += width;
    }
    return out;
}

}  // namespace tiltrisk
