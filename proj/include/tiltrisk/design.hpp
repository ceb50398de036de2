#pragma once

#include <string>
#include <vector>

#include <Eigen/Core>

namespace tiltrisk {

enum class BasisKind { linear, spline };

struct DesignTerm {
    Eigen::Index column = 0;
    BasisKind basis = BasisKind::linear;
    int degree = 3;
    int interior_knots = 0;
};

// Which covariates enter a nuisance regression and how. Spline terms use a
// B-spline basis with interior knots at empirical quantiles.
struct DesignSpec {
    std::vector<DesignTerm> terms;
    bool intercept = true;

    static DesignSpec intercept_only();
    static DesignSpec linear(const std::vector<Eigen::Index>& columns);
    // Linear main effects, except `spline_columns` which get spline terms.
    static DesignSpec with_splines(const std::vector<Eigen::Index>& columns,
                                   const std::vector<Eigen::Index>& spline_columns, int degree,
                                   int interior_knots);

    void validate() const;
};

// Clamped knot vector of a degree-p spline: boundary knots repeated p+1 times.
struct SplineKnots {
    int degree = 3;
    Eigen::VectorXd knots;

    Eigen::Index basis_size() const { return knots.size() - degree - 1; }
};

SplineKnots place_knots(const Eigen::VectorXd& column, int degree, int interior_knots);

// Evaluates all basis functions at each value (values outside the boundary
// knots are clamped onto them). Rows sum to one.
Eigen::MatrixXd bspline_basis(const Eigen::VectorXd& values, const SplineKnots& knots);

// degree + interior_knots + 1 basis columns.
Eigen::MatrixXd spline_expand(const Eigen::VectorXd& column, int degree, int interior_knots);

// A DesignSpec with spline knots frozen from reference covariates, so the
// same basis can be evaluated on any rows. When an intercept is present the
// first basis column of every spline term is dropped to keep full rank.
class DesignBasis {
public:
    DesignBasis() = default;

    static DesignBasis bind(const DesignSpec& spec, const Eigen::MatrixXd& covariates,
                            const std::vector<std::string>& names = {});

    Eigen::MatrixXd matrix(const Eigen::MatrixXd& covariates) const;
    Eigen::Index cols() const { return static_cast<Eigen::Index>(column_names_.size()); }
    const std::vector<std::string>& column_names() const { return column_names_; }
    const DesignSpec& spec() const { return spec_; }
    bool has_intercept() const { return spec_.intercept; }

private:
    DesignSpec spec_;
    std::vector<SplineKnots> knots_;  // one per term; empty knots for linear terms
    std::vector<std::string> column_names_;
};

}  // namespace tiltrisk
