#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "tiltrisk/loss.hpp"

namespace tiltrisk {

enum class StudyDesign { nested, non_nested };

StudyDesign parse_design(std::string_view name);
std::string to_string(StudyDesign design);

// Observed data: population indicator s (1 source, 0 target), covariates x,
// and outcomes y that are only meaningful on source rows (NaN elsewhere).
// pred and loss are filled by attach_model(); loss is NaN on target rows.
struct ObservationTable {
    StudyDesign design = StudyDesign::non_nested;
    std::vector<std::string> covariate_names;
    Eigen::VectorXi s;
    Eigen::MatrixXd x;
    Eigen::VectorXd y;
    Eigen::VectorXd pred;
    Eigen::VectorXd loss;

    Eigen::Index rows() const { return s.size(); }
    Eigen::Index covariates() const { return x.cols(); }
    Eigen::Index n_source() const;
    Eigen::Index n_target() const;
    bool has_model() const { return pred.size() == rows() && loss.size() == rows(); }
    bool is_source(Eigen::Index i) const { return s(i) == 1; }

    // Throws DataError when an invariant is broken. Non-nested tables need
    // both strata; nested tables need at least one source row.
    void validate() const;

    ObservationTable subset(std::span<const Eigen::Index> rows) const;
    ObservationTable without_row(Eigen::Index row) const;

    std::vector<Eigen::Index> source_rows() const;
    std::vector<Eigen::Index> target_rows() const;

    Eigen::Index column_index(std::string_view name) const;
};

ObservationTable make_table(StudyDesign design, Eigen::VectorXi s, Eigen::MatrixXd x, Eigen::VectorXd y,
                            std::vector<std::string> names = {});

// Caches h(X*, beta) for every row and L(Y, h) for source rows.
void attach_model(ObservationTable& table, const PredictionModel& model, const LossFunction& loss);

// Rows of a matrix selected by index.
Eigen::MatrixXd select_rows(const Eigen::MatrixXd& m, std::span<const Eigen::Index> rows);
Eigen::VectorXd select_rows(const Eigen::VectorXd& v, std::span<const Eigen::Index> rows);

}  // namespace tiltrisk
