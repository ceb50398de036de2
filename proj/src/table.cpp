#include "tiltrisk/table.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "tiltrisk/error.hpp"

namespace tiltrisk {

StudyDesign parse_design(std::string_view name) {
    if (name == "nested") return StudyDesign::nested;
    if (name == "non-nested" || name == "non_nested" || name == "nonnested") return StudyDesign::non_nested;
    throw ConfigError("unknown design '" + std::string(name) + "' (expected nested, non-nested)");
}

std::string to_string(StudyDesign design) {
    return design == StudyDesign::nested ? "nested" : "non-nested";
}

Eigen::Index ObservationTable::n_source() const { return s.count(); }

Eigen::Index ObservationTable::n_target() const { return rows() - n_source(); }

void ObservationTable::validate() const {
    const Eigen::Index n = rows();
    if (x.rows() != n || y.size() != n) {
        std::ostringstream msg;
        msg << "table columns disagree on row count: s=" << n << " x=" << x.rows() << " y=" << y.size();
        throw DataError(msg.str());
    }
    if (!covariate_names.empty() && static_cast<Eigen::Index>(covariate_names.size()) != x.cols()) {
        throw DataError("covariate name count does not match covariate columns");
    }
    for (Eigen::Index i = 0; i < n; ++i) {
        if (s(i) != 0 && s(i) != 1) {
            std::ostringstream msg;
            msg << "row " << i << ": s must be 0 or 1, got " << s(i);
            throw DataError(msg.str());
        }
        if (s(i) == 1 && !std::isfinite(y(i))) {
            std::ostringstream msg;
            msg << "row " << i << ": source row has no outcome";
            throw DataError(msg.str());
        }
        if (!x.row(i).allFinite()) {
            std::ostringstream msg;
            msg << "row " << i << ": covariates must be finite";
            throw DataError(msg.str());
        }
    }
    const Eigen::Index n1 = n_source();
    if (n1 == 0) throw DataError("table has no source (s=1) rows");
    if (design == StudyDesign::non_nested && n1 == n) {
        throw DataError("non-nested table has no target (s=0) rows");
    }
}

ObservationTable ObservationTable::subset(std::span<const Eigen::Index> idx) const {
    ObservationTable out;
    out.design = design;
    out.covariate_names = covariate_names;
    const auto m = static_cast<Eigen::Index>(idx.size());
    out.s.resize(m);
    out.y.resize(m);
    out.x.resize(m, x.cols());
    const bool model = has_model();
    if (model) {
        out.pred.resize(m);
        out.loss.resize(m);
    }
    for (Eigen::Index k = 0; k < m; ++k) {
        const Eigen::Index i = idx[static_cast<std::size_t>(k)];
        out.s(k) = s(i);
        out.y(k) = y(i);
        out.x.row(k) = x.row(i);
        if (model) {
            out.pred(k) = pred(i);
            out.loss(k) = loss(i);
        }
    }
    return out;
}

ObservationTable ObservationTable::without_row(Eigen::Index row) const {
    std::vector<Eigen::Index> keep;
    keep.reserve(static_cast<std::size_t>(rows()));
    for (Eigen::Index i = 0; i < rows(); ++i) {
        if (i != row) keep.push_back(i);
    }
    return subset(keep);
}

std::vector<Eigen::Index> ObservationTable::source_rows() const {
    std::vector<Eigen::Index> out;
    for (Eigen::Index i = 0; i < rows(); ++i) {
        if (s(i) == 1) out.push_back(i);
    }
    return out;
}

std::vector<Eigen::Index> ObservationTable::target_rows() const {
    std::vector<Eigen::Index> out;
    for (Eigen::Index i = 0; i < rows(); ++i) {
        if (s(i) == 0) out.push_back(i);
    }
    return out;
}

Eigen::Index ObservationTable::column_index(std::string_view name) const {
    for (std::size_t j = 0; j < covariate_names.size(); ++j) {
        if (covariate_names[j] == name) return static_cast<Eigen::Index>(j);
    }
    throw ConfigError("unknown covariate column '" + std::string(name) + "'");
}

ObservationTable make_table(StudyDesign design, Eigen::VectorXi s, Eigen::MatrixXd x, Eigen::VectorXd y,
                            std::vector<std::string> names) {
    ObservationTable table;
    table.design = design;
    table.s = std::move(s);
    table.x = std::move(x);
    table.y = std::move(y);
    if (names.empty()) {
        for (Eigen::Index j = 0; j < table.x.cols(); ++j) names.push_back("x" + std::to_string(j + 1));
    }
    table.covariate_names = std::move(names);
    for (Eigen::Index i = 0; i < table.rows(); ++i) {
        if (table.s(i) == 0) table.y(i) = std::numeric_limits<double>::quiet_NaN();
    }
    table.validate();
    return table;
}

void attach_model(ObservationTable& table, const PredictionModel& model, const LossFunction& loss) {
    model.validate(table.covariates());
    table.pred = model.predict(table.x);
    table.loss = Eigen::VectorXd::Constant(table.rows(), std::numeric_limits<double>::quiet_NaN());
    for (Eigen::Index i = 0; i < table.rows(); ++i) {
        if (table.s(i) == 1) {
            try {
                table.loss(i) = loss(table.y(i), table.pred(i));
            } catch (const DomainError& e) {
                std::ostringstream msg;
                msg << "row " << i << ": " << e.what();
                throw DomainError(msg.str());
            }
        }
    }
}

Eigen::MatrixXd select_rows(const Eigen::MatrixXd& m, std::span<const Eigen::Index> rows) {
    Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), m.cols());
    for (std::size_t k = 0; k < rows.size(); ++k) out.row(static_cast<Eigen::Index>(k)) = m.row(rows[k]);
    return out;
}

Eigen::VectorXd select_rows(const Eigen::VectorXd& v, std::span<const Eigen::Index> rows) {
    Eigen::VectorXd out(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t k = 0; k < rows.size(); ++k) out(static_cast<Eigen::Index>(k)) = v(rows[k]);
    return out;
}

}  // namespace tiltrisk
