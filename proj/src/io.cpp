#include "tiltrisk/io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <unordered_map>

#include "tiltrisk/error.hpp"

namespace tiltrisk {

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

std::vector<std::string> split_line(std::string_view line, std::size_t line_no) {
    std::vector<std::string> cells;
    std::string cell;
    bool quoted = false;
    for (std::size_t k = 0; k < line.size(); ++k) {
        const char ch = line[k];
        if (quoted) {
            if (ch == '"' && k + 1 < line.size() && line[k + 1] == '"') {
                cell.push_back('"');
                ++k;
            } else if (ch == '"') {
                quoted = false;
            } else {
                cell.push_back(ch);
            }
        } else if (ch == '"') {
            quoted = true;
        } else if (ch == ',') {
            cells.emplace_back(trim(cell));
            cell.clear();
        } else {
            cell.push_back(ch);
        }
    }
    if (quoted) throw DataError("line " + std::to_string(line_no) + ": unterminated quoted cell");
    cells.emplace_back(trim(cell));
    return cells;
}

std::string row_label(std::size_t row) {
    return "row " + std::to_string(row + 1) + " (line " + std::to_string(row + 2) + ")";
}

std::string optional_number(const std::optional<double>& v) { return v ? format_number(*v) : std::string(); }

std::optional<double> parse_optional(const std::string& cell, std::size_t row, const char* column) {
    if (cell.empty()) return std::nullopt;
    double v;
    if (!parse_number(cell, v)) throw DataError(row_label(row) + ": column " + column + " is not numeric");
    return v;
}

}  // namespace

std::string format_number(double value) {
    if (std::isnan(value)) return "nan";
    if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, value);
    return std::string(buf, res.ptr);
}

bool parse_number(std::string_view cell, double& out) {
    cell = trim(cell);
    if (cell.empty()) return false;
    if (cell == "nan" || cell == "NaN") {
        out = std::numeric_limits<double>::quiet_NaN();
        return true;
    }
    if (cell == "inf" || cell == "-inf") {
        out = cell.front() == '-' ? -std::numeric_limits<double>::infinity() : std::numeric_limits<double>::infinity();
        return true;
    }
    if (cell.front() == '+') cell.remove_prefix(1);
    const auto res = std::from_chars(cell.data(), cell.data() + cell.size(), out);
    return res.ec == std::errc() && res.ptr == cell.data() + cell.size();
}

CsvData parse_csv(std::string_view text) {
    CsvData out;
    std::size_t line_no = 0;
    bool have_header = false;
    while (!text.empty()) {
        const auto nl = text.find('\n');
        std::string_view line = text.substr(0, nl);
        text = nl == std::string_view::npos ? std::string_view() : text.substr(nl + 1);
        ++line_no;
        if (trim(line).empty()) continue;
        auto cells = split_line(line, line_no);
        if (!have_header) {
            out.header = std::move(cells);
            have_header = true;
            continue;
        }
        if (cells.size() != out.header.size()) {
            std::ostringstream msg;
            msg << "line " << line_no << ": expected " << out.header.size() << " cells, found " << cells.size();
            throw DataError(msg.str());
        }
        out.rows.push_back(std::move(cells));
    }
    if (!have_header) throw DataError("CSV input is empty");
    return out;
}

std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void write_text_file(const std::filesystem::path& path, std::string_view content) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw ConfigError("cannot write " + path.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw ConfigError("failed writing " + path.string());
}

CsvData read_csv(const std::filesystem::path& path) { return parse_csv(read_text_file(path)); }

LoadedTable table_from_csv(const CsvData& csv, const TableSchema& schema) {
    std::unordered_map<std::string, std::size_t> index;
    for (std::size_t k = 0; k < csv.header.size(); ++k) index.emplace(csv.header[k], k);
    auto column = [&](const std::string& name) {
        const auto it = index.find(name);
        if (it == index.end()) throw DataError("CSV is missing required column '" + name + "'");
        return it->second;
    };
    if (schema.covariates.empty()) throw ConfigError("no covariate columns configured");
    const std::size_t s_col = column(schema.s_column);
    const std::size_t y_col = column(schema.y_column);
    std::vector<std::size_t> x_cols;
    for (const auto& name : schema.covariates) x_cols.push_back(column(name));

    const auto n = static_cast<Eigen::Index>(csv.rows.size());
    Eigen::VectorXi s(n);
    Eigen::MatrixXd x(n, static_cast<Eigen::Index>(x_cols.size()));
    Eigen::VectorXd y(n);
    LoadedTable out;
    for (std::size_t r = 0; r < csv.rows.size(); ++r) {
        const auto& cells = csv.rows[r];
        const auto i = static_cast<Eigen::Index>(r);
        const std::string& sv = cells[s_col];
        if (sv == "1") {
            s(i) = 1;
        } else if (sv == "0") {
            s(i) = 0;
        } else {
            throw DataError(row_label(r) + ": column '" + schema.s_column + "' must be 0 or 1, found '" + sv + "'");
        }
        const std::string& yv = cells[y_col];
        if (s(i) == 1) {
            if (yv.empty()) throw DataError(row_label(r) + ": source row (s=1) has an empty outcome");
            if (!parse_number(yv, y(i)) || !std::isfinite(y(i))) {
                throw DataError(row_label(r) + ": outcome '" + yv + "' is not a finite number");
            }
        } else {
            y(i) = std::numeric_limits<double>::quiet_NaN();
            if (!yv.empty()) ++out.ignored_target_outcomes;
        }
        for (std::size_t j = 0; j < x_cols.size(); ++j) {
            const std::string& cell = cells[x_cols[j]];
            const std::string& name = schema.covariates[j];
            if (cell.empty()) throw DataError(row_label(r) + ": missing value for covariate '" + name + "'");
            double v;
            if (!parse_number(cell, v) || !std::isfinite(v)) {
                throw DataError(row_label(r) + ": covariate '" + name + "' value '" + cell + "' is not a finite number");
            }
            x(i, static_cast<Eigen::Index>(j)) = v;
        }
    }
    if (n == 0) throw DataError("CSV has no data rows");
    if (s.sum() == 0) throw DataError("CSV has no source rows (s=1)");
    if (schema.design == StudyDesign::non_nested && s.sum() == n) {
        throw DataError("CSV has no target rows (s=0); a non-nested analysis needs both");
    }
    out.table = make_table(schema.design, std::move(s), std::move(x), std::move(y), schema.covariates);
    return out;
}

LoadedTable load_table(const std::filesystem::path& path, const TableSchema& schema) {
    return table_from_csv(read_csv(path), schema);
}

std::string table_csv(const ObservationTable& table) {
    std::ostringstream out;
    out << "s,y";
    for (const auto& name : table.covariate_names) out << ',' << name;
    out << '\n';
    for (Eigen::Index i = 0; i < table.rows(); ++i) {
        out << table.s(i) << ',';
        if (table.s(i) == 1) out << format_number(table.y(i));
        for (Eigen::Index j = 0; j < table.covariates(); ++j) out << ',' << format_number(table.x(i, j));
        out << '\n';
    }
    return out.str();
}

std::string curve_csv(const std::vector<CurveRow>& rows) {
    std::ostringstream out;
    out << kCurveHeader << '\n';
    for (const auto& r : rows) {
        out << format_number(r.eta) << ',' << format_number(r.estimate) << ',' << optional_number(r.se) << ','
            << optional_number(r.ci_lo) << ',' << optional_number(r.ci_hi) << ',' << format_number(r.max_weight)
            << ',' << r.clip_count << ',' << to_string(r.status) << '\n';
    }
    return out.str();
}

std::vector<CurveRow> parse_curve_csv(std::string_view text) {
    const CsvData csv = parse_csv(text);
    std::string header;
    for (std::size_t k = 0; k < csv.header.size(); ++k) header += (k ? "," : "") + csv.header[k];
    if (header != kCurveHeader) throw DataError("unexpected curve CSV header: " + header);
    std::vector<CurveRow> rows;
    for (std::size_t r = 0; r < csv.rows.size(); ++r) {
        const auto& c = csv.rows[r];
        CurveRow row;
        if (!parse_number(c[0], row.eta) || !parse_number(c[1], row.estimate) || !parse_number(c[5], row.max_weight)) {
            throw DataError(row_label(r) + ": malformed curve row");
        }
        row.se = parse_optional(c[2], r, "se");
        row.ci_lo = parse_optional(c[3], r, "ci_lo");
        row.ci_hi = parse_optional(c[4], r, "ci_hi");
        double clip;
        if (!parse_number(c[6], clip)) throw DataError(row_label(r) + ": malformed clip count");
        row.clip_count = static_cast<Eigen::Index>(clip);
        row.status = parse_point_status(c[7]);
        rows.push_back(row);
    }
    return rows;
}

}  // namespace tiltrisk
