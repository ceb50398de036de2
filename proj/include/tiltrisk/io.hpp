#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "tiltrisk/curve.hpp"
#include "tiltrisk/table.hpp"

namespace tiltrisk {

// Shortest round-trip decimal form; "nan", "inf" and "-inf" for non-finite values.
std::string format_number(double value);
// Parses a whole cell as a double; returns false on anything else.
bool parse_number(std::string_view cell, double& out);

struct CsvData {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
};

// Comma-separated, first line is the header. Double-quoted cells may contain
// commas; "" inside quotes is a literal quote.
CsvData parse_csv(std::string_view text);
CsvData read_csv(const std::filesystem::path& path);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, std::string_view content);

struct TableSchema {
    StudyDesign design = StudyDesign::non_nested;
    std::vector<std::string> covariates;
    std::string s_column = "s";
    std::string y_column = "y";
};

struct LoadedTable {
    ObservationTable table;
    Eigen::Index ignored_target_outcomes = 0;  // y cells filled on s=0 rows
};

// Requires the s, y and covariate columns. Errors name the data row (1-based).
LoadedTable table_from_csv(const CsvData& csv, const TableSchema& schema);
LoadedTable load_table(const std::filesystem::path& path, const TableSchema& schema);

// s, y and covariate columns; y is left empty on target rows.
std::string table_csv(const ObservationTable& table);

inline constexpr std::string_view kCurveHeader = "eta,estimate,se,ci_lo,ci_hi,diag_max_weight,diag_clip_count,status";

std::string curve_csv(const std::vector<CurveRow>& rows);
std::vector<CurveRow> parse_curve_csv(std::string_view text);

}  // namespace tiltrisk
