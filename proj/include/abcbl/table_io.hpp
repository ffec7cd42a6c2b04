#pragma once

// Delimited-text persistence.
//
// Matrix files:
//   # <format tag>
//   <col>,<col>,...
//   <value>,<value>,...        one row per draw
// Values are written in shortest round-trip decimal form, so reading a file
// back reproduces every double bit-exactly.
//
// Sidecars are "key = value" lines; the first key is always `format`.

#include <Eigen/Dense>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "abcbl/core.hpp"

namespace abcbl {

inline constexpr const char* kTableFormat = "abcbl-table v1";
inline constexpr const char* kTableMetaFormat = "abcbl-table-meta v1";

std::string format_double(double value);
double parse_double(const std::string& text);

using KeyValues = std::vector<std::pair<std::string, std::string>>;

// Writes `contents` to a temporary file and renames it into place.
void write_file_atomic(const std::filesystem::path& path, const std::string& contents);
std::string read_file(const std::filesystem::path& path);

std::string matrix_to_csv(const std::string& format_tag, const std::vector<std::string>& header,
                          const Eigen::MatrixXd& values);
struct CsvMatrix {
  std::string format_tag;
  std::vector<std::string> header;
  Eigen::MatrixXd values;
};
CsvMatrix parse_csv_matrix(const std::string& text);

std::string key_values_to_text(const KeyValues& kv);
std::map<std::string, std::string> parse_key_values(const std::string& text);

std::filesystem::path sidecar_path(const std::filesystem::path& data_path);

// Header row is theta_<name>...,s_<name>...; sidecar holds seed, n, model id.
void write_table(const std::filesystem::path& path, const ReferenceTable& table);
ReferenceTable read_table(const std::filesystem::path& path);

}  // namespace abcbl
