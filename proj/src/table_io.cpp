#include "abcbl/table_io.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "abcbl/errors.hpp"

namespace abcbl {

namespace fs = std::filesystem;

std::string format_double(double value) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  if (ec != std::errc()) throw IoError("cannot format number");
  return std::string(buf, ptr);
}

double parse_double(const std::string& text) {
  std::size_t b = text.find_first_not_of(" \t\r");
  std::size_t e = text.find_last_not_of(" \t\r");
  if (b == std::string::npos) throw IoError("empty numeric field");
  const char* first = text.data() + b;
  const char* last = text.data() + e + 1;
  if (*first == '+') ++first;
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last) throw IoError("invalid number '" + text + "'");
  return value;
}

void write_file_atomic(const fs::path& path, const std::string& contents) {
  std::error_code ec;
  if (path.has_parent_path()) fs::create_directories(path.parent_path(), ec);
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + tmp.string() + "' for writing");
    out << contents;
    out.flush();
    if (!out) throw IoError("write to '" + tmp.string() + "' failed");
  }
  fs::rename(tmp, path, ec);
  if (ec) throw IoError("cannot rename '" + tmp.string() + "' to '" + path.string() + "': " + ec.message());
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

std::string matrix_to_csv(const std::string& format_tag, const std::vector<std::string>& header,
                          const Eigen::MatrixXd& values) {
  if (static_cast<Eigen::Index>(header.size()) != values.cols()) throw IoError("header/column count mismatch");
  std::string out = "# " + format_tag + "\n";
  for (std::size_t k = 0; k < header.size(); ++k) out += (k ? "," : "") + header[k];
  out += '\n';
  for (Eigen::Index i = 0; i < values.rows(); ++i) {
    for (Eigen::Index k = 0; k < values.cols(); ++k) {
      if (k) out += ',';
      out += format_double(values(i, k));
    }
    out += '\n';
  }
  return out;
}

namespace {

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> parts;
  std::string cur;
  std::istringstream is(line);
  while (std::getline(is, cur, sep)) parts.push_back(cur);
  if (!line.empty() && line.back() == sep) parts.emplace_back();
  return parts;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

CsvMatrix parse_csv_matrix(const std::string& text) {
  CsvMatrix m;
  std::istringstream is(text);
  std::string line;
  std::vector<std::vector<double>> rows;
  bool have_header = false;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line[0] == '#') {
      if (m.format_tag.empty()) m.format_tag = trim(line.substr(1));
      continue;
    }
    auto fields = split(line, ',');
    if (!have_header) {
      for (auto& f : fields) m.header.push_back(trim(f));
      have_header = true;
      continue;
    }
    if (fields.size() != m.header.size())
      throw IoError("line " + std::to_string(line_no) + ": expected " + std::to_string(m.header.size()) +
                    " fields, got " + std::to_string(fields.size()));
    std::vector<double> row;
    row.reserve(fields.size());
    for (auto& f : fields) {
      try {
        row.push_back(parse_double(f));
      } catch (const IoError& e) {
        throw IoError("line " + std::to_string(line_no) + ": " + e.what());
      }
    }
    rows.push_back(std::move(row));
  }
  if (!have_header) throw IoError("missing header row");
  m.values.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(m.header.size()));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t k = 0; k < rows[i].size(); ++k)
      m.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = rows[i][k];
  return m;
}

std::string key_values_to_text(const KeyValues& kv) {
  std::string out;
  for (const auto& [k, v] : kv) out += k + " = " + v + "\n";
  return out;
}

std::map<std::string, std::string> parse_key_values(const std::string& text) {
  std::map<std::string, std::string> kv;
  std::istringstream is(text);
  std::string line;
  while (std::getline(is, line)) {
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw IoError("malformed key-value line '" + line + "'");
    kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  return kv;
}

fs::path sidecar_path(const fs::path& data_path) {
  fs::path p = data_path;
  p += ".meta";
  return p;
}

void write_table(const fs::path& path, const ReferenceTable& table) {
  table.validate();
  std::vector<std::string> header;
  for (const auto& n : table.param_names) header.push_back("theta_" + n);
  for (const auto& n : table.stat_names) header.push_back("s_" + n);
  Eigen::MatrixXd all(table.rows(), table.p() + table.d());
  all << table.params, table.stats;
  write_file_atomic(path, matrix_to_csv(kTableFormat, header, all));
  write_file_atomic(sidecar_path(path), key_values_to_text({{"format", kTableMetaFormat},
                                                            {"model", table.model_id},
                                                            {"seed", std::to_string(table.seed)},
                                                            {"n", std::to_string(table.rows())},
                                                            {"p", std::to_string(table.p())},
                                                            {"d", std::to_string(table.d())}}));
}

ReferenceTable read_table(const fs::path& path) {
  CsvMatrix m = parse_csv_matrix(read_file(path));
  if (m.format_tag != kTableFormat)
    throw IoError("'" + path.string() + "': expected format '" + kTableFormat + "', found '" + m.format_tag + "'");
  ReferenceTable table;
  std::vector<Eigen::Index> theta_cols, stat_cols;
  for (std::size_t k = 0; k < m.header.size(); ++k) {
    const auto& h = m.header[k];
    if (h.rfind("theta_", 0) == 0) {
      if (!stat_cols.empty()) throw IoError("theta_ columns must precede s_ columns");
      table.param_names.push_back(h.substr(6));
      theta_cols.push_back(static_cast<Eigen::Index>(k));
    } else if (h.rfind("s_", 0) == 0) {
      table.stat_names.push_back(h.substr(2));
      stat_cols.push_back(static_cast<Eigen::Index>(k));
    } else {
      throw IoError("unexpected column '" + h + "'");
    }
  }
  const auto p = static_cast<Eigen::Index>(theta_cols.size());
  table.params = m.values.leftCols(p);
  table.stats = m.values.rightCols(m.values.cols() - p);

  const auto meta_path = sidecar_path(path);
  if (fs::exists(meta_path)) {
    auto kv = parse_key_values(read_file(meta_path));
    if (kv["format"] != kTableMetaFormat) throw IoError("'" + meta_path.string() + "': unexpected format");
    table.model_id = kv["model"];
    try {
      table.seed = std::stoull(kv["seed"]);
      if (std::stoll(kv["n"]) != table.rows()) throw IoError("sidecar row count does not match table");
    } catch (const std::logic_error&) {
      throw IoError("'" + meta_path.string() + "': malformed seed or n");
    }
  }
  table.validate();
  return table;
}

}  // namespace abcbl
