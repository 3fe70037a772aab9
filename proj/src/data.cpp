#include "qbda/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>

namespace qbda {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double parse_number(const std::string& cell, std::size_t line, const std::string& column) {
  const std::string t = trim(cell);
  if (t.empty() || t == "." || t == "NA" || t == "NaN" || t == "nan")
    throw MalformedRow(line, "missing value in column '" + column + "'");
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (ec != std::errc() || ptr != t.data() + t.size())
    throw MalformedRow(line, "cannot parse '" + t + "' in column '" + column + "' as a number");
  if (!std::isfinite(v)) throw MalformedRow(line, "non-finite value in column '" + column + "'");
  return v;
}

int parse_dummy(const std::string& cell, std::size_t line, const std::string& column) {
  const double v = parse_number(cell, line, column);
  if (v != 0.0 && v != 1.0)
    throw MalformedRow(line, "dummy column '" + column + "' must be 0 or 1, got " + trim(cell));
  return static_cast<int>(v);
}

}  // namespace

ColumnMap default_column_map() {
  return {{"y", "logpgp95"}, {"x", "avexpr"},  {"z", "logem4"},        {"latitude", "lat_abst"},
          {"africa", "africa"}, {"asia", "asia"}, {"other_cont", "other"}};
}

const std::vector<std::string>& iv_fields() {
  static const std::vector<std::string> fields{"y", "x", "z", "latitude", "africa", "asia", "other_cont"};
  return fields;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(std::move(cur));
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  out.push_back(std::move(cur));
  return out;
}

IvLoadResult load_iv_csv(const std::filesystem::path& path, const IvLoadOptions& options) {
  for (const auto& [field, column] : options.columns) {
    if (std::find(iv_fields().begin(), iv_fields().end(), field) == iv_fields().end())
      throw DataError("unknown field '" + field + "' in column map");
  }

  std::ifstream in(path);
  if (!in) throw FileNotFound(path);

  std::string line;
  if (!std::getline(in, line)) throw MalformedRow(1, "file is empty, header row required");
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
  std::vector<std::string> header = split_csv_line(line);
  for (auto& h : header) h = trim(h);

  // Resolve every field to exactly one header position before reading rows.
  std::map<std::string, std::size_t> position;
  for (const auto& field : iv_fields()) {
    const auto it = options.columns.find(field);
    if (it == options.columns.end()) throw MissingColumn(field, "<unmapped>");
    const auto n = std::count(header.begin(), header.end(), it->second);
    if (n == 0) throw MissingColumn(field, it->second);
    if (n > 1) throw DataError("column '" + it->second + "' appears more than once in the header");
    position[field] = static_cast<std::size_t>(std::find(header.begin(), header.end(), it->second) - header.begin());
  }

  IvLoadResult result;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != header.size()) {
      throw MalformedRow(line_no, "expected " + std::to_string(header.size()) + " fields, found " +
                                      std::to_string(cells.size()));
    }
    const auto cell = [&](const std::string& f) -> const std::string& { return cells[position.at(f)]; };
    const auto col = [&](const std::string& f) -> const std::string& { return options.columns.at(f); };

    IvRecord r;
    r.log_gdp = parse_number(cell("y"), line_no, col("y"));
    r.expropriation_risk = parse_number(cell("x"), line_no, col("x"));
    r.log_settler_mortality = parse_number(cell("z"), line_no, col("z"));
    r.latitude = parse_number(cell("latitude"), line_no, col("latitude"));
    if (options.normalize_latitude) r.latitude = std::abs(r.latitude) / 90.0;
    r.africa = parse_dummy(cell("africa"), line_no, col("africa"));
    r.asia = parse_dummy(cell("asia"), line_no, col("asia"));
    r.other_cont = parse_dummy(cell("other_cont"), line_no, col("other_cont"));
    if (r.africa + r.asia + r.other_cont > 1)
      throw MalformedRow(line_no, "more than one continent dummy is set");
    result.records.push_back(r);
  }

  if (result.records.empty()) throw DataError(path.string() + ": no data rows");
  if (options.expected_rows > 0 && result.records.size() != options.expected_rows) {
    result.warnings.push_back("loaded " + std::to_string(result.records.size()) + " rows, expected " +
                              std::to_string(options.expected_rows));
  }
  result.data = to_iv_data(result.records);
  return result;
}

IvData to_iv_data(const std::vector<IvRecord>& records) {
  const auto n = static_cast<Index>(records.size());
  IvData d;
  d.y.resize(n);
  d.x.resize(n);
  d.z.resize(n);
  d.controls.resize(n, 4);
  d.control_names = {"latitude", "africa", "asia", "other_cont"};
  for (Index i = 0; i < n; ++i) {
    const auto& r = records[static_cast<std::size_t>(i)];
    d.y(i) = r.log_gdp;
    d.x(i) = r.expropriation_risk;
    d.z(i) = r.log_settler_mortality;
    d.controls(i, 0) = r.latitude;
    d.controls(i, 1) = r.africa;
    d.controls(i, 2) = r.asia;
    d.controls(i, 3) = r.other_cont;
  }
  return d;
}

}  // namespace qbda
