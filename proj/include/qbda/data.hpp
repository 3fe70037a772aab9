#pragma once

#include "qbda/models.hpp"

#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace qbda {

class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class FileNotFound : public DataError {
 public:
  explicit FileNotFound(const std::filesystem::path& p)
      : DataError("data file not found: " + p.string()) {}
};

class MissingColumn : public DataError {
 public:
  MissingColumn(std::string field, std::string column)
      : DataError("column '" + column + "' (field '" + field + "') not found in CSV header"),
        field_(std::move(field)), column_(std::move(column)) {}
  const std::string& field() const { return field_; }
  const std::string& column() const { return column_; }

 private:
  std::string field_;
  std::string column_;
};

class MalformedRow : public DataError {
 public:
  MalformedRow(std::size_t line, const std::string& reason)
      : DataError("line " + std::to_string(line) + ": " + reason), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

struct IvRecord {
  double log_gdp = 0.0;              ///< y
  double expropriation_risk = 0.0;   ///< x
  double log_settler_mortality = 0.0;///< z
  double latitude = 0.0;
  int africa = 0;
  int asia = 0;
  int other_cont = 0;
};

/// Model field -> CSV column name. Fields: y, x, z, latitude, africa, asia, other_cont.
using ColumnMap = std::map<std::string, std::string>;

/// Column names of the published replication files.
ColumnMap default_column_map();
const std::vector<std::string>& iv_fields();

struct IvLoadOptions {
  ColumnMap columns = default_column_map();
  /// Replace latitude by abs(latitude) / 90.
  bool normalize_latitude = false;
  std::size_t expected_rows = 64;
};

struct IvLoadResult {
  std::vector<IvRecord> records;
  IvData data;
  std::vector<std::string> warnings;
};

IvLoadResult load_iv_csv(const std::filesystem::path& path, const IvLoadOptions& options = {});

/// Builds model input (controls latitude, africa, asia, other_cont) from records.
IvData to_iv_data(const std::vector<IvRecord>& records);

/// Splits one CSV line, honouring double-quoted fields.
std::vector<std::string> split_csv_line(const std::string& line);

}  // namespace qbda
