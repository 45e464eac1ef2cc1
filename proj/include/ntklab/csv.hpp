#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

namespace ntklab {

/// Locale-independent number formatting used for every CSV cell: integers
/// print as integers, |v| < 1e-3 in scientific notation, everything else in
/// general notation with 15 significant digits.
std::string format_number(double v);

using CsvCell = std::variant<double, std::int64_t, std::string>;

/// Rectangular table with unique column names and '#'-prefixed metadata.
class CsvTable {
 public:
  CsvTable() = default;
  explicit CsvTable(std::vector<std::string> header);

  void add_row(std::vector<CsvCell> row);
  void add_metadata(std::string key, std::string value);

  const std::vector<std::string>& header() const { return header_; }
  const std::vector<std::vector<CsvCell>>& rows() const { return rows_; }
  const std::vector<std::pair<std::string, std::string>>& metadata() const { return metadata_; }
  std::size_t row_count() const { return rows_.size(); }

  std::size_t column_index(std::string_view name) const;
  /// Numeric view of a column; string cells throw.
  std::vector<double> column(std::string_view name) const;
  double value(std::size_t row, std::string_view name) const;
  /// Metadata lookup; throws std::out_of_range when absent.
  const std::string& meta(std::string_view key) const;

  /// Writes metadata lines, the header and the rows with LF endings. Unless
  /// `reproducible` is set a "# generated:" timestamp line is included.
  void write(std::ostream& out, bool reproducible) const;
  std::string str(bool reproducible = true) const;

  /// Parses the format produced by write(); numeric-looking cells become doubles.
  static CsvTable parse(std::istream& in);

 private:
  std::vector<std::string> header_;
  std::vector<std::vector<CsvCell>> rows_;
  std::vector<std::pair<std::string, std::string>> metadata_;
};

}  // namespace ntklab
