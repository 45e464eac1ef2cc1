#include "ntklab/csv.hpp"

#include <charconv>
#include <chrono>
#include <cmath>
#include <ctime>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

#include "ntklab/errors.hpp"

namespace ntklab {

std::string format_number(double v) {
  if (v == 0.0) return "0";
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  std::to_chars_result res{};
  const double a = std::abs(v);
  if (a < 1e-3) {
    res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::scientific, 12);
  } else if (a < 1e15 && v == std::floor(v)) {
    res = std::to_chars(buf, buf + sizeof buf, static_cast<long long>(v));
  } else {
    res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 15);
  }
  return std::string(buf, res.ptr);
}

CsvTable::CsvTable(std::vector<std::string> header) : header_(std::move(header)) {
  std::unordered_set<std::string> seen;
  for (const auto& h : header_) {
    if (h.empty() || h.find(',') != std::string::npos)
      throw std::invalid_argument("CsvTable: invalid column name '" + h + "'");
    if (!seen.insert(h).second) throw std::invalid_argument("CsvTable: duplicate column " + h);
  }
}

void CsvTable::add_row(std::vector<CsvCell> row) {
  if (row.size() != header_.size())
    throw DimensionError("CsvTable: row has " + std::to_string(row.size()) + " cells, header " +
                         std::to_string(header_.size()));
  rows_.push_back(std::move(row));
}

void CsvTable::add_metadata(std::string key, std::string value) {
  if (key.find('\n') != std::string::npos || value.find('\n') != std::string::npos)
    throw std::invalid_argument("CsvTable: metadata must be single-line");
  metadata_.emplace_back(std::move(key), std::move(value));
}

std::size_t CsvTable::column_index(std::string_view name) const {
  for (std::size_t j = 0; j < header_.size(); ++j)
    if (header_[j] == name) return j;
  throw std::out_of_range("CsvTable: no column '" + std::string(name) + "'");
}

double CsvTable::value(std::size_t row, std::string_view name) const {
  const CsvCell& c = rows_.at(row).at(column_index(name));
  if (const auto* d = std::get_if<double>(&c)) return *d;
  if (const auto* i = std::get_if<std::int64_t>(&c)) return static_cast<double>(*i);
  throw std::invalid_argument("CsvTable: column '" + std::string(name) + "' is not numeric");
}

std::vector<double> CsvTable::column(std::string_view name) const {
  std::vector<double> out;
  out.reserve(rows_.size());
  for (std::size_t i = 0; i < rows_.size(); ++i) out.push_back(value(i, name));
  return out;
}

const std::string& CsvTable::meta(std::string_view key) const {
  for (const auto& [k, v] : metadata_)
    if (k == key) return v;
  throw std::out_of_range("CsvTable: no metadata '" + std::string(key) + "'");
}

namespace {

std::string cell_text(const CsvCell& c) {
  struct Visitor {
    std::string operator()(double v) const { return format_number(v); }
    std::string operator()(std::int64_t v) const { return std::to_string(v); }
    std::string operator()(const std::string& s) const { return s; }
  };
  return std::visit(Visitor{}, c);
}

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace

void CsvTable::write(std::ostream& out, bool reproducible) const {
  for (const auto& [k, v] : metadata_) out << "# " << k << ": " << v << '\n';
  if (!reproducible) out << "# generated: " << utc_timestamp() << '\n';
  for (std::size_t j = 0; j < header_.size(); ++j) out << (j ? "," : "") << header_[j];
  out << '\n';
  for (const auto& row : rows_) {
    for (std::size_t j = 0; j < row.size(); ++j) out << (j ? "," : "") << cell_text(row[j]);
    out << '\n';
  }
}

std::string CsvTable::str(bool reproducible) const {
  std::ostringstream os;
  write(os, reproducible);
  return os.str();
}

namespace {

std::vector<std::string> split_commas(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

CsvCell parse_cell(const std::string& s) {
  double v = 0.0;
  const char* end = s.data() + s.size();
  auto res = std::from_chars(s.data(), end, v);
  if (res.ec == std::errc() && res.ptr == end) return v;
  if (s == "nan") return std::nan("");
  if (s == "inf") return std::numeric_limits<double>::infinity();
  if (s == "-inf") return -std::numeric_limits<double>::infinity();
  return s;
}

}  // namespace

CsvTable CsvTable::parse(std::istream& in) {
  std::string line;
  std::vector<std::pair<std::string, std::string>> meta;
  CsvTable table;
  bool have_header = false;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line.front() == '#') {
      const auto colon = line.find(": ");
      if (colon != std::string::npos && colon > 2)
        meta.emplace_back(line.substr(2, colon - 2), line.substr(colon + 2));
      continue;
    }
    if (!have_header) {
      table = CsvTable(split_commas(line));
      have_header = true;
      continue;
    }
    std::vector<CsvCell> row;
    for (const auto& s : split_commas(line)) row.push_back(parse_cell(s));
    table.add_row(std::move(row));
  }
  if (!have_header) throw std::invalid_argument("CsvTable::parse: no header line");
  for (auto& [k, v] : meta) table.add_metadata(std::move(k), std::move(v));
  return table;
}

}  // namespace ntklab
