#include "irm/csv.hpp"

#include <cstdio>
#include <fstream>
#include <stdexcept>

namespace irm {

std::string format_double(double x) {
  if (x == 0.0) return "0";  // normalize -0
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.12g", x);
  return buf;
}

std::string format_cell(const std::optional<double>& x) {
  return x ? format_double(*x) : std::string();
}

void CsvTable::add_row(std::vector<std::string> cells) {
  if (cells.size() != columns.size()) {
    throw std::invalid_argument("CsvTable: row width mismatch");
  }
  rows.push_back(std::move(cells));
}

namespace {

std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

std::string json_escape(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"' || c == '\\') out += '\\';
    out += c;
  }
  out += '"';
  return out;
}

}  // namespace

std::string CsvTable::to_csv() const {
  std::string out;
  for (std::size_t i = 0; i < columns.size(); ++i) {
    if (i) out += ',';
    out += csv_escape(columns[i]);
  }
  out += '\n';
  for (const auto& row : rows) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) out += ',';
      out += csv_escape(row[i]);
    }
    out += '\n';
  }
  return out;
}

std::string CsvTable::to_json() const {
  std::string out = "{\n  \"columns\": [";
  for (std::size_t i = 0; i < columns.size(); ++i) {
    if (i) out += ", ";
    out += json_escape(columns[i]);
  }
  out += "],\n  \"rows\": [\n";
  for (std::size_t r = 0; r < rows.size(); ++r) {
    out += "    [";
    for (std::size_t i = 0; i < rows[r].size(); ++i) {
      if (i) out += ", ";
      out += json_escape(rows[r][i]);
    }
    out += r + 1 < rows.size() ? "],\n" : "]\n";
  }
  out += "  ]\n}\n";
  return out;
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw std::runtime_error("cannot write " + path.string());
  }
  out << text;
}

}  // namespace irm
