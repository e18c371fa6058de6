#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace irm {

// Fixed %.12g rendering so repeated runs emit byte-identical files.
std::string format_double(double x);
std::string format_cell(const std::optional<double>& x);  // empty when unset

struct CsvTable {
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;

  void add_row(std::vector<std::string> cells);
  std::string to_csv() const;
  std::string to_json() const;  // {"columns": [...], "rows": [[...], ...]}
};

void write_text_file(const std::filesystem::path& path, const std::string& text);

}  // namespace irm
