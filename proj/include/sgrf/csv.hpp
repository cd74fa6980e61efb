#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

namespace sgrf {

/// Shortest round-trip decimal form ("inf", "-inf", "nan" for non-finite).
std::string format_double(double v);

/// Minimal CSV writer; cells are written verbatim (no quoting needed for the
/// numeric and identifier cells used here).
class CsvWriter {
 public:
  CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& header);
  CsvWriter& cell(const std::string& s);
  CsvWriter& cell(double v) { return cell(format_double(v)); }
  CsvWriter& cell(long long v) { return cell(std::to_string(v)); }
  CsvWriter& cell(int v) { return cell(std::to_string(v)); }
  CsvWriter& cell(std::size_t v) { return cell(std::to_string(v)); }
  void end_row();

 private:
  std::ofstream out_;
  bool first_ = true;
};

/// Parsed CSV: header plus rows of raw cells.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  int column(const std::string& name) const;
};
CsvTable read_csv(const std::filesystem::path& path);

}  // namespace sgrf
