#pragma once

#include <string>
#include <vector>

namespace dmpcq {

/// Minimal CSV table: one header row, UTF-8, LF line endings. Doubles are
/// written with 17 significant digits so files round-trip exactly.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  void write(const std::string& path) const;
  static CsvTable read(const std::string& path);

  int column(const std::string& name) const;  // -1 if absent
};

std::string csv_format(double value);

}  // namespace dmpcq
