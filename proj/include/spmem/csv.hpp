#pragma once

#include <string>
#include <vector>

namespace spmem {

// Minimal numeric CSV support: one header row, comma separated, '.' decimal
// separator, every body cell parseable as double.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;

  int column(const std::string& name) const;  // -1 when absent
};

CsvTable read_csv(const std::string& path);
void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<double>>& rows);

// Round-trip-exact formatting used for every numeric output file.
std::string format_double(double x);

}  // namespace spmem
