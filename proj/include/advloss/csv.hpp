#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "advloss/numerics.hpp"
#include "advloss/riskeval.hpp"
#include "advloss/search.hpp"

namespace advloss {

// Fixed 6-decimal rendering used for every numeric output. Non-finite values
// print as nan, inf, -inf.
std::string format_fixed(double value);

// Leading '#' comment lines, one header row, then data rows. Fields holding a
// comma, quote or newline are quoted with doubled inner quotes.
struct CsvTable {
  std::vector<std::string> comments;  // without the leading '#'
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  friend bool operator==(const CsvTable&, const CsvTable&) = default;
};

void write_csv(std::ostream& out, const CsvTable& table);
std::string to_csv_string(const CsvTable& table);
CsvTable parse_csv(std::istream& in);  // throws malformed_file
CsvTable parse_csv_string(const std::string& text);
void save_csv(const CsvTable& table, const std::filesystem::path& path);
CsvTable load_csv(const std::filesystem::path& path);

// loss,attack,n_samples,clean_accuracy,adversarial_accuracy,r_double_prime,frozen
CsvTable report_table(const std::vector<RiskReport>& reports);

// Header row carries beta values, the first column alpha values.
CsvTable landscape_table(const BatchMatrix& grid);

// generation,best_fitness,mean_fitness,invalid_count,best_expression
CsvTable search_log_table(const SearchConfig& config, const std::vector<GenerationLog>& log);

}  // namespace advloss
