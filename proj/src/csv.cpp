#include "advloss/csv.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "advloss/error.hpp"

namespace advloss {

std::string format_fixed(double value) {
  if (std::isnan(value)) return "nan";
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  char buf[400];
  std::snprintf(buf, sizeof buf, "%.6f", value);
  std::string s(buf);
  if (s == "-0.000000") s = "0.000000";
  return s;
}

namespace {

bool needs_quotes(const std::string& f) {
  return f.find_first_of(",\"\n\r") != std::string::npos;
}

void write_field(std::ostream& out, const std::string& f) {
  if (!needs_quotes(f)) {
    out << f;
    return;
  }
  out << '"';
  for (char c : f) {
    if (c == '"') out << '"';
    out << c;
  }
  out << '"';
}

void write_row(std::ostream& out, const std::vector<std::string>& row) {
  for (std::size_t i = 0; i < row.size(); ++i) {
    if (i) out << ',';
    write_field(out, row[i]);
  }
  out << '\n';
}

// Reads one record, which may span lines inside quotes. Returns false at EOF.
bool read_record(std::istream& in, std::vector<std::string>& fields, std::size_t& line_no) {
  fields.clear();
  std::string field;
  bool quoted = false, any = false, was_quoted = false;
  char c;
  while (in.get(c)) {
    any = true;
    if (quoted) {
      if (c == '"') {
        if (in.peek() == '"') {
          in.get(c);
          field += '"';
        } else {
          quoted = false;
        }
      } else {
        if (c == '\n') ++line_no;
        field += c;
      }
      continue;
    }
    if (c == '"') {
      if (!field.empty() || was_quoted)
        throw Error(ErrorCode::malformed_file,
                    "stray quote in CSV at line " + std::to_string(line_no));
      quoted = was_quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(field));
      field.clear();
      was_quoted = false;
    } else if (c == '\n') {
      ++line_no;
      fields.push_back(std::move(field));
      return true;
    } else if (c != '\r') {
      if (was_quoted)
        throw Error(ErrorCode::malformed_file,
                    "text after closing quote at line " + std::to_string(line_no));
      field += c;
    }
  }
  if (quoted) throw Error(ErrorCode::malformed_file, "unterminated quote in CSV");
  if (!any) return false;
  fields.push_back(std::move(field));
  return true;
}

}  // namespace

void write_csv(std::ostream& out, const CsvTable& table) {
  for (const auto& c : table.comments) out << '#' << c << '\n';
  write_row(out, table.header);
  for (const auto& r : table.rows) write_row(out, r);
}

std::string to_csv_string(const CsvTable& table) {
  std::ostringstream ss;
  write_csv(ss, table);
  return ss.str();
}

CsvTable parse_csv(std::istream& in) {
  CsvTable t;
  std::size_t line_no = 1;
  while (in.peek() == '#') {
    std::string line;
    std::getline(in, line);
    ++line_no;
    t.comments.push_back(line.substr(1));
  }
  std::vector<std::string> fields;
  if (!read_record(in, t.header, line_no))
    throw Error(ErrorCode::malformed_file, "CSV has no header row");
  while (read_record(in, fields, line_no)) {
    if (fields.size() != t.header.size())
      throw Error(ErrorCode::malformed_file, "CSV row before line " + std::to_string(line_no) +
                                                 " has " + std::to_string(fields.size()) +
                                                 " fields, header has " +
                                                 std::to_string(t.header.size()));
    t.rows.push_back(fields);
  }
  return t;
}

CsvTable parse_csv_string(const std::string& text) {
  std::istringstream ss(text);
  return parse_csv(ss);
}

void save_csv(const CsvTable& table, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::io, "cannot open " + path.string() + " for writing");
  write_csv(out, table);
  if (!out) throw Error(ErrorCode::io, "write failed: " + path.string());
}

CsvTable load_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::io, "cannot open " + path.string());
  return parse_csv(in);
}

CsvTable report_table(const std::vector<RiskReport>& reports) {
  CsvTable t;
  t.header = {"loss",           "attack",        "n_samples", "clean_accuracy",
              "adversarial_accuracy", "r_double_prime", "frozen"};
  for (const auto& r : reports)
    t.rows.push_back({r.loss_name, r.attack, std::to_string(r.n_samples),
                      format_fixed(r.clean_accuracy), format_fixed(r.adversarial_accuracy),
                      format_fixed(r.r_double_prime), std::to_string(r.frozen)});
  return t;
}

CsvTable landscape_table(const BatchMatrix& grid) {
  CsvTable t;
  const std::size_t res = grid.rows();
  const double denom = res > 1 ? static_cast<double>(res - 1) : 1.0;
  t.header.push_back("alpha\\beta");
  for (std::size_t j = 0; j < grid.cols(); ++j)
    t.header.push_back(format_fixed(static_cast<double>(j) / denom));
  for (std::size_t i = 0; i < res; ++i) {
    std::vector<std::string> row{format_fixed(static_cast<double>(i) / denom)};
    for (std::size_t j = 0; j < grid.cols(); ++j) row.push_back(format_fixed(grid(i, j)));
    t.rows.push_back(std::move(row));
  }
  return t;
}

CsvTable search_log_table(const SearchConfig& config, const std::vector<GenerationLog>& log) {
  CsvTable t;
  t.comments.push_back(config.header_line().substr(1));
  t.header = {"generation", "best_fitness", "mean_fitness", "invalid_count", "best_expression"};
  for (const auto& g : log)
    t.rows.push_back({std::to_string(g.generation), format_fixed(g.best_fitness),
                      format_fixed(g.mean_fitness), std::to_string(g.invalid_count),
                      g.best_expression});
  return t;
}

}  // namespace advloss
