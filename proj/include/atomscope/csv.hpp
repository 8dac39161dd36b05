#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

// Minimal CSV support: tables with a mandatory header row and optional
// `# key=value` comment lines. Cells are kept as strings and parsed on
// demand so non-numeric columns (names) coexist with data. Writing uses
// %.17g so emitted doubles round-trip exactly and outputs are
// byte-reproducible.

namespace atomscope::csv {

struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;
  std::vector<std::size_t> line_numbers;          // source line per row
  std::map<std::string, std::string> comments;    // from `# key=value` lines

  // Index of a named column; throws ParseError if absent.
  std::size_t column(const std::string& name) const;

  // Numeric value of a cell; throws ParseError naming the source row.
  double number(std::size_t row, std::size_t col) const;

  std::size_t row_count() const { return rows.size(); }
};

Table read_file(const std::filesystem::path& file);

std::string format_double(double v);

class Writer {
 public:
  explicit Writer(const std::filesystem::path& file,
                  const std::vector<std::string>& columns,
                  const std::map<std::string, std::string>& comments = {});
  ~Writer();
  Writer(const Writer&) = delete;
  Writer& operator=(const Writer&) = delete;

  void row(const std::vector<double>& values);
  void raw_row(const std::vector<std::string>& values);

 private:
  struct Impl;
  Impl* impl_;
};

}  // namespace atomscope::csv
