#include "atomscope/csv.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "atomscope/errors.hpp"

namespace atomscope::csv {

namespace {

std::string trim(const std::string& s) {
  auto begin = s.find_first_not_of(" \t\r\n");
  if (begin == std::string::npos) return "";
  auto end = s.find_last_not_of(" \t\r\n");
  return s.substr(begin, end - begin + 1);
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  std::stringstream ss(line);
  while (std::getline(ss, cur, ',')) out.push_back(trim(cur));
  if (!line.empty() && line.back() == ',') out.push_back("");
  return out;
}

}  // namespace

std::size_t Table::column(const std::string& name) const {
  auto it = std::find(columns.begin(), columns.end(), name);
  if (it == columns.end()) {
    throw ParseError("missing required column '" + name + "'");
  }
  return static_cast<std::size_t>(it - columns.begin());
}

double Table::number(std::size_t row, std::size_t col) const {
  const std::string& tok = rows[row][col];
  double v = 0.0;
  const char* first = tok.data();
  const char* last = tok.data() + tok.size();
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc{} || ptr != last) {
    throw ParseError("row " + std::to_string(line_numbers[row]) +
                     ": cannot parse '" + tok + "' as a number");
  }
  return v;
}

Table read_file(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw ParseError("cannot open " + file.string());

  Table table;
  std::string line;
  std::size_t line_no = 0;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++line_no;
    std::string t = trim(line);
    if (t.empty()) continue;
    if (t[0] == '#') {
      std::string body = trim(t.substr(1));
      auto eq = body.find('=');
      if (eq != std::string::npos) {
        table.comments[trim(body.substr(0, eq))] = trim(body.substr(eq + 1));
      }
      continue;
    }
    if (!header_seen) {
      table.columns = split(t);
      if (table.columns.empty()) {
        throw ParseError("row " + std::to_string(line_no) + ": empty header");
      }
      header_seen = true;
      continue;
    }
    auto toks = split(t);
    if (toks.size() != table.columns.size()) {
      throw ParseError("row " + std::to_string(line_no) + ": expected " +
                       std::to_string(table.columns.size()) + " fields, got " +
                       std::to_string(toks.size()));
    }
    table.rows.push_back(std::move(toks));
    table.line_numbers.push_back(line_no);
  }
  if (!header_seen) throw ParseError(file.string() + ": empty file");
  return table;
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

struct Writer::Impl {
  std::ofstream out;
};

Writer::Writer(const std::filesystem::path& file,
               const std::vector<std::string>& columns,
               const std::map<std::string, std::string>& comments)
    : impl_(new Impl) {
  impl_->out.open(file);
  if (!impl_->out) {
    std::string msg = "cannot open " + file.string() + " for writing";
    delete impl_;
    impl_ = nullptr;
    throw ParseError(msg);
  }
  for (const auto& [k, v] : comments) impl_->out << "# " << k << "=" << v << "\n";
  for (std::size_t i = 0; i < columns.size(); ++i) {
    if (i) impl_->out << ",";
    impl_->out << columns[i];
  }
  impl_->out << "\n";
}

Writer::~Writer() { delete impl_; }

void Writer::row(const std::vector<double>& values) {
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) impl_->out << ",";
    impl_->out << format_double(values[i]);
  }
  impl_->out << "\n";
}

void Writer::raw_row(const std::vector<std::string>& values) {
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) impl_->out << ",";
    impl_->out << values[i];
  }
  impl_->out << "\n";
}

}  // namespace atomscope::csv
