#pragma once

// Deterministic CSV emission. Doubles are written with std::to_chars
// (shortest round-trip form) so re-runs produce byte-identical files.

#include <charconv>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace adados {

inline std::string fmt_double(double v) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

class CsvWriter {
 public:
  CsvWriter(const std::string& path, const std::vector<std::string>& columns)
      : out_(path), n_cols_(columns.size()) {
    if (!out_) throw std::runtime_error("cannot open for writing: " + path);
    for (std::size_t i = 0; i < columns.size(); ++i) {
      if (i) out_ << ',';
      out_ << columns[i];
    }
    out_ << '\n';
  }

  CsvWriter& field(const std::string& s) {
    sep();
    row_ << s;
    return *this;
  }
  CsvWriter& field(double v) { return field(fmt_double(v)); }
  CsvWriter& field(int v) { return field(std::to_string(v)); }
  CsvWriter& field(std::int64_t v) { return field(std::to_string(v)); }
  CsvWriter& field(std::size_t v) { return field(std::to_string(v)); }

  void end_row() {
    if (fields_in_row_ != n_cols_)
      throw std::logic_error("csv row has wrong number of fields");
    out_ << row_.rdbuf() << '\n';
    row_.str("");
    row_.clear();
    fields_in_row_ = 0;
  }

 private:
  void sep() {
    if (fields_in_row_) row_ << ',';
    ++fields_in_row_;
  }

  std::ofstream out_;
  std::stringstream row_;
  std::size_t n_cols_;
  std::size_t fields_in_row_ = 0;
};

// Minimal parser for the trace/metric schemas used here: no quoting, no
// embedded separators.
std::vector<std::vector<std::string>> read_csv(const std::string& path);

}  // namespace adados
