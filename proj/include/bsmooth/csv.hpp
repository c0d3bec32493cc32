#pragma once

/**
 * @file csv.hpp
 * @brief Numeric CSV input with a header row, and atomic file output.
 */

#include <charconv>
#include <cmath>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "bsmooth/error.hpp"
#include "bsmooth/sparse.hpp"

namespace bsmooth {

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;

  [[nodiscard]] std::vector<double> column(std::size_t j) const {
    std::vector<double> out;
    out.reserve(rows.size());
    for (const auto& r : rows) out.push_back(r[j]);
    return out;
  }
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline std::vector<std::string_view> split(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    out.push_back(trim(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

inline bool parse_double(std::string_view s, double& out) {
  if (s.empty()) return false;
  if (s.front() == '+') s.remove_prefix(1);
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size() && std::isfinite(out);
}

}  // namespace detail

/// Parses a header row then numeric rows of equal width. Blank lines are
/// skipped. Errors cite 1-based line numbers.
inline CsvTable read_csv(std::istream& in) {
  CsvTable t;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (detail::trim(line).empty()) continue;
    const auto fields = detail::split(line);
    if (t.header.empty()) {
      for (auto f : fields) t.header.emplace_back(f);
      continue;
    }
    if (fields.size() != t.header.size()) {
      throw InvalidArgument("line " + std::to_string(lineno) + ": expected " + std::to_string(t.header.size()) +
                            " fields, found " + std::to_string(fields.size()));
    }
    std::vector<double> row(fields.size());
    for (std::size_t j = 0; j < fields.size(); ++j) {
      if (!detail::parse_double(fields[j], row[j])) {
        throw InvalidArgument("line " + std::to_string(lineno) + ": field " + std::to_string(j + 1) + " ('" +
                              std::string(fields[j]) + "') is not a finite number");
      }
    }
    t.rows.push_back(std::move(row));
  }
  if (t.header.empty()) throw InvalidArgument("input has no header row");
  return t;
}

inline CsvTable read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  return read_csv(in);
}

/// One number per line (blank lines ignored).
inline std::vector<double> read_values(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<double> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto s = detail::trim(line);
    if (s.empty()) continue;
    double v = 0.0;
    if (!detail::parse_double(s, v)) {
      throw InvalidArgument(path.string() + " line " + std::to_string(lineno) + ": not a finite number");
    }
    out.push_back(v);
  }
  return out;
}

/// Writes through `fill` into a sibling temporary, then renames over `path`.
inline void write_atomically(const std::filesystem::path& path, const std::function<void(std::ostream&)>& fill) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out.precision(std::numeric_limits<double>::max_digits10);
    fill(out);
    out.flush();
    if (!out) {
      std::error_code ignored;
      std::filesystem::remove(tmp, ignored);
      throw IoError("failed writing " + path.string());
    }
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw IoError("cannot replace " + path.string());
  }
}

inline void write_triplets(std::ostream& os, const RowSparseMatrix& m) {
  os << "row,col,value\n";
  for (std::size_t i = 0; i < m.rows.size(); ++i) {
    const auto& r = m.rows[i];
    for (std::size_t c = 0; c < r.values.size(); ++c) os << i << ',' << r.start + c << ',' << r.values[c] << '\n';
  }
}

}  // namespace bsmooth
