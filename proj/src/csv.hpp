#pragma once

// Minimal comma-separated text helpers shared by the readers and writers.
// Fields are never quoted; writers reject values containing separators.

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace pad::csv {

/// Iterates '\n'-terminated lines (a trailing '\r' is dropped) with 1-based
/// line numbers. A final empty line after the last '\n' is not reported.
class LineReader {
 public:
  explicit LineReader(std::string_view text) : text_(text) {}

  bool next(std::string_view& line);
  std::uint64_t line_number() const noexcept { return line_; }

 private:
  std::string_view text_;
  std::size_t pos_ = 0;
  std::uint64_t line_ = 0;
};

std::vector<std::string_view> split(std::string_view line);

/// Reads the header line and throws unless it equals `expected`.
void expect_header(LineReader& reader, std::string_view expected);

/// Splits a data line and throws unless it has exactly `count` fields.
std::vector<std::string_view> fields(std::string_view line, std::size_t count, std::uint64_t line_no);

double parse_double(std::string_view field, std::uint64_t line_no, std::string_view name);
std::uint64_t parse_uint(std::string_view field, std::uint64_t line_no, std::string_view name);

/// Throws pad::Error when a value cannot be written unquoted.
void check_writable(std::string_view value, std::string_view what);

std::string fixed(double value, int decimals);

/// Shortest decimal form that reads back to the same double.
std::string shortest(double value);

}  // namespace pad::csv
