#include "csv.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>

#include "padeval/error.hpp"

namespace pad::csv {

bool LineReader::next(std::string_view& line) {
  if (pos_ >= text_.size()) return false;
  const std::size_t end = text_.find('\n', pos_);
  if (end == std::string_view::npos) {
    line = text_.substr(pos_);
    pos_ = text_.size();
  } else {
    line = text_.substr(pos_, end - pos_);
    pos_ = end + 1;
  }
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  ++line_;
  return true;
}

std::vector<std::string_view> split(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
}

void expect_header(LineReader& reader, std::string_view expected) {
  std::string_view line;
  if (!reader.next(line)) throw parse_error_at_line(1, "missing header, expected '" + std::string(expected) + "'");
  if (line.size() >= 3 && line.substr(0, 3) == "\xEF\xBB\xBF") line.remove_prefix(3);
  if (line != expected) {
    throw parse_error_at_line(reader.line_number(), "bad header, expected '" + std::string(expected) + "'");
  }
}

std::vector<std::string_view> fields(std::string_view line, std::size_t count, std::uint64_t line_no) {
  auto out = split(line);
  if (out.size() != count) {
    throw parse_error_at_line(line_no, "expected " + std::to_string(count) + " fields, found " +
                                           std::to_string(out.size()));
  }
  return out;
}

double parse_double(std::string_view field, std::uint64_t line_no, std::string_view name) {
  double value = 0.0;
  const char* first = field.data();
  const char* last = field.data() + field.size();
  if (!field.empty() && field.front() == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, value);
  if (field.empty() || ec != std::errc() || ptr != last || !std::isfinite(value)) {
    throw parse_error_at_line(line_no, "invalid number in field '" + std::string(name) + "'");
  }
  return value;
}

std::uint64_t parse_uint(std::string_view field, std::uint64_t line_no, std::string_view name) {
  std::uint64_t value = 0;
  const char* last = field.data() + field.size();
  const auto [ptr, ec] = std::from_chars(field.data(), last, value);
  if (field.empty() || ec != std::errc() || ptr != last) {
    throw parse_error_at_line(line_no, "invalid unsigned integer in field '" + std::string(name) + "'");
  }
  return value;
}

void check_writable(std::string_view value, std::string_view what) {
  if (value.find_first_of(",\r\n\"") != std::string_view::npos) {
    throw Error(ErrorCode::invalid_input,
                std::string(what) + " '" + std::string(value) + "' contains a CSV separator");
  }
}

std::string fixed(double value, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, value);
  std::string out(buf);
  if (out.front() == '-' && out.find_first_not_of("-0.") == std::string::npos) out.erase(0, 1);
  return out;
}

std::string shortest(double value) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, ptr);
}

}  // namespace pad::csv
