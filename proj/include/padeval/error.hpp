#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>

namespace pad {

enum class ErrorCode {
  invalid_input,
  empty_pais,
  empty_bona_fide,
  length_mismatch,
  shape_mismatch,
  single_class,
  divergence,
  unknown_species,
  empty_split,
  coverage_gap,
  alignment,
  parse,
  io,
};

const char* to_string(ErrorCode code) noexcept;

/// Base for every error raised on bad input. Anything else escaping the
/// library is an internal fault.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

/// Where a parse failed: a byte offset for binary payloads, a 1-based line
/// number for text formats.
struct SourceLocation {
  enum class Kind { byte_offset, line } kind;
  std::uint64_t value;
};

class ParseError : public Error {
 public:
  ParseError(const std::string& message, SourceLocation where);

  const SourceLocation& where() const noexcept { return where_; }
  const std::string& detail() const noexcept { return detail_; }

 private:
  SourceLocation where_;
  std::string detail_;
};

inline ParseError parse_error_at_byte(std::uint64_t offset, const std::string& message) {
  return ParseError(message, {SourceLocation::Kind::byte_offset, offset});
}

inline ParseError parse_error_at_line(std::uint64_t line, const std::string& message) {
  return ParseError(message, {SourceLocation::Kind::line, line});
}

}  // namespace pad
