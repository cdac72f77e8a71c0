#include "padeval/error.hpp"

namespace pad {

const char* to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::invalid_input: return "invalid-input";
    case ErrorCode::empty_pais: return "empty-pais";
    case ErrorCode::empty_bona_fide: return "empty-bona-fide";
    case ErrorCode::length_mismatch: return "length-mismatch";
    case ErrorCode::shape_mismatch: return "shape-mismatch";
    case ErrorCode::single_class: return "single-class";
    case ErrorCode::divergence: return "divergence";
    case ErrorCode::unknown_species: return "unknown-species";
    case ErrorCode::empty_split: return "empty-split";
    case ErrorCode::coverage_gap: return "coverage-gap";
    case ErrorCode::alignment: return "alignment";
    case ErrorCode::parse: return "parse";
    case ErrorCode::io: return "io";
  }
  return "unknown";
}

namespace {

std::string format_location(const std::string& message, const SourceLocation& where) {
  if (where.kind == SourceLocation::Kind::byte_offset) {
    return message + " (at byte offset " + std::to_string(where.value) + ")";
  }
  return message + " (line " + std::to_string(where.value) + ")";
}

}  // namespace

ParseError::ParseError(const std::string& message, SourceLocation where)
    : Error(ErrorCode::parse, format_location(message, where)), where_(where), detail_(message) {}

}  // namespace pad
