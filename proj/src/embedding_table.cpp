#include "padeval/embedding_table.hpp"

#include <cmath>

#include "padeval/error.hpp"
#include "padeval/score_metrics.hpp"

namespace pad {

const char* to_string(Split split) noexcept {
  switch (split) {
    case Split::train: return "train";
    case Split::val: return "val";
    case Split::test: return "test";
  }
  return "train";
}

bool parse_split(std::string_view text, Split& out) noexcept {
  if (text == "train") out = Split::train;
  else if (text == "val") out = Split::val;
  else if (text == "test") out = Split::test;
  else return false;
  return true;
}

EmbeddingTable::EmbeddingTable(std::size_t dim, std::vector<float> values,
                               std::vector<RowLabel> labels)
    : dim_(dim), values_(std::move(values)), labels_(std::move(labels)) {
  if (dim_ == 0) throw Error(ErrorCode::shape_mismatch, "embedding dim must be positive");
  if (labels_.empty()) throw Error(ErrorCode::shape_mismatch, "embedding table has no rows");
  if (values_.size() / dim_ != labels_.size() || values_.size() % dim_ != 0) {
    throw Error(ErrorCode::shape_mismatch,
                "embedding payload holds " + std::to_string(values_.size()) + " values, expected " +
                    std::to_string(labels_.size()) + " rows x " + std::to_string(dim_));
  }
  for (std::size_t i = 0; i < values_.size(); ++i) {
    if (!std::isfinite(values_[i])) {
      throw Error(ErrorCode::invalid_input,
                  "non-finite embedding value in row " + std::to_string(i / dim_));
    }
  }
  for (std::size_t i = 0; i < labels_.size(); ++i) {
    const auto& l = labels_[i];
    const bool bona_species = l.species == kBonaFideSpecies;
    if (l.label > 1 || (l.label == 0) != bona_species || l.species.empty()) {
      throw Error(ErrorCode::invalid_input,
                  "row " + std::to_string(i) + ": species '" + l.species + "' inconsistent with label " +
                      std::to_string(static_cast<int>(l.label)));
    }
  }
}

std::vector<std::size_t> EmbeddingTable::rows_in(Split split) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < labels_.size(); ++i) {
    if (labels_[i].split == split) out.push_back(i);
  }
  return out;
}

}  // namespace pad
