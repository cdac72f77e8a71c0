#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace pad {

enum class Split : std::uint8_t { train, val, test };

const char* to_string(Split split) noexcept;
/// Returns false for anything other than "train", "val" or "test".
bool parse_split(std::string_view text, Split& out) noexcept;

struct RowLabel {
  std::uint8_t label = 0;  // 0 = bona fide, 1 = attack
  std::string species;     // "bona_fide" for label 0
  Split split = Split::train;
  bool operator==(const RowLabel&) const = default;
};

/// Dense N x D float matrix of frozen embeddings with per-row labels.
/// Row i is identified by its index; manifests refer to it as the decimal id
/// "i". Immutable once constructed.
class EmbeddingTable {
 public:
  /// Throws pad::Error on any invariant violation: dim >= 1, N >= 1,
  /// values.size() == N * dim, finite entries, labels in {0,1} with a species
  /// consistent with the label.
  EmbeddingTable(std::size_t dim, std::vector<float> values, std::vector<RowLabel> labels);

  std::size_t dim() const noexcept { return dim_; }
  std::size_t rows() const noexcept { return labels_.size(); }
  std::span<const float> row(std::size_t i) const { return {values_.data() + i * dim_, dim_}; }
  std::span<const float> values() const noexcept { return values_; }
  const RowLabel& label(std::size_t i) const { return labels_[i]; }
  const std::vector<RowLabel>& labels() const noexcept { return labels_; }

  std::vector<std::size_t> rows_in(Split split) const;

  bool operator==(const EmbeddingTable&) const = default;

 private:
  std::size_t dim_;
  std::vector<float> values_;
  std::vector<RowLabel> labels_;
};

}  // namespace pad
