#pragma once

// Score-level fusion: per-sample mean of detector scores.

#include <span>
#include <string>
#include <vector>

#include "padeval/score_metrics.hpp"

namespace pad {

struct FusedScoreSet {
  ScoreSet scores;
  std::vector<std::string> sources;
};

struct NamedScores {
  std::string name;
  ScoreSet scores;
};

struct FusionOptions {
  /// Rescale each source to [0,1] by its own min and max before averaging.
  bool min_max_normalize = false;
};

/// Per-id mean of two detectors. Both sets must hold the same ids with the
/// same class and species; otherwise throws ErrorCode::alignment naming the
/// offending ids. Output follows the first set's order.
FusedScoreSet fuse_average(const NamedScores& a, const NamedScores& b, const FusionOptions& options = {});

/// Unweighted mean over any number (>= 1) of aligned detectors.
FusedScoreSet fuse_mean(std::span<const NamedScores> sources, const FusionOptions& options = {});

struct FusionReport {
  std::string name_a;
  std::string name_b;
  MetricsReport a;
  MetricsReport b;
  MetricsReport fused;
  /// fused.eer < min(a.eer, b.eer)
  bool fused_improves = false;
};

FusionReport evaluate_fusion(const NamedScores& a, const NamedScores& b, const FusionOptions& options = {});

/// Three-row comparison (each detector, then the fusion) with EER and
/// BPCER10/20/100 in percent.
std::string render_fusion_table(const FusionReport& report);

}  // namespace pad
