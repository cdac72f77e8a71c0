#pragma once

// ISO/IEC 30107-3 metrics over labeled detector scores.
//
// Orientation: a higher score is more attack-like, and a presentation is
// classified as an attack iff score >= threshold.

#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace pad {

inline constexpr const char* kBonaFideSpecies = "bona_fide";

/// Scores with their sample ids. ids and scores always have equal length.
struct ScoreGroup {
  std::vector<std::string> ids;
  std::vector<double> scores;

  std::size_t size() const noexcept { return scores.size(); }
  bool empty() const noexcept { return scores.empty(); }
  void push_back(std::string id, double score) {
    ids.push_back(std::move(id));
    scores.push_back(score);
  }
  bool operator==(const ScoreGroup&) const = default;
};

/// Detector output partitioned into bona fide and per-PAIS attack groups.
struct ScoreSet {
  ScoreGroup bona_fide;
  std::map<std::string, ScoreGroup> attacks;

  /// Builds a set from raw score lists, naming samples "bf-<i>" and
  /// "<species>-<i>".
  static ScoreSet from_scores(std::vector<double> bona_fide,
                              const std::map<std::string, std::vector<double>>& attacks);

  /// All attack scores concatenated in species order.
  std::vector<double> pooled_attacks() const;
  std::size_t total_size() const;

  /// Throws pad::Error unless every invariant holds: scores finite and in
  /// [0,1], ids unique, PAIS names non-empty, at least one bona fide score and
  /// one non-empty PAIS.
  void validate() const;

  bool operator==(const ScoreSet&) const = default;
};

enum class Decision : int { bona_fide = 0, attack = 1 };

Decision classify(double score, double threshold);

/// Fraction of attack presentations classified as bona fide.
double apcer(std::span<const double> attack_scores, double threshold);

/// Fraction of bona fide presentations classified as attacks.
double bpcer(std::span<const double> bona_fide_scores, double threshold);

double worst_case_apcer(const ScoreSet& scores, double threshold);

struct EerResult {
  double eer;
  double threshold;
};

/// Candidate thresholds shared by eer, bpcer_at_apcer and the DET sweep:
/// a sentinel below the minimum, one point in (u[i], u[i+1]] for every pair of
/// adjacent unique scores, and a sentinel above the maximum. Ascending.
std::vector<double> candidate_thresholds(std::span<const double> bona_fide,
                                         std::span<const double> attacks);

/// Picks the candidate minimizing |APCER - BPCER|, breaking ties by lower
/// BPCER then lower threshold, and reports the mean of the two rates there.
EerResult eer(std::span<const double> bona_fide, std::span<const double> attacks);

/// BPCER at the largest candidate threshold whose APCER is <= target_apcer.
double bpcer_at_apcer(std::span<const double> bona_fide, std::span<const double> attacks,
                      double target_apcer);

enum class ThresholdSource { test, validation };

struct MetricsReport {
  double eer = 0.0;
  double eer_threshold = 0.0;
  double bpcer10 = 0.0;
  double bpcer20 = 0.0;
  double bpcer100 = 0.0;
  std::map<std::string, double> per_pais_apcer;
  double worst_case_apcer = 0.0;
  ThresholdSource threshold_source = ThresholdSource::test;

  bool operator==(const MetricsReport&) const = default;
};

/// Metrics with the operating threshold taken from the test scores' own EER.
MetricsReport compute_report(const ScoreSet& test);

/// Metrics with the operating threshold taken from the validation EER. The
/// reported eer is then the mean of pooled APCER and BPCER on the test set
/// at that threshold.
MetricsReport compute_report(const ScoreSet& test, const ScoreSet& validation);

}  // namespace pad
