#include "padeval/score_metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <set>

#include "padeval/error.hpp"

namespace pad {

ScoreSet ScoreSet::from_scores(std::vector<double> bona_fide,
                               const std::map<std::string, std::vector<double>>& attacks) {
  ScoreSet set;
  for (std::size_t i = 0; i < bona_fide.size(); ++i) {
    set.bona_fide.push_back("bf-" + std::to_string(i), bona_fide[i]);
  }
  for (const auto& [species, scores] : attacks) {
    auto& group = set.attacks[species];
    for (std::size_t i = 0; i < scores.size(); ++i) {
      group.push_back(species + "-" + std::to_string(i), scores[i]);
    }
  }
  return set;
}

std::vector<double> ScoreSet::pooled_attacks() const {
  std::vector<double> pooled;
  for (const auto& [species, group] : attacks) {
    pooled.insert(pooled.end(), group.scores.begin(), group.scores.end());
  }
  return pooled;
}

std::size_t ScoreSet::total_size() const {
  std::size_t n = bona_fide.size();
  for (const auto& [species, group] : attacks) n += group.size();
  return n;
}

namespace {

void check_group(const ScoreGroup& group, const std::string& label, std::set<std::string>& seen) {
  if (group.ids.size() != group.scores.size()) {
    throw Error(ErrorCode::invalid_input, label + ": id count " + std::to_string(group.ids.size()) +
                                              " differs from score count " +
                                              std::to_string(group.scores.size()));
  }
  for (std::size_t i = 0; i < group.size(); ++i) {
    const double s = group.scores[i];
    if (!std::isfinite(s) || s < 0.0 || s > 1.0) {
      throw Error(ErrorCode::invalid_input,
                  label + ": score for id '" + group.ids[i] + "' is outside [0,1]");
    }
    if (!seen.insert(group.ids[i]).second) {
      throw Error(ErrorCode::invalid_input, "duplicate sample id '" + group.ids[i] + "'");
    }
  }
}

}  // namespace

void ScoreSet::validate() const {
  if (bona_fide.empty()) {
    throw Error(ErrorCode::empty_bona_fide, "score set has no bona fide scores");
  }
  std::set<std::string> seen;
  check_group(bona_fide, "bona fide", seen);
  bool any_attack = false;
  for (const auto& [species, group] : attacks) {
    if (species.empty()) throw Error(ErrorCode::invalid_input, "empty PAIS name");
    check_group(group, "PAIS '" + species + "'", seen);
    any_attack = any_attack || !group.empty();
  }
  if (!any_attack) throw Error(ErrorCode::empty_pais, "score set has no attack scores");
}

Decision classify(double score, double threshold) {
  if (!std::isfinite(score) || !std::isfinite(threshold)) {
    throw Error(ErrorCode::invalid_input, "classify: score and threshold must be finite");
  }
  return score >= threshold ? Decision::attack : Decision::bona_fide;
}

double apcer(std::span<const double> attack_scores, double threshold) {
  if (attack_scores.empty()) throw Error(ErrorCode::empty_pais, "apcer: no attack scores");
  std::size_t missed = 0;
  for (double s : attack_scores) {
    if (classify(s, threshold) == Decision::bona_fide) ++missed;
  }
  return static_cast<double>(missed) / static_cast<double>(attack_scores.size());
}

double bpcer(std::span<const double> bona_fide_scores, double threshold) {
  if (bona_fide_scores.empty()) throw Error(ErrorCode::empty_bona_fide, "bpcer: no bona fide scores");
  std::size_t rejected = 0;
  for (double s : bona_fide_scores) {
    if (classify(s, threshold) == Decision::attack) ++rejected;
  }
  return static_cast<double>(rejected) / static_cast<double>(bona_fide_scores.size());
}

double worst_case_apcer(const ScoreSet& scores, double threshold) {
  if (scores.attacks.empty()) throw Error(ErrorCode::empty_pais, "worst_case_apcer: no PAIS");
  double worst = 0.0;
  for (const auto& [species, group] : scores.attacks) {
    worst = std::max(worst, apcer(group.scores, threshold));
  }
  return worst;
}

namespace {

void require_scores(std::span<const double> bona_fide, std::span<const double> attacks,
                    const char* what) {
  if (bona_fide.empty()) {
    throw Error(ErrorCode::empty_bona_fide, std::string(what) + ": no bona fide scores");
  }
  if (attacks.empty()) throw Error(ErrorCode::empty_pais, std::string(what) + ": no attack scores");
  auto finite = [](double s) { return std::isfinite(s); };
  if (!std::all_of(bona_fide.begin(), bona_fide.end(), finite) ||
      !std::all_of(attacks.begin(), attacks.end(), finite)) {
    throw Error(ErrorCode::invalid_input, std::string(what) + ": non-finite score");
  }
}

// Error counts at each candidate threshold, evaluated on sorted copies.
class ThresholdSweep {
 public:
  ThresholdSweep(std::span<const double> bona_fide, std::span<const double> attacks)
      : bona_(bona_fide.begin(), bona_fide.end()), attacks_(attacks.begin(), attacks.end()) {
    std::sort(bona_.begin(), bona_.end());
    std::sort(attacks_.begin(), attacks_.end());
  }

  std::uint64_t missed_attacks(double threshold) const {
    return static_cast<std::uint64_t>(
        std::lower_bound(attacks_.begin(), attacks_.end(), threshold) - attacks_.begin());
  }
  std::uint64_t rejected_bona_fide(double threshold) const {
    return static_cast<std::uint64_t>(
        bona_.end() - std::lower_bound(bona_.begin(), bona_.end(), threshold));
  }
  std::uint64_t n_attacks() const { return attacks_.size(); }
  std::uint64_t n_bona_fide() const { return bona_.size(); }

 private:
  std::vector<double> bona_;
  std::vector<double> attacks_;
};

}  // namespace

std::vector<double> candidate_thresholds(std::span<const double> bona_fide,
                                         std::span<const double> attacks) {
  std::vector<double> unique(bona_fide.begin(), bona_fide.end());
  unique.insert(unique.end(), attacks.begin(), attacks.end());
  if (unique.empty()) return {};
  std::sort(unique.begin(), unique.end());
  unique.erase(std::unique(unique.begin(), unique.end()), unique.end());

  std::vector<double> thresholds;
  thresholds.reserve(unique.size() + 1);
  thresholds.push_back(unique.front() - 1.0);
  for (std::size_t i = 0; i + 1 < unique.size(); ++i) {
    double mid = unique[i] + (unique[i + 1] - unique[i]) / 2.0;
    // Adjacent doubles: the midpoint may round onto the lower score.
    if (mid <= unique[i]) mid = unique[i + 1];
    thresholds.push_back(mid);
  }
  thresholds.push_back(unique.back() + 1.0);
  return thresholds;
}

EerResult eer(std::span<const double> bona_fide, std::span<const double> attacks) {
  require_scores(bona_fide, attacks, "eer");
  const ThresholdSweep sweep(bona_fide, attacks);
  const std::uint64_t n_att = sweep.n_attacks();
  const std::uint64_t n_bf = sweep.n_bona_fide();

  // |APCER - BPCER| scaled by n_att * n_bf stays an exact integer.
  bool have_best = false;
  std::uint64_t best_gap = 0;
  std::uint64_t best_rejected = 0;
  std::uint64_t best_missed = 0;
  double best_threshold = 0.0;
  for (double t : candidate_thresholds(bona_fide, attacks)) {
    const std::uint64_t missed = sweep.missed_attacks(t);
    const std::uint64_t rejected = sweep.rejected_bona_fide(t);
    const std::uint64_t a = missed * n_bf;
    const std::uint64_t b = rejected * n_att;
    const std::uint64_t gap = a > b ? a - b : b - a;
    // Candidates ascend, so a strict comparison keeps the lowest threshold.
    if (!have_best || gap < best_gap || (gap == best_gap && rejected < best_rejected)) {
      have_best = true;
      best_gap = gap;
      best_rejected = rejected;
      best_missed = missed;
      best_threshold = t;
    }
  }
  const double rate = static_cast<double>(best_missed * n_bf + best_rejected * n_att) /
                      (2.0 * static_cast<double>(n_att) * static_cast<double>(n_bf));
  return {rate, best_threshold};
}

double bpcer_at_apcer(std::span<const double> bona_fide, std::span<const double> attacks,
                      double target_apcer) {
  if (!(target_apcer > 0.0 && target_apcer < 1.0)) {
    throw Error(ErrorCode::invalid_input, "bpcer_at_apcer: target must lie in (0,1)");
  }
  require_scores(bona_fide, attacks, "bpcer_at_apcer");
  const ThresholdSweep sweep(bona_fide, attacks);
  const auto thresholds = candidate_thresholds(bona_fide, attacks);
  const double n_att = static_cast<double>(sweep.n_attacks());
  const double n_bf = static_cast<double>(sweep.n_bona_fide());
  for (auto it = thresholds.rbegin(); it != thresholds.rend(); ++it) {
    const double rate = static_cast<double>(sweep.missed_attacks(*it)) / n_att;
    if (rate <= target_apcer) return static_cast<double>(sweep.rejected_bona_fide(*it)) / n_bf;
  }
  // The lowest sentinel has APCER 0, so the loop always returns.
  return 1.0;
}

namespace {

MetricsReport report_at(const ScoreSet& test, double threshold, double eer_value,
                        ThresholdSource source) {
  const auto pooled = test.pooled_attacks();
  MetricsReport report;
  report.eer = eer_value;
  report.eer_threshold = threshold;
  report.bpcer10 = bpcer_at_apcer(test.bona_fide.scores, pooled, 0.10);
  report.bpcer20 = bpcer_at_apcer(test.bona_fide.scores, pooled, 0.05);
  report.bpcer100 = bpcer_at_apcer(test.bona_fide.scores, pooled, 0.01);
  for (const auto& [species, group] : test.attacks) {
    if (group.empty()) continue;
    report.per_pais_apcer[species] = apcer(group.scores, threshold);
    report.worst_case_apcer = std::max(report.worst_case_apcer, report.per_pais_apcer[species]);
  }
  report.threshold_source = source;
  return report;
}

}  // namespace

MetricsReport compute_report(const ScoreSet& test) {
  test.validate();
  const auto pooled = test.pooled_attacks();
  const EerResult e = eer(test.bona_fide.scores, pooled);
  return report_at(test, e.threshold, e.eer, ThresholdSource::test);
}

MetricsReport compute_report(const ScoreSet& test, const ScoreSet& validation) {
  test.validate();
  validation.validate();
  const EerResult val = eer(validation.bona_fide.scores, validation.pooled_attacks());
  const auto pooled = test.pooled_attacks();
  const double hter = (apcer(pooled, val.threshold) + bpcer(test.bona_fide.scores, val.threshold)) / 2.0;
  return report_at(test, val.threshold, hter, ThresholdSource::validation);
}

}  // namespace pad
