#include "padeval/fusion.hpp"

#include <algorithm>
#include <map>

#include "padeval/error.hpp"
#include "padeval/protocol.hpp"

namespace pad {

namespace {

struct Located {
  const std::string* species;  // nullptr for bona fide
  double score;
};

std::map<std::string, Located> index_by_id(const ScoreSet& set) {
  std::map<std::string, Located> out;
  for (std::size_t i = 0; i < set.bona_fide.size(); ++i) {
    out.emplace(set.bona_fide.ids[i], Located{nullptr, set.bona_fide.scores[i]});
  }
  for (const auto& [species, group] : set.attacks) {
    for (std::size_t i = 0; i < group.size(); ++i) out.emplace(group.ids[i], Located{&species, group.scores[i]});
  }
  return out;
}

std::string describe(const Located& l) { return l.species ? "attack/" + *l.species : "bona_fide"; }

ScoreSet normalized(const ScoreSet& set) {
  double lo = 1.0;
  double hi = 0.0;
  auto scan = [&](const ScoreGroup& g) {
    for (double s : g.scores) {
      lo = std::min(lo, s);
      hi = std::max(hi, s);
    }
  };
  scan(set.bona_fide);
  for (const auto& [species, g] : set.attacks) scan(g);
  ScoreSet out = set;
  auto rescale = [&](ScoreGroup& g) {
    for (double& s : g.scores) s = hi > lo ? (s - lo) / (hi - lo) : 0.5;
  };
  rescale(out.bona_fide);
  for (auto& [species, g] : out.attacks) rescale(g);
  return out;
}

}  // namespace

FusedScoreSet fuse_mean(std::span<const NamedScores> sources, const FusionOptions& options) {
  if (sources.empty()) throw Error(ErrorCode::invalid_input, "fusion needs at least one score set");
  std::vector<ScoreSet> inputs;
  for (const auto& s : sources) {
    s.scores.validate();
    inputs.push_back(options.min_max_normalize ? normalized(s.scores) : s.scores);
  }

  const ScoreSet& first = inputs.front();
  const auto reference = index_by_id(first);
  std::vector<std::map<std::string, Located>> others;
  std::vector<std::string> offenders;
  for (std::size_t k = 1; k < inputs.size(); ++k) {
    others.push_back(index_by_id(inputs[k]));
    const auto& other = others.back();
    for (const auto& [id, loc] : reference) {
      auto it = other.find(id);
      if (it == other.end()) {
        offenders.push_back(id + " (missing from " + sources[k].name + ")");
      } else if ((loc.species == nullptr) != (it->second.species == nullptr) ||
                 (loc.species && *loc.species != *it->second.species)) {
        offenders.push_back(id + " (" + describe(loc) + " vs " + describe(it->second) + ")");
      }
    }
    for (const auto& [id, loc] : other) {
      if (!reference.count(id)) offenders.push_back(id + " (missing from " + sources[0].name + ")");
    }
  }
  if (!offenders.empty()) {
    std::string list;
    const std::size_t shown = std::min<std::size_t>(offenders.size(), 20);
    for (std::size_t i = 0; i < shown; ++i) list += (i ? ", " : "") + offenders[i];
    if (shown < offenders.size()) list += ", ...";
    throw Error(ErrorCode::alignment,
                std::to_string(offenders.size()) + " misaligned id(s): " + list);
  }

  const double n = static_cast<double>(inputs.size());
  auto fuse_group = [&](const ScoreGroup& group) {
    ScoreGroup out = group;
    for (std::size_t i = 0; i < group.size(); ++i) {
      double sum = group.scores[i];
      for (const auto& other : others) sum += other.at(group.ids[i]).score;
      // Clamp guards the last ulp; the mean of [0,1] values stays in [0,1].
      out.scores[i] = std::clamp(sum / n, 0.0, 1.0);
    }
    return out;
  };

  FusedScoreSet fused;
  fused.scores.bona_fide = fuse_group(first.bona_fide);
  for (const auto& [species, group] : first.attacks) fused.scores.attacks[species] = fuse_group(group);
  for (const auto& s : sources) fused.sources.push_back(s.name);
  return fused;
}

FusedScoreSet fuse_average(const NamedScores& a, const NamedScores& b, const FusionOptions& options) {
  const NamedScores pair[] = {a, b};
  return fuse_mean(pair, options);
}

FusionReport evaluate_fusion(const NamedScores& a, const NamedScores& b, const FusionOptions& options) {
  const FusedScoreSet fused = fuse_average(a, b, options);
  FusionReport report;
  report.name_a = a.name;
  report.name_b = b.name;
  report.a = compute_report(a.scores);
  report.b = compute_report(b.scores);
  report.fused = compute_report(fused.scores);
  report.fused_improves = report.fused.eer < std::min(report.a.eer, report.b.eer);
  return report;
}

std::string render_fusion_table(const FusionReport& report) {
  std::vector<ResultRow> rows;
  auto add = [&](const std::string& name, const MetricsReport& m) {
    ResultRow r;
    r.model = name;
    r.protocol = "fusion";
    r.held_out = kAllAttacks;
    r.eer = m.eer;
    r.bpcer10 = m.bpcer10;
    r.bpcer20 = m.bpcer20;
    r.bpcer100 = m.bpcer100;
    rows.push_back(r);
  };
  add(report.name_a, report.a);
  add(report.name_b == report.name_a ? report.name_b + " (2)" : report.name_b, report.b);
  add("fusion(" + report.name_a + "+" + report.name_b + ")", report.fused);
  return render_results_table(rows);
}

}  // namespace pad
