#include "padeval/synth.hpp"

#include <cmath>
#include <set>

#include "padeval/error.hpp"
#include "padeval/head.hpp"
#include "padeval/normal.hpp"
#include "padeval/rng.hpp"

namespace pad {

void SynthSpec::validate() const {
  if (dim < 1) throw Error(ErrorCode::invalid_input, "synth: dim must be at least 1");
  if (bona_fide_count < 1) throw Error(ErrorCode::invalid_input, "synth: bona fide count must be at least 1");
  if (species.empty()) throw Error(ErrorCode::invalid_input, "synth: at least one attack species required");
  std::set<std::string> names;
  for (const auto& s : species) {
    if (s.name.empty() || s.name == kBonaFideSpecies) {
      throw Error(ErrorCode::invalid_input, "synth: invalid species name '" + s.name + "'");
    }
    if (!names.insert(s.name).second) throw Error(ErrorCode::invalid_input, "synth: duplicate species '" + s.name + "'");
    if (s.count < 1) throw Error(ErrorCode::invalid_input, "synth: species '" + s.name + "' needs count >= 1");
    if (!(s.d_prime >= 0.0) || !std::isfinite(s.d_prime)) {
      throw Error(ErrorCode::invalid_input, "synth: d_prime must be finite and >= 0");
    }
    if (!s.direction.empty()) {
      if (s.direction.size() != dim) {
        throw Error(ErrorCode::shape_mismatch, "synth: direction of '" + s.name + "' has wrong length");
      }
      double norm = 0.0;
      for (double v : s.direction) {
        if (!std::isfinite(v)) throw Error(ErrorCode::invalid_input, "synth: non-finite direction");
        norm += v * v;
      }
      if (!(norm > 0.0)) throw Error(ErrorCode::invalid_input, "synth: zero direction for '" + s.name + "'");
    }
  }
}

namespace {

Split round_robin(std::size_t k) {
  switch (k % 5) {
    case 3: return Split::val;
    case 4: return Split::test;
    default: return Split::train;
  }
}

std::vector<double> unit_direction(const SynthSpecies& s, std::size_t index, std::size_t dim) {
  std::vector<double> u(dim, 0.0);
  if (s.direction.empty()) {
    u[index % dim] = 1.0;
    return u;
  }
  double norm = 0.0;
  for (double v : s.direction) norm += v * v;
  norm = std::sqrt(norm);
  for (std::size_t i = 0; i < dim; ++i) u[i] = s.direction[i] / norm;
  return u;
}

}  // namespace

SynthDataset generate(const SynthSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);
  std::size_t total = spec.bona_fide_count;
  for (const auto& s : spec.species) total += s.count;

  std::vector<float> values;
  values.reserve(total * spec.dim);
  std::vector<RowLabel> labels;
  labels.reserve(total);
  DatasetManifest manifest;
  manifest.source = "synthetic";

  auto emit = [&](std::uint8_t label, const std::string& species, std::size_t k,
                  const std::vector<double>& mean) {
    for (std::size_t d = 0; d < spec.dim; ++d) {
      values.push_back(static_cast<float>(mean[d] + rng.normal()));
    }
    const Split split = round_robin(k);
    manifest.entries.push_back({std::to_string(labels.size()),
                                label ? SampleClass::attack : SampleClass::bona_fide, species, split});
    labels.push_back({label, species, split});
  };

  const std::vector<double> origin(spec.dim, 0.0);
  for (std::size_t k = 0; k < spec.bona_fide_count; ++k) emit(0, kBonaFideSpecies, k, origin);
  for (std::size_t si = 0; si < spec.species.size(); ++si) {
    const auto& s = spec.species[si];
    auto mean = unit_direction(s, si, spec.dim);
    for (double& m : mean) m *= s.d_prime;
    for (std::size_t k = 0; k < s.count; ++k) emit(1, s.name, k, mean);
  }
  return {EmbeddingTable(spec.dim, std::move(values), std::move(labels)), std::move(manifest)};
}

double analytic_eer(double d_prime) {
  if (!(d_prime >= 0.0)) throw Error(ErrorCode::invalid_input, "analytic_eer: d_prime must be >= 0");
  return normal_cdf(-d_prime / 2.0);
}

std::pair<ScoreSet, ScoreSet> synth_detector_pair(std::size_t per_class, double d_prime, std::uint64_t seed) {
  if (per_class < 1) throw Error(ErrorCode::invalid_input, "synth_detector_pair: per_class must be >= 1");
  if (!(d_prime >= 0.0) || !std::isfinite(d_prime)) {
    throw Error(ErrorCode::invalid_input, "synth_detector_pair: d_prime must be finite and >= 0");
  }
  Rng rng(seed);
  ScoreSet a;
  ScoreSet b;
  for (int cls = 0; cls < 2; ++cls) {
    for (std::size_t i = 0; i < per_class; ++i) {
      const double signal = cls * d_prime;
      const std::string id = (cls ? "atk-" : "bf-") + std::to_string(i);
      const double sa = sigmoid(signal + rng.normal());
      const double sb = sigmoid(signal + rng.normal());
      auto& ga = cls ? a.attacks["attack"] : a.bona_fide;
      auto& gb = cls ? b.attacks["attack"] : b.bona_fide;
      ga.push_back(id, sa);
      gb.push_back(id, sb);
    }
  }
  return {std::move(a), std::move(b)};
}

}  // namespace pad
