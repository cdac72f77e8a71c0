#pragma once

// Synthetic Gaussian datasets whose optimal error rates are known in closed
// form.
//
// Bona fide rows are drawn from N(0, I). Attacks of a species are drawn from
// N(d' * u, I) for a species-specific unit direction u, so any linear
// projection onto u separates the classes with EER = Phi(-d'/2).

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "padeval/embedding_table.hpp"
#include "padeval/protocol.hpp"
#include "padeval/score_metrics.hpp"

namespace pad {

struct SynthSpecies {
  std::string name;
  std::size_t count = 0;
  double d_prime = 0.0;
  /// Mean direction; normalized on use. Empty means the unit axis
  /// (species index mod dim).
  std::vector<double> direction;
};

struct SynthSpec {
  std::size_t dim = 0;
  std::size_t bona_fide_count = 0;
  std::vector<SynthSpecies> species;
  std::uint64_t seed = 0;

  void validate() const;
};

struct SynthDataset {
  EmbeddingTable table;
  DatasetManifest manifest;
};

/// Rows are emitted bona fide first, then each species in spec order. Within
/// a class the k-th row goes to train for k mod 5 in {0,1,2}, val for 3 and
/// test for 4. Manifest ids are the row indices.
SynthDataset generate(const SynthSpec& spec);

/// Phi(-d'/2): the EER of two unit-variance Gaussians d' apart.
double analytic_eer(double d_prime);

/// Scores of two detectors observing the same samples with independent
/// noise: latent = d' * attack + N(0,1), score = sigmoid(latent). Both sets
/// share ids; attacks are a single species named "attack".
std::pair<ScoreSet, ScoreSet> synth_detector_pair(std::size_t per_class, double d_prime, std::uint64_t seed);

}  // namespace pad
