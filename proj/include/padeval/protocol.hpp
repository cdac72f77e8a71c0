#pragma once

// Experiment orchestration: leave-one-out unknown-attack splits, two-class
// splits, single experiments and multi-model benchmarks.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "padeval/det_curve.hpp"
#include "padeval/embedding_table.hpp"
#include "padeval/head.hpp"
#include "padeval/score_metrics.hpp"

namespace pad {

enum class SampleClass : std::uint8_t { bona_fide = 0, attack = 1 };

struct ManifestEntry {
  std::string id;
  SampleClass cls = SampleClass::bona_fide;
  std::string species;  // "bona_fide" for bona fide entries
  Split split = Split::train;
  bool operator==(const ManifestEntry&) const = default;
};

struct DatasetManifest {
  std::vector<ManifestEntry> entries;
  std::string source;

  /// Unique ids, non-empty species consistent with the class.
  void validate() const;
  /// Attack species, sorted.
  std::vector<std::string> species() const;
  bool operator==(const DatasetManifest&) const = default;
};

/// Entry ids for each role. held_out is empty for a two-class split.
struct ProtocolSplit {
  std::optional<std::string> held_out;
  std::vector<std::string> train;
  std::vector<std::string> val;
  std::vector<std::string> test;
  bool operator==(const ProtocolSplit&) const = default;
};

/// Train and val keep the manifest's train/val entries minus the held-out
/// species; test is the manifest's test bona fide plus every held-out entry
/// from any split. Attack entries of other species in the test split take no
/// part.
ProtocolSplit build_loo_split(const DatasetManifest& manifest, const std::string& held_out);

/// The manifest's own train/val/test assignment.
ProtocolSplit build_two_class_split(const DatasetManifest& manifest);

inline constexpr const char* kAllAttacks = "all-attacks";

struct ResultRow {
  std::string model;
  std::string protocol;  // "loo" or "two-class"
  std::string held_out;  // species, or "all-attacks"
  double eer = 0.0;
  double bpcer10 = 0.0;
  double bpcer20 = 0.0;
  double bpcer100 = 0.0;
  std::optional<std::string> failure;  // set for a failed run; metrics are then meaningless

  bool operator==(const ResultRow&) const = default;
};

struct ExperimentOptions {
  std::string model = "model";
  /// Grid-searched on the val ids when non-empty; otherwise config is used as is.
  std::vector<double> lr_grid;
  ThresholdSource threshold_source = ThresholdSource::test;
};

struct ExperimentResult {
  ResultRow row;
  MetricsReport report;
  DetCurve det;
  TrainConfig config;  // the configuration the reported head was trained with
  HeadModel head;
};

/// Resolves manifest ids to table rows. Ids are decimal row indices; throws
/// coverage_gap listing every id that does not name a row.
std::vector<std::size_t> resolve_rows(const EmbeddingTable& table, const std::vector<std::string>& ids);

/// Throws coverage_gap for manifest ids without a table row and
/// invalid_input when a row's class or species disagrees with its entry.
void check_manifest_matches(const EmbeddingTable& table, const DatasetManifest& manifest);

ExperimentResult run_experiment(const EmbeddingTable& table, const ProtocolSplit& split,
                                const TrainConfig& config, const ExperimentOptions& options = {});

enum class Protocol { loo_all_species, two_class };

const char* to_string(Protocol protocol) noexcept;

struct NamedTable {
  std::string model;
  EmbeddingTable table;
};

/// One row per (model, held-out species) for LOO, one per model for
/// two-class; ordered by model (input order) then species. A failing
/// experiment yields a row with `failure` set and the run continues.
/// Experiments run on up to `jobs` threads; the result is independent of it.
std::vector<ResultRow> run_benchmark(const std::vector<NamedTable>& tables,
                                     const DatasetManifest& manifest, Protocol protocol,
                                     const TrainConfig& config, const ExperimentOptions& options = {},
                                     unsigned jobs = 1);

/// Fixed-width table with one column group (EER, BPCER10, BPCER20, BPCER100
/// in percent) per held-out species and one line per model.
std::string render_results_table(const std::vector<ResultRow>& rows);

/// Percent with two decimals, rounding the six-decimal fraction half up.
std::string format_percent(double fraction);

}  // namespace pad
