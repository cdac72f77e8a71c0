#pragma once

// Readers and writers for every on-disk format. Each file-based function has
// an in-memory twin (encode_/format_ and decode_/parse_) that does the actual
// work; all parse failures surface as pad::ParseError.
//
// Byte-level layouts are documented in FORMATS.md.

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "padeval/det_curve.hpp"
#include "padeval/embedding_table.hpp"
#include "padeval/head.hpp"
#include "padeval/protocol.hpp"
#include "padeval/score_metrics.hpp"
#include "padeval/synth.hpp"

namespace pad::io {

inline constexpr char kEmbeddingMagic[4] = {'P', 'A', 'D', 'E'};
inline constexpr std::uint32_t kEmbeddingVersion = 1;
inline constexpr std::size_t kEmbeddingHeaderSize = 20;

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view contents);

/// "<embeddings>.labels.csv"
std::filesystem::path labels_path_for(const std::filesystem::path& embeddings);

// Embedding binary plus label sidecar.
struct EmbeddingPayload {
  std::uint64_t rows = 0;
  std::uint32_t dim = 0;
  std::vector<float> values;
};

std::string encode_embedding_payload(const EmbeddingTable& table);
EmbeddingPayload decode_embedding_payload(std::string_view bytes);
std::string format_labels_csv(const EmbeddingTable& table);
std::vector<RowLabel> parse_labels_csv(std::string_view text);
EmbeddingTable decode_embeddings(std::string_view bytes, std::string_view labels_csv);

EmbeddingTable read_embeddings(const std::filesystem::path& path);
EmbeddingTable read_embeddings(const std::filesystem::path& path, const std::filesystem::path& labels);
void write_embeddings(const EmbeddingTable& table, const std::filesystem::path& path);
void write_embeddings(const EmbeddingTable& table, const std::filesystem::path& path,
                      const std::filesystem::path& labels);

// Score CSV: id,class,species,score
std::string format_scores_csv(const ScoreSet& scores);
ScoreSet parse_scores_csv(std::string_view text);
ScoreSet read_scores(const std::filesystem::path& path);
void write_scores(const ScoreSet& scores, const std::filesystem::path& path);

// Manifest CSV: id,class,species,split
std::string format_manifest_csv(const DatasetManifest& manifest);
DatasetManifest parse_manifest_csv(std::string_view text, std::string source = {});
/// The manifest's source is the file stem.
DatasetManifest read_manifest(const std::filesystem::path& path);
void write_manifest(const DatasetManifest& manifest, const std::filesystem::path& path);

// Results CSV: model,protocol,held_out,eer,bpcer10,bpcer20,bpcer100
// Fractions with six decimals; a failed row leaves the metric cells empty.
std::string format_results_csv(const std::vector<ResultRow>& rows);
std::vector<ResultRow> parse_results_csv(std::string_view text);
/// Writes the CSV and, when text_path is non-empty, the fixed-width table.
void write_results_table(const std::vector<ResultRow>& rows, const std::filesystem::path& csv_path,
                         const std::filesystem::path& text_path = {});

// Head JSON with weights rounded to nine significant digits.
nlohmann::json head_to_json(const HeadModel& head);
std::string format_head_json(const HeadModel& head, const TrainConfig* config = nullptr);
HeadModel parse_head_json(std::string_view text);
HeadModel read_head(const std::filesystem::path& path);
void write_head(const HeadModel& head, const std::filesystem::path& path, const TrainConfig* config = nullptr);

// Synthetic dataset description.
SynthSpec parse_synth_spec(std::string_view text);
std::string format_synth_spec(const SynthSpec& spec);

nlohmann::json metrics_to_json(const MetricsReport& report);
nlohmann::json train_config_to_json(const TrainConfig& config);

}  // namespace pad::io
