#include "padeval/io.hpp"

#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <set>
#include <sstream>

#include "csv.hpp"
#include "padeval/error.hpp"

namespace pad::io {

using nlohmann::json;

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::io, "cannot open '" + path.string() + "' for reading");
  std::ostringstream buf;
  buf << in.rdbuf();
  if (in.bad()) throw Error(ErrorCode::io, "failed reading '" + path.string() + "'");
  return std::move(buf).str();
}

void write_file(const std::filesystem::path& path, std::string_view contents) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::io, "cannot open '" + path.string() + "' for writing");
  out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
  if (!out) throw Error(ErrorCode::io, "failed writing '" + path.string() + "'");
}

std::filesystem::path labels_path_for(const std::filesystem::path& embeddings) {
  return embeddings.string() + ".labels.csv";
}

// ---------------------------------------------------------------------------
// Embedding binary

namespace {

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

std::uint32_t get_u32(std::string_view bytes, std::size_t offset) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[offset + i])) << (8 * i);
  return v;
}

std::uint64_t get_u64(std::string_view bytes, std::size_t offset) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes[offset + i])) << (8 * i);
  return v;
}

}  // namespace

std::string encode_embedding_payload(const EmbeddingTable& table) {
  if (table.dim() > UINT32_MAX) throw Error(ErrorCode::invalid_input, "embedding dim exceeds u32");
  std::string out;
  out.reserve(kEmbeddingHeaderSize + table.values().size() * 4);
  out.append(kEmbeddingMagic, 4);
  put_u32(out, kEmbeddingVersion);
  put_u64(out, table.rows());
  put_u32(out, static_cast<std::uint32_t>(table.dim()));
  for (float f : table.values()) put_u32(out, std::bit_cast<std::uint32_t>(f));
  return out;
}

EmbeddingPayload decode_embedding_payload(std::string_view bytes) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kEmbeddingMagic, 4) != 0) {
    throw parse_error_at_byte(0, "bad magic, expected \"PADE\"");
  }
  if (bytes.size() < kEmbeddingHeaderSize) {
    throw parse_error_at_byte(bytes.size(), "truncated header: " + std::to_string(bytes.size()) +
                                                " of " + std::to_string(kEmbeddingHeaderSize) + " bytes");
  }
  const std::uint32_t version = get_u32(bytes, 4);
  if (version != kEmbeddingVersion) {
    throw parse_error_at_byte(4, "unsupported format version " + std::to_string(version));
  }
  EmbeddingPayload payload;
  payload.rows = get_u64(bytes, 8);
  payload.dim = get_u32(bytes, 16);
  if (payload.rows == 0) throw parse_error_at_byte(8, "row count must be positive");
  if (payload.dim == 0) throw parse_error_at_byte(16, "dim must be positive");

  const std::uint64_t available = (bytes.size() - kEmbeddingHeaderSize) / 4;
  const bool overflow = payload.rows > UINT64_MAX / payload.dim;
  const std::uint64_t expected = overflow ? UINT64_MAX : payload.rows * payload.dim;
  if (overflow || expected > available) {
    throw parse_error_at_byte(bytes.size(), "truncated payload: header declares " + std::to_string(payload.rows) +
                                                " x " + std::to_string(payload.dim) + " floats");
  }
  const std::size_t end = kEmbeddingHeaderSize + static_cast<std::size_t>(expected) * 4;
  if (end != bytes.size()) {
    throw parse_error_at_byte(end, std::to_string(bytes.size() - end) + " trailing byte(s) after payload");
  }
  payload.values.resize(static_cast<std::size_t>(expected));
  for (std::size_t i = 0; i < payload.values.size(); ++i) {
    const std::size_t offset = kEmbeddingHeaderSize + i * 4;
    const float f = std::bit_cast<float>(get_u32(bytes, offset));
    if (!std::isfinite(f)) throw parse_error_at_byte(offset, "non-finite float");
    payload.values[i] = f;
  }
  return payload;
}

std::string format_labels_csv(const EmbeddingTable& table) {
  std::string out = "row_index,class,species,split\n";
  for (std::size_t i = 0; i < table.rows(); ++i) {
    const auto& l = table.label(i);
    csv::check_writable(l.species, "species");
    out += std::to_string(i) + ',' + (l.label ? "attack" : "bona_fide") + ',' + l.species + ',' +
           to_string(l.split) + '\n';
  }
  return out;
}

namespace {

std::uint8_t parse_class(std::string_view field, std::uint64_t line) {
  if (field == "bona_fide") return 0;
  if (field == "attack") return 1;
  throw parse_error_at_line(line, "class must be 'bona_fide' or 'attack'");
}

// Bona fide rows may leave the species empty; attack rows must name one.
std::string parse_species(std::uint8_t label, std::string_view field, std::uint64_t line) {
  if (label == 0) {
    if (!field.empty() && field != kBonaFideSpecies) {
      throw parse_error_at_line(line, "bona fide row with attack species '" + std::string(field) + "'");
    }
    return kBonaFideSpecies;
  }
  if (field.empty() || field == kBonaFideSpecies) throw parse_error_at_line(line, "attack row needs a PAIS species");
  return std::string(field);
}

Split parse_split_field(std::string_view field, std::uint64_t line) {
  Split split;
  if (!parse_split(field, split)) throw parse_error_at_line(line, "split must be train, val or test");
  return split;
}

}  // namespace

std::vector<RowLabel> parse_labels_csv(std::string_view text) {
  csv::LineReader reader(text);
  csv::expect_header(reader, "row_index,class,species,split");
  std::vector<RowLabel> labels;
  std::string_view line;
  while (reader.next(line)) {
    const auto n = reader.line_number();
    const auto f = csv::fields(line, 4, n);
    if (csv::parse_uint(f[0], n, "row_index") != labels.size()) {
      throw parse_error_at_line(n, "row_index out of sequence, expected " + std::to_string(labels.size()));
    }
    RowLabel l;
    l.label = parse_class(f[1], n);
    l.species = parse_species(l.label, f[2], n);
    l.split = parse_split_field(f[3], n);
    labels.push_back(std::move(l));
  }
  return labels;
}

EmbeddingTable decode_embeddings(std::string_view bytes, std::string_view labels_csv) {
  EmbeddingPayload payload = decode_embedding_payload(bytes);
  std::vector<RowLabel> labels = parse_labels_csv(labels_csv);
  if (labels.size() != payload.rows) {
    throw parse_error_at_byte(8, "label sidecar has " + std::to_string(labels.size()) +
                                     " rows but the header declares " + std::to_string(payload.rows));
  }
  return EmbeddingTable(payload.dim, std::move(payload.values), std::move(labels));
}

EmbeddingTable read_embeddings(const std::filesystem::path& path) {
  return read_embeddings(path, labels_path_for(path));
}

EmbeddingTable read_embeddings(const std::filesystem::path& path, const std::filesystem::path& labels) {
  return decode_embeddings(read_file(path), read_file(labels));
}

void write_embeddings(const EmbeddingTable& table, const std::filesystem::path& path) {
  write_embeddings(table, path, labels_path_for(path));
}

void write_embeddings(const EmbeddingTable& table, const std::filesystem::path& path,
                      const std::filesystem::path& labels) {
  const std::string sidecar = format_labels_csv(table);
  write_file(path, encode_embedding_payload(table));
  write_file(labels, sidecar);
}

// ---------------------------------------------------------------------------
// Scores

std::string format_scores_csv(const ScoreSet& scores) {
  scores.validate();
  std::string out = "id,class,species,score\n";
  for (std::size_t i = 0; i < scores.bona_fide.size(); ++i) {
    csv::check_writable(scores.bona_fide.ids[i], "id");
    out += scores.bona_fide.ids[i] + ",bona_fide,," + csv::shortest(scores.bona_fide.scores[i]) + '\n';
  }
  for (const auto& [species, group] : scores.attacks) {
    csv::check_writable(species, "species");
    for (std::size_t i = 0; i < group.size(); ++i) {
      csv::check_writable(group.ids[i], "id");
      out += group.ids[i] + ",attack," + species + ',' + csv::shortest(group.scores[i]) + '\n';
    }
  }
  return out;
}

ScoreSet parse_scores_csv(std::string_view text) {
  csv::LineReader reader(text);
  csv::expect_header(reader, "id,class,species,score");
  ScoreSet set;
  std::set<std::string, std::less<>> ids;
  std::string_view line;
  while (reader.next(line)) {
    const auto n = reader.line_number();
    const auto f = csv::fields(line, 4, n);
    if (f[0].empty()) throw parse_error_at_line(n, "empty id");
    if (!ids.emplace(f[0]).second) throw parse_error_at_line(n, "duplicate id '" + std::string(f[0]) + "'");
    const std::uint8_t label = parse_class(f[1], n);
    const std::string species = parse_species(label, f[2], n);
    const double score = csv::parse_double(f[3], n, "score");
    if (score < 0.0 || score > 1.0) throw parse_error_at_line(n, "score outside [0,1]");
    auto& group = label == 0 ? set.bona_fide : set.attacks[species];
    group.push_back(std::string(f[0]), score);
  }
  if (set.bona_fide.empty()) throw parse_error_at_line(reader.line_number(), "no bona fide scores");
  if (set.attacks.empty()) throw parse_error_at_line(reader.line_number(), "no attack scores");
  return set;
}

ScoreSet read_scores(const std::filesystem::path& path) { return parse_scores_csv(read_file(path)); }

void write_scores(const ScoreSet& scores, const std::filesystem::path& path) {
  write_file(path, format_scores_csv(scores));
}

// ---------------------------------------------------------------------------
// Manifest

std::string format_manifest_csv(const DatasetManifest& manifest) {
  manifest.validate();
  std::string out = "id,class,species,split\n";
  for (const auto& e : manifest.entries) {
    csv::check_writable(e.id, "id");
    csv::check_writable(e.species, "species");
    out += e.id + ',' + (e.cls == SampleClass::attack ? "attack" : "bona_fide") + ',' + e.species + ',' +
           to_string(e.split) + '\n';
  }
  return out;
}

DatasetManifest parse_manifest_csv(std::string_view text, std::string source) {
  csv::LineReader reader(text);
  csv::expect_header(reader, "id,class,species,split");
  DatasetManifest manifest;
  manifest.source = std::move(source);
  std::set<std::string, std::less<>> ids;
  std::string_view line;
  while (reader.next(line)) {
    const auto n = reader.line_number();
    const auto f = csv::fields(line, 4, n);
    if (f[0].empty()) throw parse_error_at_line(n, "empty id");
    if (!ids.emplace(f[0]).second) throw parse_error_at_line(n, "duplicate id '" + std::string(f[0]) + "'");
    ManifestEntry e;
    e.id = std::string(f[0]);
    const std::uint8_t label = parse_class(f[1], n);
    e.cls = label ? SampleClass::attack : SampleClass::bona_fide;
    e.species = parse_species(label, f[2], n);
    e.split = parse_split_field(f[3], n);
    manifest.entries.push_back(std::move(e));
  }
  if (manifest.entries.empty()) throw parse_error_at_line(reader.line_number(), "manifest has no entries");
  return manifest;
}

DatasetManifest read_manifest(const std::filesystem::path& path) {
  return parse_manifest_csv(read_file(path), path.stem().string());
}

void write_manifest(const DatasetManifest& manifest, const std::filesystem::path& path) {
  write_file(path, format_manifest_csv(manifest));
}

// ---------------------------------------------------------------------------
// Results

std::string format_results_csv(const std::vector<ResultRow>& rows) {
  std::string out = "model,protocol,held_out,eer,bpcer10,bpcer20,bpcer100\n";
  for (const auto& r : rows) {
    csv::check_writable(r.model, "model");
    csv::check_writable(r.protocol, "protocol");
    csv::check_writable(r.held_out, "held_out");
    out += r.model + ',' + r.protocol + ',' + r.held_out;
    if (r.failure) {
      out += ",,,,\n";
    } else {
      out += ',' + csv::fixed(r.eer, 6) + ',' + csv::fixed(r.bpcer10, 6) + ',' + csv::fixed(r.bpcer20, 6) + ',' +
             csv::fixed(r.bpcer100, 6) + '\n';
    }
  }
  return out;
}

std::vector<ResultRow> parse_results_csv(std::string_view text) {
  csv::LineReader reader(text);
  csv::expect_header(reader, "model,protocol,held_out,eer,bpcer10,bpcer20,bpcer100");
  std::vector<ResultRow> rows;
  std::string_view line;
  while (reader.next(line)) {
    const auto n = reader.line_number();
    const auto f = csv::fields(line, 7, n);
    if (f[0].empty() || f[1].empty() || f[2].empty()) throw parse_error_at_line(n, "empty model, protocol or held_out");
    ResultRow r;
    r.model = std::string(f[0]);
    r.protocol = std::string(f[1]);
    r.held_out = std::string(f[2]);
    const bool all_empty = f[3].empty() && f[4].empty() && f[5].empty() && f[6].empty();
    if (all_empty) {
      r.failure = "failed";
    } else {
      double* targets[] = {&r.eer, &r.bpcer10, &r.bpcer20, &r.bpcer100};
      const char* names[] = {"eer", "bpcer10", "bpcer20", "bpcer100"};
      for (int k = 0; k < 4; ++k) {
        *targets[k] = csv::parse_double(f[3 + k], n, names[k]);
        if (*targets[k] < 0.0 || *targets[k] > 1.0) throw parse_error_at_line(n, std::string(names[k]) + " outside [0,1]");
      }
    }
    rows.push_back(std::move(r));
  }
  return rows;
}

void write_results_table(const std::vector<ResultRow>& rows, const std::filesystem::path& csv_path,
                         const std::filesystem::path& text_path) {
  write_file(csv_path, format_results_csv(rows));
  if (!text_path.empty()) write_file(text_path, render_results_table(rows));
}

// ---------------------------------------------------------------------------
// Head JSON

namespace {

double nine_digits(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return std::strtod(buf, nullptr);
}

json rounded_array(const std::vector<double>& values) {
  json arr = json::array();
  for (double v : values) arr.push_back(nine_digits(v));
  return arr;
}

ParseError schema_error(const std::string& message) { return parse_error_at_byte(0, "head JSON: " + message); }

std::vector<double> number_array(const json& node, const char* key) {
  if (!node.contains(key) || !node.at(key).is_array()) throw schema_error(std::string("missing array '") + key + "'");
  std::vector<double> out;
  for (const auto& v : node.at(key)) {
    if (!v.is_number()) throw schema_error(std::string("non-numeric entry in '") + key + "'");
    out.push_back(v.get<double>());
  }
  return out;
}

std::uint64_t uint_field(const json& node, const char* key, const std::string& context) {
  if (!node.contains(key) || !node.at(key).is_number_unsigned()) {
    throw parse_error_at_byte(0, context + ": missing unsigned integer '" + key + "'");
  }
  return node.at(key).get<std::uint64_t>();
}

json parse_json_text(std::string_view text, const char* what) {
  try {
    return json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    throw parse_error_at_byte(e.byte, std::string(what) + ": malformed JSON");
  }
}

}  // namespace

json head_to_json(const HeadModel& head) {
  json j;
  j["format"] = "padeval-head";
  j["version"] = 1;
  j["input_dim"] = head.input_dim();
  j["hidden_layers"] = head.hidden_layers();
  j["output"] = "sigmoid";
  json layers = json::array();
  for (std::size_t i = 0; i < head.layers().size(); ++i) {
    const auto& l = head.layers()[i];
    layers.push_back({{"inputs", l.inputs},
                      {"outputs", l.outputs},
                      {"activation", i + 1 < head.layers().size() ? "relu" : "identity"},
                      {"weights", rounded_array(l.weights)},
                      {"bias", rounded_array(l.bias)}});
  }
  j["layers"] = std::move(layers);
  return j;
}

json train_config_to_json(const TrainConfig& config) {
  return {{"learning_rate", config.learning_rate}, {"batch_size", config.batch_size},
          {"epochs", config.epochs},               {"optimizer", "sgd"},
          {"seed", config.seed},                   {"hidden_layers", config.hidden_layers},
          {"hidden_width", config.hidden_width}};
}

std::string format_head_json(const HeadModel& head, const TrainConfig* config) {
  json j = head_to_json(head);
  if (config) {
    j["seed"] = config->seed;
    j["train_config"] = train_config_to_json(*config);
  }
  return j.dump(2) + '\n';
}

namespace {

HeadModel parse_head_json_impl(std::string_view text) {
  const json j = parse_json_text(text, "head JSON");
  if (!j.is_object()) throw schema_error("top level must be an object");
  if (!j.contains("format") || j.at("format") != "padeval-head") throw schema_error("format must be \"padeval-head\"");
  if (!j.contains("version") || !j.at("version").is_number_integer()) throw schema_error("missing version");
  if (j.at("version").get<std::int64_t>() != 1) {
    throw schema_error("unsupported version " + j.at("version").dump());
  }
  if (!j.contains("layers") || !j.at("layers").is_array()) throw schema_error("missing layers");
  std::vector<DenseLayer> layers;
  for (const auto& node : j.at("layers")) {
    if (!node.is_object()) throw schema_error("layer must be an object");
    DenseLayer l;
    l.inputs = uint_field(node, "inputs", "head JSON");
    l.outputs = uint_field(node, "outputs", "head JSON");
    l.weights = number_array(node, "weights");
    l.bias = number_array(node, "bias");
    layers.push_back(std::move(l));
  }
  try {
    HeadModel head(std::move(layers));
    if (j.contains("input_dim") && j.at("input_dim") != head.input_dim()) throw schema_error("input_dim disagrees with layers");
    return head;
  } catch (const ParseError&) {
    throw;
  } catch (const Error& e) {
    throw schema_error(e.what());
  }
}

}  // namespace

HeadModel parse_head_json(std::string_view text) {
  try {
    return parse_head_json_impl(text);
  } catch (const json::exception& e) {
    throw schema_error(e.what());
  }
}

HeadModel read_head(const std::filesystem::path& path) { return parse_head_json(read_file(path)); }

void write_head(const HeadModel& head, const std::filesystem::path& path, const TrainConfig* config) {
  write_file(path, format_head_json(head, config));
}

// ---------------------------------------------------------------------------
// Synth spec

namespace {

SynthSpec parse_synth_spec_impl(std::string_view text) {
  const json j = parse_json_text(text, "synth spec");
  auto fail = [](const std::string& m) { return parse_error_at_byte(0, "synth spec: " + m); };
  if (!j.is_object()) throw fail("top level must be an object");
  SynthSpec spec;
  spec.dim = uint_field(j, "dim", "synth spec");
  spec.bona_fide_count = uint_field(j, "bona_fide", "synth spec");
  if (j.contains("seed")) spec.seed = uint_field(j, "seed", "synth spec");
  if (!j.contains("species") || !j.at("species").is_array()) throw fail("missing array 'species'");
  for (const auto& node : j.at("species")) {
    if (!node.is_object()) throw fail("species entries must be objects");
    SynthSpecies s;
    if (!node.contains("name") || !node.at("name").is_string()) throw fail("species needs a string 'name'");
    s.name = node.at("name").get<std::string>();
    s.count = uint_field(node, "count", "synth spec");
    if (!node.contains("d_prime") || !node.at("d_prime").is_number()) throw fail("species needs numeric 'd_prime'");
    s.d_prime = node.at("d_prime").get<double>();
    if (node.contains("direction")) {
      if (!node.at("direction").is_array()) throw fail("'direction' must be an array");
      for (const auto& v : node.at("direction")) {
        if (!v.is_number()) throw fail("'direction' entries must be numbers");
        s.direction.push_back(v.get<double>());
      }
    }
    spec.species.push_back(std::move(s));
  }
  try {
    spec.validate();
  } catch (const Error& e) {
    throw fail(e.what());
  }
  return spec;
}

}  // namespace

SynthSpec parse_synth_spec(std::string_view text) {
  try {
    return parse_synth_spec_impl(text);
  } catch (const json::exception& e) {
    throw parse_error_at_byte(0, std::string("synth spec: ") + e.what());
  }
}

std::string format_synth_spec(const SynthSpec& spec) {
  json j;
  j["dim"] = spec.dim;
  j["bona_fide"] = spec.bona_fide_count;
  j["seed"] = spec.seed;
  json species = json::array();
  for (const auto& s : spec.species) {
    json node = {{"name", s.name}, {"count", s.count}, {"d_prime", s.d_prime}};
    if (!s.direction.empty()) node["direction"] = s.direction;
    species.push_back(std::move(node));
  }
  j["species"] = std::move(species);
  return j.dump(2) + '\n';
}

json metrics_to_json(const MetricsReport& report) {
  json per_pais = json::object();
  for (const auto& [species, value] : report.per_pais_apcer) per_pais[species] = value;
  return {{"eer", report.eer},
          {"eer_threshold", report.eer_threshold},
          {"threshold_source", report.threshold_source == ThresholdSource::test ? "test" : "validation"},
          {"bpcer10", report.bpcer10},
          {"bpcer20", report.bpcer20},
          {"bpcer100", report.bpcer100},
          {"per_pais_apcer", std::move(per_pais)},
          {"worst_case_apcer", report.worst_case_apcer}};
}

}  // namespace pad::io
