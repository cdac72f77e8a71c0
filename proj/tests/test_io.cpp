#include <bit>
#include <cstring>
#include <filesystem>
#include <random>

#include "doctest.h"
#include "padeval/error.hpp"
#include "padeval/io.hpp"

using namespace pad;

namespace {

struct TempDir {
  std::filesystem::path path;
  TempDir() {
    std::random_device rd;
    path = std::filesystem::temp_directory_path() / ("padeval-io-" + std::to_string(rd()));
    std::filesystem::create_directories(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }
};

EmbeddingTable random_table(std::size_t rows, std::size_t dim, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<float> normal(0.0F, 3.0F);
  std::vector<float> values(rows * dim);
  for (float& v : values) v = normal(gen);
  std::vector<RowLabel> labels;
  const char* species[] = {"border", "printed", "screen"};
  for (std::size_t r = 0; r < rows; ++r) {
    const bool attack = r % 2 == 1;
    labels.push_back({static_cast<std::uint8_t>(attack), attack ? species[r % 3] : "bona_fide",
                      static_cast<Split>(r % 3)});
  }
  return EmbeddingTable(dim, std::move(values), std::move(labels));
}

ScoreSet three_species_scores() {
  ScoreSet s;
  s.bona_fide.push_back("b0", 0.125);
  s.bona_fide.push_back("b1", 0.1);
  s.attacks["border"].push_back("x0", 0.9);
  s.attacks["printed"].push_back("x1", 0.30000000000000004);
  s.attacks["printed"].push_back("x2", 1.0);
  s.attacks["screen"].push_back("x3", 0.0);
  return s;
}

SourceLocation location_of(auto&& fn) {
  try {
    fn();
  } catch (const ParseError& e) {
    return e.where();
  }
  FAIL("expected ParseError");
  return {SourceLocation::Kind::line, 0};
}

std::string message_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.what();
  }
  return {};
}

}  // namespace

TEST_CASE("embedding file round-trips bitwise") {
  TempDir dir;
  const auto table = random_table(100, 384, 1);
  const auto path = dir.path / "emb.pade";
  io::write_embeddings(table, path);
  CHECK(std::filesystem::exists(dir.path / "emb.pade.labels.csv"));
  CHECK(std::filesystem::file_size(path) == 20 + 100 * 384 * 4);
  const auto back = io::read_embeddings(path);
  REQUIRE(back.values().size() == table.values().size());
  CHECK(std::memcmp(back.values().data(), table.values().data(), table.values().size() * sizeof(float)) == 0);
  CHECK(back == table);
}

TEST_CASE("embedding header layout") {
  const auto table = random_table(3, 2, 2);
  const auto bytes = io::encode_embedding_payload(table);
  REQUIRE(bytes.size() == 20 + 3 * 2 * 4);
  CHECK(bytes.substr(0, 4) == "PADE");
  const unsigned char expected_header[] = {1, 0, 0, 0, 3, 0, 0, 0, 0, 0, 0, 0, 2, 0, 0, 0};
  CHECK(std::memcmp(bytes.data() + 4, expected_header, sizeof expected_header) == 0);
  const auto first = std::bit_cast<std::uint32_t>(table.values()[0]);
  CHECK(static_cast<unsigned char>(bytes[20]) == (first & 0xFF));
  CHECK(static_cast<unsigned char>(bytes[23]) == (first >> 24));
}

TEST_CASE("embedding decode errors carry byte offsets") {
  const auto table = random_table(4, 3, 3);
  const auto good = io::encode_embedding_payload(table);
  const auto labels = io::format_labels_csv(table);

  auto at = [&](std::string bytes) {
    const auto loc = location_of([&] { io::decode_embeddings(bytes, labels); });
    CHECK(loc.kind == SourceLocation::Kind::byte_offset);
    return loc.value;
  };
  std::string bad_magic = good;
  bad_magic.replace(0, 4, "XXXX");
  CHECK(at(bad_magic) == 0);
  CHECK(at(good.substr(0, 12)) == 12);
  std::string bad_version = good;
  bad_version[4] = 2;
  CHECK(at(bad_version) == 4);
  CHECK(at(good.substr(0, good.size() - 1)) == good.size() - 1);
  CHECK(at(good + "junk") == good.size());
  std::string zero_rows = good;
  std::memset(zero_rows.data() + 8, 0, 8);
  CHECK(at(zero_rows) == 8);
  std::string zero_dim = good;
  std::memset(zero_dim.data() + 16, 0, 4);
  CHECK(at(zero_dim) == 16);
  std::string huge = good;
  std::memset(huge.data() + 8, 0xFF, 8);
  CHECK(at(huge) == good.size());
  std::string nan_value = good;
  const auto nan_bits = std::bit_cast<std::uint32_t>(std::numeric_limits<float>::quiet_NaN());
  std::memcpy(nan_value.data() + 28, &nan_bits, 4);
  CHECK(at(nan_value) == 28);
}

TEST_CASE("sidecar row count mismatch names both counts") {
  const auto table = random_table(100, 2, 4);
  const auto bytes = io::encode_embedding_payload(table);
  auto labels = io::format_labels_csv(table);
  labels.erase(labels.rfind('\n', labels.size() - 2) + 1);
  const auto msg = message_of([&] { io::decode_embeddings(bytes, labels); });
  CHECK(msg.find("99") != std::string::npos);
  CHECK(msg.find("100") != std::string::npos);
}

TEST_CASE("label sidecar errors carry line numbers") {
  auto line = [](std::string text) {
    const auto loc = location_of([&] { io::parse_labels_csv(text); });
    CHECK(loc.kind == SourceLocation::Kind::line);
    return loc.value;
  };
  CHECK(line("row,class,species,split\n") == 1);
  CHECK(line("row_index,class,species,split\n0,bona_fide,bona_fide,train\n2,attack,x,test\n") == 3);
  CHECK(line("row_index,class,species,split\n0,fake,x,train\n") == 2);
  CHECK(line("row_index,class,species,split\n0,attack,,train\n") == 2);
  CHECK(line("row_index,class,species,split\n0,bona_fide,printed,train\n") == 2);
  CHECK(line("row_index,class,species,split\n0,attack,x,holdout\n") == 2);
  CHECK(line("row_index,class,species,split\n0,attack,x\n") == 2);
}

TEST_CASE("score csv round-trip and errors") {
  const auto s = three_species_scores();
  const auto text = io::format_scores_csv(s);
  CHECK(text.rfind("id,class,species,score\nb0,bona_fide,,0.125\n", 0) == 0);
  const auto back = io::parse_scores_csv(text);
  CHECK(back.bona_fide == s.bona_fide);
  CHECK(back.attacks == s.attacks);
  CHECK(io::format_scores_csv(back) == text);

  std::string bad = "id,class,species,score\n";
  for (int i = 0; i < 5; ++i) bad += "b" + std::to_string(i) + ",bona_fide,,0.1\n";
  bad += "a0,attack,printed,1.5\n";
  const auto loc = location_of([&] { io::parse_scores_csv(bad); });
  CHECK(loc.kind == SourceLocation::Kind::line);
  CHECK(loc.value == 7);
  CHECK(message_of([&] { io::parse_scores_csv(bad); }).find("line 7") != std::string::npos);

  const std::string dup = "id,class,species,score\nb,bona_fide,,0.1\na,attack,p,0.2\nb,attack,p,0.3\n";
  CHECK(location_of([&] { io::parse_scores_csv(dup); }).value == 4);
  const std::string no_attacks = "id,class,species,score\nb,bona_fide,,0.1\n";
  CHECK_THROWS_AS(io::parse_scores_csv(no_attacks), ParseError);
  const std::string crlf = "id,class,species,score\r\nb,bona_fide,,0.1\r\na,attack,p,0.2\r\n";
  CHECK(io::parse_scores_csv(crlf).bona_fide.size() == 1);
}

TEST_CASE("manifest csv round-trip") {
  DatasetManifest m;
  m.entries = {{"img-1", SampleClass::bona_fide, "bona_fide", Split::train},
               {"img-2", SampleClass::attack, "screen", Split::val},
               {"img-3", SampleClass::attack, "border", Split::test}};
  TempDir dir;
  io::write_manifest(m, dir.path / "chl.csv");
  const auto back = io::read_manifest(dir.path / "chl.csv");
  CHECK(back.entries == m.entries);
  CHECK(back.source == "chl");
  const std::string empty_species = "id,class,species,split\na,bona_fide,,train\n";
  CHECK(io::parse_manifest_csv(empty_species).entries[0].species == "bona_fide");
  const std::string dup = "id,class,species,split\na,bona_fide,,train\na,attack,x,test\n";
  CHECK(location_of([&] { io::parse_manifest_csv(dup); }).value == 3);
}

TEST_CASE("results csv round-trip and percent rendering") {
  std::vector<ResultRow> rows{{"dinov2", "loo", "border", 0.158655, 0.2, 0.35, 0.5, std::nullopt},
                              {"clip", "loo", "border", 0, 0, 0, 0, std::string("diverged")}};
  const auto text = io::format_results_csv(rows);
  CHECK(text == "model,protocol,held_out,eer,bpcer10,bpcer20,bpcer100\n"
                "dinov2,loo,border,0.158655,0.200000,0.350000,0.500000\n"
                "clip,loo,border,,,,\n");
  const auto back = io::parse_results_csv(text);
  REQUIRE(back.size() == 2);
  CHECK(back[0].eer == 0.158655);
  CHECK(back[1].failure);
  CHECK(io::format_results_csv(back) == text);
  CHECK(format_percent(back[0].eer) == "15.87");

  TempDir dir;
  io::write_results_table(rows, dir.path / "r.csv", dir.path / "r.txt");
  CHECK(io::read_file(dir.path / "r.csv") == text);
  CHECK(io::read_file(dir.path / "r.txt").find("15.87") != std::string::npos);
}

TEST_CASE("head json round-trip") {
  Rng rng(6);
  const auto head = HeadModel::initialize(5, 2, 3, rng);
  TrainConfig config;
  config.seed = 99;
  const auto text = io::format_head_json(head, &config);
  CHECK(text.find("\"padeval-head\"") != std::string::npos);
  CHECK(text.find("\"seed\": 99") != std::string::npos);
  const auto back = io::parse_head_json(text);
  REQUIRE(back.parameter_count() == head.parameter_count());
  const auto a = head.parameters();
  const auto b = back.parameters();
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(std::abs(a[i] - b[i]) <= 1e-8 * std::abs(a[i]) + 1e-300);
  CHECK(io::format_head_json(back, &config) == text);

  const auto exact = HeadModel::zeros(3, 1, 2);
  CHECK(io::parse_head_json(io::format_head_json(exact)) == exact);
}

TEST_CASE("head json errors are parse errors") {
  CHECK_THROWS_AS(io::parse_head_json("{"), ParseError);
  CHECK_THROWS_AS(io::parse_head_json("[]"), ParseError);
  CHECK_THROWS_AS(io::parse_head_json(R"({"format":"padeval-head","version":2,"layers":[]})"), ParseError);
  CHECK_THROWS_AS(io::parse_head_json(R"({"format":"other","version":1,"layers":[]})"), ParseError);
  auto text = io::format_head_json(HeadModel::zeros(2, 0, 0));
  const auto pos = text.find("\"inputs\": 2");
  REQUIRE(pos != std::string::npos);
  text.replace(pos, 11, "\"inputs\": 3");
  CHECK_THROWS_AS(io::parse_head_json(text), Error);
}

TEST_CASE("synth spec json") {
  const std::string text = R"({"dim": 4, "bona_fide": 10, "seed": 3,
    "species": [{"name": "printed", "count": 5, "d_prime": 2.0},
                {"name": "screen", "count": 6, "d_prime": 1.5, "direction": [0, 1, 0, 0]}]})";
  const auto spec = io::parse_synth_spec(text);
  CHECK(spec.dim == 4);
  CHECK(spec.bona_fide_count == 10);
  CHECK(spec.seed == 3);
  REQUIRE(spec.species.size() == 2);
  CHECK(spec.species[1].direction == std::vector<double>{0, 1, 0, 0});
  const auto again = io::parse_synth_spec(io::format_synth_spec(spec));
  CHECK(again.dim == spec.dim);
  CHECK(again.species[1].d_prime == 1.5);
  CHECK(io::format_synth_spec(again) == io::format_synth_spec(spec));
  CHECK_THROWS_AS(io::parse_synth_spec(R"({"dim": "four"})"), ParseError);
  CHECK_THROWS_AS(io::parse_synth_spec("nonsense"), ParseError);
}

TEST_CASE("writers refuse values that would break the csv") {
  ScoreSet s = three_species_scores();
  s.bona_fide.ids[0] = "a,b";
  CHECK_THROWS_AS(io::format_scores_csv(s), Error);
}

TEST_CASE("missing files are io errors") {
  try {
    io::read_file("/nonexistent/padeval/file");
    FAIL("expected io error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::io);
  }
}
