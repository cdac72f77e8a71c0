#include <algorithm>
#include <random>
#include <set>

#include "doctest.h"
#include "padeval/error.hpp"
#include "padeval/protocol.hpp"
#include "padeval/synth.hpp"

using namespace pad;

namespace {

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected pad::Error");
  return ErrorCode::io;
}

std::string message_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.what();
  }
  return {};
}

void add(DatasetManifest& m, const std::string& species, Split split, std::size_t count) {
  for (std::size_t i = 0; i < count; ++i) {
    const bool bona = species == kBonaFideSpecies;
    m.entries.push_back({species + "-" + to_string(split) + "-" + std::to_string(i),
                         bona ? SampleClass::bona_fide : SampleClass::attack, species, split});
  }
}

DatasetManifest three_species_manifest() {
  DatasetManifest m;
  for (const char* s : {"bona_fide", "border", "printed", "screen"}) {
    add(m, s, Split::train, 6);
    add(m, s, Split::val, 2);
    add(m, s, Split::test, 2);
  }
  return m;
}

std::set<std::string> species_ids(const DatasetManifest& m, const std::string& species) {
  std::set<std::string> ids;
  for (const auto& e : m.entries) {
    if (e.species == species) ids.insert(e.id);
  }
  return ids;
}

std::string species_of(const DatasetManifest& m, const std::string& id) {
  for (const auto& e : m.entries) {
    if (e.id == id) return e.species;
  }
  return {};
}

DatasetManifest random_manifest(std::mt19937_64& gen) {
  std::uniform_int_distribution<int> n_species(1, 5), n_entries(1, 60), pick(0, 99);
  const int k = n_species(gen);
  DatasetManifest m;
  const int n = n_entries(gen);
  for (int i = 0; i < n; ++i) {
    const int s = pick(gen) % (k + 1);
    const std::string species = s == 0 ? kBonaFideSpecies : "pais" + std::to_string(s);
    const Split split = static_cast<Split>(pick(gen) % 3);
    m.entries.push_back({"id" + std::to_string(i), s == 0 ? SampleClass::bona_fide : SampleClass::attack,
                         species, split});
  }
  return m;
}

SynthDataset gaussian(double d_prime, std::size_t per_class, std::uint64_t seed) {
  SynthSpec spec;
  spec.dim = 16;
  spec.bona_fide_count = per_class;
  spec.species = {{"attack", per_class, d_prime, {}}};
  spec.seed = seed;
  return generate(spec);
}

SynthSpec three_species_spec(std::size_t per_class) {
  SynthSpec spec;
  spec.dim = 8;
  spec.bona_fide_count = per_class;
  spec.species = {{"border", per_class, 3.0, {}}, {"printed", per_class, 3.0, {}}, {"screen", per_class, 3.0, {}}};
  spec.seed = 4;
  return spec;
}

}  // namespace

TEST_CASE("loo split with three species") {
  const auto m = three_species_manifest();
  const auto split = build_loo_split(m, "printed");
  REQUIRE(split.held_out == "printed");
  for (const auto& id : split.train) {
    const auto s = species_of(m, id);
    CHECK((s == "bona_fide" || s == "border" || s == "screen"));
  }
  for (const auto& id : split.val) CHECK(species_of(m, id) != "printed");
  // Every printed entry, from any split, is in test; test bona fide are the
  // manifest's test bona fide.
  const auto printed = species_ids(m, "printed");
  std::set<std::string> test(split.test.begin(), split.test.end());
  for (const auto& id : printed) CHECK(test.count(id) == 1);
  std::size_t bona_in_test = 0;
  for (const auto& id : split.test) {
    const auto s = species_of(m, id);
    CHECK((s == "printed" || s == "bona_fide"));
    bona_in_test += s == "bona_fide" ? 1 : 0;
  }
  CHECK(bona_in_test == 2);
  CHECK(split.test.size() == printed.size() + 2);
  CHECK(split.train.size() == 6 * 3);
}

TEST_CASE("loo split with two species trains on the complement") {
  DatasetManifest m;
  add(m, "bona_fide", Split::train, 4);
  add(m, "A", Split::train, 4);
  add(m, "B", Split::train, 4);
  add(m, "bona_fide", Split::test, 2);
  add(m, "A", Split::test, 2);
  const auto split = build_loo_split(m, "A");
  for (const auto& id : split.train) {
    const auto s = species_of(m, id);
    if (s != "bona_fide") CHECK(s == "B");
  }
}

TEST_CASE("loo split errors") {
  const auto m = three_species_manifest();
  CHECK(code_of([&] { build_loo_split(m, "hologram"); }) == ErrorCode::unknown_species);

  DatasetManifest single;
  add(single, "bona_fide", Split::train, 2);
  add(single, "printed", Split::train, 2);
  add(single, "bona_fide", Split::test, 2);
  CHECK(code_of([&] { build_loo_split(single, "printed"); }) == ErrorCode::invalid_input);

  // Holding out the only trained species leaves train without attacks.
  DatasetManifest lopsided;
  add(lopsided, "bona_fide", Split::train, 2);
  add(lopsided, "printed", Split::train, 2);
  add(lopsided, "screen", Split::test, 2);
  add(lopsided, "bona_fide", Split::test, 2);
  CHECK(code_of([&] { build_loo_split(lopsided, "printed"); }) == ErrorCode::empty_split);

  DatasetManifest dup = m;
  dup.entries.push_back(dup.entries.front());
  CHECK(code_of([&] { build_loo_split(dup, "printed"); }) == ErrorCode::invalid_input);
}

TEST_CASE("loo exclusion and disjointness over random manifests") {
  std::mt19937_64 gen(2718);
  std::size_t produced = 0;
  for (int trial = 0; trial < 500; ++trial) {
    const auto m = random_manifest(gen);
    for (const auto& held : m.species()) {
      ProtocolSplit split;
      try {
        split = build_loo_split(m, held);
      } catch (const Error&) {
        continue;
      }
      ++produced;
      const auto held_ids = species_ids(m, held);
      std::set<std::string> train(split.train.begin(), split.train.end());
      std::set<std::string> val(split.val.begin(), split.val.end());
      std::set<std::string> test(split.test.begin(), split.test.end());
      for (const auto& id : held_ids) {
        CHECK(train.count(id) == 0);
        CHECK(val.count(id) == 0);
        CHECK(test.count(id) == 1);
      }
      CHECK(train.size() + val.size() + test.size() == split.train.size() + split.val.size() + split.test.size());
      for (const auto& id : train) CHECK((val.count(id) == 0 && test.count(id) == 0));
      for (const auto& id : val) CHECK(test.count(id) == 0);
      // No id takes two roles; the ones left out are exactly the test-split
      // attacks of other species.
      for (const auto& e : m.entries) {
        const int roles = static_cast<int>(train.count(e.id) + val.count(e.id) + test.count(e.id));
        const bool dropped = e.split == Split::test && e.cls == SampleClass::attack && e.species != held;
        CHECK(roles == (dropped ? 0 : 1));
      }
    }
  }
  CHECK(produced > 100);
}

TEST_CASE("two-class split mirrors the manifest") {
  // Train counts of a manifest shaped like the private dataset's table:
  // bona fide 3,510, border 13,397, printed 4,515, screen 3,180.
  DatasetManifest m;
  add(m, "bona_fide", Split::train, 3510);
  add(m, "border", Split::train, 13397);
  add(m, "printed", Split::train, 4515);
  add(m, "screen", Split::train, 3180);
  add(m, "bona_fide", Split::val, 1171);
  add(m, "border", Split::val, 4430);
  add(m, "bona_fide", Split::test, 1171);
  add(m, "screen", Split::test, 1062);
  const auto split = build_two_class_split(m);
  CHECK(!split.held_out);
  CHECK(split.train.size() == 24602);
  CHECK(split.val.size() == 1171 + 4430);
  CHECK(split.test.size() == 1171 + 1062);
  CHECK(build_two_class_split(m) == split);

  DatasetManifest no_test;
  add(no_test, "bona_fide", Split::train, 2);
  add(no_test, "printed", Split::train, 2);
  add(no_test, "printed", Split::val, 2);
  CHECK(code_of([&] { build_two_class_split(no_test); }) == ErrorCode::empty_split);
}

TEST_CASE("two-class split covers every id exactly once over random manifests") {
  std::mt19937_64 gen(31);
  for (int trial = 0; trial < 300; ++trial) {
    const auto m = random_manifest(gen);
    ProtocolSplit split;
    try {
      split = build_two_class_split(m);
    } catch (const Error&) {
      continue;
    }
    std::multiset<std::string> all(split.train.begin(), split.train.end());
    all.insert(split.val.begin(), split.val.end());
    all.insert(split.test.begin(), split.test.end());
    CHECK(all.size() == m.entries.size());
    for (const auto& e : m.entries) CHECK(all.count(e.id) == 1);
  }
}

TEST_CASE("experiment on separable synthetic data reports zero eer") {
  SynthSpec spec;
  spec.dim = 4;
  spec.bona_fide_count = 200;
  // A shared direction keeps the data separable when either species is held out.
  const std::vector<double> axis{1, 0, 0, 0};
  spec.species = {{"border", 200, 12.0, axis}, {"screen", 200, 12.0, axis}};
  spec.seed = 3;
  const auto data = generate(spec);
  TrainConfig config;
  config.learning_rate = 0.1;
  for (const auto& split : {build_two_class_split(data.manifest), build_loo_split(data.manifest, "screen")}) {
    const auto r = run_experiment(data.table, split, config);
    CHECK(r.row.eer == 0.0);
  }
}

TEST_CASE("experiment is deterministic and matches the Gaussian oracle") {
  const auto data = gaussian(2.0, 10000, 7);
  const auto split = build_two_class_split(data.manifest);
  TrainConfig config;
  config.seed = 7;
  ExperimentOptions options;
  options.model = "probe";
  const auto a = run_experiment(data.table, split, config, options);
  const auto b = run_experiment(data.table, split, config, options);
  CHECK(a.row == b.row);
  CHECK(a.row.model == "probe");
  CHECK(a.row.protocol == "two-class");
  CHECK(a.row.held_out == kAllAttacks);
  CHECK(std::abs(a.row.eer - analytic_eer(2.0)) <= 0.01);
  CHECK(a.row.bpcer10 >= a.row.eer - 1e-12);
  CHECK(a.row.bpcer100 >= a.row.bpcer20);
  CHECK(a.row.bpcer20 >= a.row.bpcer10);
  CHECK(!a.det.points.empty());

  ExperimentOptions val_opts = options;
  val_opts.threshold_source = ThresholdSource::validation;
  const auto v = run_experiment(data.table, split, config, val_opts);
  CHECK(v.report.threshold_source == ThresholdSource::validation);
  CHECK(std::abs(v.row.eer - analytic_eer(2.0)) <= 0.015);
}

TEST_CASE("experiment reports every missing id") {
  const auto data = gaussian(1.0, 20, 1);
  auto split = build_two_class_split(data.manifest);
  split.test.push_back("9999");
  split.train.push_back("row-x");
  auto run = [&] { run_experiment(data.table, split, TrainConfig{}); };
  CHECK(code_of(run) == ErrorCode::coverage_gap);
  const auto msg = message_of(run);
  CHECK(msg.find("9999") != std::string::npos);
  CHECK(msg.find("row-x") != std::string::npos);
  CHECK(msg.find("2 id(s)") != std::string::npos);
}

TEST_CASE("experiment with a learning-rate grid records the chosen rate") {
  const auto data = gaussian(2.0, 500, 5);
  ExperimentOptions options;
  options.lr_grid = {0.1, 1e-6};
  TrainConfig config;
  config.epochs = 10;
  const auto r = run_experiment(data.table, build_two_class_split(data.manifest), config, options);
  CHECK((r.config.learning_rate == 0.1 || r.config.learning_rate == 1e-6));
  CHECK(r.head == train_head(data.table, resolve_rows(data.table, build_two_class_split(data.manifest).train), r.config));
}

TEST_CASE("benchmark row counts and order") {
  const auto data = generate(three_species_spec(100));
  TrainConfig config;
  config.epochs = 5;
  const std::vector<NamedTable> tables{{"zeta", data.table}, {"alpha", data.table}};
  const auto loo = run_benchmark(tables, data.manifest, Protocol::loo_all_species, config);
  REQUIRE(loo.size() == 6);
  const char* expected_species[] = {"border", "printed", "screen"};
  for (std::size_t i = 0; i < 6; ++i) {
    CHECK(loo[i].model == (i < 3 ? "zeta" : "alpha"));
    CHECK(loo[i].held_out == expected_species[i % 3]);
    CHECK(loo[i].protocol == "loo");
    CHECK(!loo[i].failure);
  }
  const auto two = run_benchmark(tables, data.manifest, Protocol::two_class, config);
  REQUIRE(two.size() == 2);
  CHECK(two[0].held_out == kAllAttacks);
}

TEST_CASE("benchmark output does not depend on the job count") {
  const auto data = generate(three_species_spec(150));
  TrainConfig config;
  config.epochs = 5;
  const std::vector<NamedTable> tables{{"a", data.table}, {"b", data.table}, {"c", data.table}};
  const auto serial = run_benchmark(tables, data.manifest, Protocol::loo_all_species, config, {}, 1);
  for (unsigned jobs : {2u, 4u, 16u}) {
    const auto parallel = run_benchmark(tables, data.manifest, Protocol::loo_all_species, config, {}, jobs);
    CHECK(parallel == serial);
    CHECK(render_results_table(parallel) == render_results_table(serial));
  }
}

TEST_CASE("benchmark eers follow the separation ordering") {
  std::vector<NamedTable> tables;
  DatasetManifest manifest;
  for (double d : {0.5, 1.5, 3.0}) {
    auto data = gaussian(d, 3000, 11);
    manifest = data.manifest;
    tables.push_back({"d" + std::to_string(d), std::move(data.table)});
  }
  TrainConfig config;
  config.learning_rate = 0.01;
  config.epochs = 20;
  const auto rows = run_benchmark(tables, manifest, Protocol::two_class, config, {}, 3);
  REQUIRE(rows.size() == 3);
  CHECK(rows[0].eer > rows[1].eer);
  CHECK(rows[1].eer > rows[2].eer);
}

TEST_CASE("a failing model becomes a failed row and the run continues") {
  const auto data = generate(three_species_spec(50));
  auto spec = three_species_spec(10);
  const auto small = generate(spec);
  TrainConfig config;
  config.epochs = 2;
  const std::vector<NamedTable> tables{{"short", small.table}, {"full", data.table}};
  const auto rows = run_benchmark(tables, data.manifest, Protocol::two_class, config, {}, 2);
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].failure);
  CHECK(rows[0].failure->find("not covered") != std::string::npos);
  CHECK(!rows[1].failure);
  const auto text = render_results_table(rows);
  CHECK(text.find("FAILED") != std::string::npos);
  CHECK(text.find("failed: short / all-attacks") != std::string::npos);
}

TEST_CASE("manifest and table must agree") {
  const auto data = generate(three_species_spec(20));
  auto m = data.manifest;
  CHECK_NOTHROW(check_manifest_matches(data.table, m));
  for (auto& e : m.entries) {
    if (e.species == "printed") {
      e.species = "screen";
      break;
    }
  }
  CHECK(code_of([&] { check_manifest_matches(data.table, m); }) == ErrorCode::invalid_input);
}

TEST_CASE("percent formatting") {
  CHECK(format_percent(0.158655) == "15.87");
  CHECK(format_percent(0.0) == "0.00");
  CHECK(format_percent(1.0) == "100.00");
  CHECK(format_percent(0.041250) == "4.13");
  CHECK(format_percent(0.041249) == "4.12");
  CHECK(format_percent(0.08245) == "8.25");
}

TEST_CASE("results table layout") {
  std::vector<ResultRow> rows{{"dinov2", "loo", "border", 0.0413, 0.05, 0.1, 0.2, std::nullopt},
                              {"dinov2", "loo", "printed", 0.1, 0.2, 0.3, 0.4, std::nullopt}};
  const auto text = render_results_table(rows);
  CHECK(text.find("border") != std::string::npos);
  CHECK(text.find("EER(%)") != std::string::npos);
  CHECK(text.find("4.13") != std::string::npos);
  CHECK(text.find("40.00") != std::string::npos);
  std::size_t lines = 0;
  for (char c : text) lines += c == '\n' ? 1 : 0;
  CHECK(lines == 4);
}
