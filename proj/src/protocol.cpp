#include "padeval/protocol.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <set>
#include <thread>

#include "padeval/error.hpp"

namespace pad {

void DatasetManifest::validate() const {
  std::set<std::string_view> ids;
  for (const auto& e : entries) {
    if (e.id.empty()) throw Error(ErrorCode::invalid_input, "manifest entry with empty id");
    if (!ids.insert(e.id).second) throw Error(ErrorCode::invalid_input, "duplicate manifest id '" + e.id + "'");
    const bool bona_species = e.species == kBonaFideSpecies;
    if ((e.cls == SampleClass::bona_fide) != bona_species || e.species.empty()) {
      throw Error(ErrorCode::invalid_input,
                  "manifest id '" + e.id + "': species '" + e.species + "' inconsistent with class");
    }
  }
}

std::vector<std::string> DatasetManifest::species() const {
  std::set<std::string> names;
  for (const auto& e : entries) {
    if (e.cls == SampleClass::attack) names.insert(e.species);
  }
  return {names.begin(), names.end()};
}

namespace {

void require_both_classes(const DatasetManifest& manifest, const std::vector<std::string>& ids,
                          const char* role) {
  std::set<std::string_view> wanted(ids.begin(), ids.end());
  bool bona = false;
  bool attack = false;
  for (const auto& e : manifest.entries) {
    if (!wanted.count(e.id)) continue;
    (e.cls == SampleClass::bona_fide ? bona : attack) = true;
  }
  if (!bona || !attack) {
    throw Error(ErrorCode::empty_split, std::string(role) + " split lacks " +
                                            (bona ? "attack" : "bona fide") + " entries");
  }
}

}  // namespace

ProtocolSplit build_loo_split(const DatasetManifest& manifest, const std::string& held_out) {
  manifest.validate();
  const auto species = manifest.species();
  if (std::find(species.begin(), species.end(), held_out) == species.end()) {
    throw Error(ErrorCode::unknown_species, "species '" + held_out + "' not in manifest");
  }
  if (species.size() < 2) {
    throw Error(ErrorCode::invalid_input, "leave-one-out needs at least two attack species");
  }
  ProtocolSplit split;
  split.held_out = held_out;
  for (const auto& e : manifest.entries) {
    if (e.species == held_out) {
      split.test.push_back(e.id);
    } else if (e.split == Split::train) {
      split.train.push_back(e.id);
    } else if (e.split == Split::val) {
      split.val.push_back(e.id);
    } else if (e.cls == SampleClass::bona_fide) {
      split.test.push_back(e.id);
    }
  }
  require_both_classes(manifest, split.train, "train");
  require_both_classes(manifest, split.test, "test");
  return split;
}

ProtocolSplit build_two_class_split(const DatasetManifest& manifest) {
  manifest.validate();
  ProtocolSplit split;
  for (const auto& e : manifest.entries) {
    switch (e.split) {
      case Split::train: split.train.push_back(e.id); break;
      case Split::val: split.val.push_back(e.id); break;
      case Split::test: split.test.push_back(e.id); break;
    }
  }
  for (const auto* role : {&split.train, &split.val, &split.test}) {
    if (role->empty()) throw Error(ErrorCode::empty_split, "manifest has an empty split");
  }
  require_both_classes(manifest, split.train, "train");
  require_both_classes(manifest, split.test, "test");
  return split;
}

std::vector<std::size_t> resolve_rows(const EmbeddingTable& table, const std::vector<std::string>& ids) {
  std::vector<std::size_t> rows;
  rows.reserve(ids.size());
  std::vector<std::string> missing;
  for (const auto& id : ids) {
    std::size_t row = 0;
    const auto [ptr, ec] = std::from_chars(id.data(), id.data() + id.size(), row);
    if (id.empty() || ec != std::errc() || ptr != id.data() + id.size() || row >= table.rows()) {
      missing.push_back(id);
    } else {
      rows.push_back(row);
    }
  }
  if (!missing.empty()) {
    std::string list;
    for (std::size_t i = 0; i < missing.size(); ++i) list += (i ? ", " : "") + missing[i];
    throw Error(ErrorCode::coverage_gap,
                std::to_string(missing.size()) + " id(s) not covered by the embedding table: " + list);
  }
  return rows;
}

void check_manifest_matches(const EmbeddingTable& table, const DatasetManifest& manifest) {
  std::vector<std::string> ids;
  ids.reserve(manifest.entries.size());
  for (const auto& e : manifest.entries) ids.push_back(e.id);
  const auto rows = resolve_rows(table, ids);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& e = manifest.entries[i];
    const auto& l = table.label(rows[i]);
    if (l.label != static_cast<std::uint8_t>(e.cls) || l.species != e.species) {
      throw Error(ErrorCode::invalid_input, "manifest id '" + e.id + "' (" + e.species +
                                                ") disagrees with embedding row label (" + l.species + ")");
    }
  }
}

const char* to_string(Protocol protocol) noexcept {
  return protocol == Protocol::two_class ? "two-class" : "loo";
}

ExperimentResult run_experiment(const EmbeddingTable& table, const ProtocolSplit& split,
                                const TrainConfig& config, const ExperimentOptions& options) {
  std::vector<std::string> all_ids = split.train;
  all_ids.insert(all_ids.end(), split.val.begin(), split.val.end());
  all_ids.insert(all_ids.end(), split.test.begin(), split.test.end());
  resolve_rows(table, all_ids);  // reports every missing id at once

  const auto train_rows = resolve_rows(table, split.train);
  const auto val_rows = resolve_rows(table, split.val);
  const auto test_rows = resolve_rows(table, split.test);

  ExperimentResult result;
  result.config = config;
  if (!options.lr_grid.empty()) {
    result.config = grid_search(table, train_rows, val_rows, options.lr_grid, config).best;
  }
  result.head = train_head(table, train_rows, result.config);

  const ScoreSet test = predict_scores(result.head, table, test_rows);
  if (options.threshold_source == ThresholdSource::validation) {
    if (val_rows.empty()) throw Error(ErrorCode::empty_split, "validation threshold needs val rows");
    result.report = compute_report(test, predict_scores(result.head, table, val_rows));
  } else {
    result.report = compute_report(test);
  }
  result.det = sweep_det(test.bona_fide.scores, test.pooled_attacks());

  auto& row = result.row;
  row.model = options.model;
  row.protocol = split.held_out ? "loo" : "two-class";
  row.held_out = split.held_out.value_or(kAllAttacks);
  row.eer = result.report.eer;
  row.bpcer10 = result.report.bpcer10;
  row.bpcer20 = result.report.bpcer20;
  row.bpcer100 = result.report.bpcer100;
  return result;
}

std::vector<ResultRow> run_benchmark(const std::vector<NamedTable>& tables,
                                     const DatasetManifest& manifest, Protocol protocol,
                                     const TrainConfig& config, const ExperimentOptions& options,
                                     unsigned jobs) {
  struct Task {
    const NamedTable* table;
    std::optional<std::string> held_out;
  };
  std::vector<Task> tasks;
  const auto species = manifest.species();
  for (const auto& t : tables) {
    if (protocol == Protocol::two_class) {
      tasks.push_back({&t, std::nullopt});
    } else {
      for (const auto& s : species) tasks.push_back({&t, s});
    }
  }

  std::vector<ResultRow> rows(tasks.size());
  auto run_task = [&](std::size_t i) {
    const Task& task = tasks[i];
    ResultRow& row = rows[i];
    row.model = task.table->model;
    row.protocol = to_string(protocol);
    row.held_out = task.held_out.value_or(kAllAttacks);
    try {
      check_manifest_matches(task.table->table, manifest);
      const ProtocolSplit split = task.held_out ? build_loo_split(manifest, *task.held_out)
                                                : build_two_class_split(manifest);
      ExperimentOptions opts = options;
      opts.model = task.table->model;
      row = run_experiment(task.table->table, split, config, opts).row;
    } catch (const std::exception& e) {
      row.failure = e.what();
    }
  };

  const unsigned workers = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(tasks.size())));
  if (workers <= 1) {
    for (std::size_t i = 0; i < tasks.size(); ++i) run_task(i);
    return rows;
  }
  std::atomic<std::size_t> next{0};
  {
    std::vector<std::jthread> pool;
    for (unsigned w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < tasks.size(); i = next++) run_task(i);
      });
    }
  }
  return rows;
}

std::string format_percent(double fraction) {
  const long long micros = std::llround(fraction * 1e6);
  const bool negative = micros < 0;
  const long long hundredths = (std::llabs(micros) + 50) / 100;
  char buf[48];
  std::snprintf(buf, sizeof buf, "%s%lld.%02lld", negative && hundredths ? "-" : "", hundredths / 100,
                hundredths % 100);
  return buf;
}

namespace {

std::string pad_right(std::string s, std::size_t width) {
  if (s.size() < width) s.append(width - s.size(), ' ');
  return s;
}

std::string pad_left(std::string s, std::size_t width) {
  if (s.size() < width) s.insert(0, width - s.size(), ' ');
  return s;
}

}  // namespace

std::string render_results_table(const std::vector<ResultRow>& rows) {
  std::vector<std::string> models;
  std::vector<std::string> groups;
  for (const auto& r : rows) {
    if (std::find(models.begin(), models.end(), r.model) == models.end()) models.push_back(r.model);
    if (std::find(groups.begin(), groups.end(), r.held_out) == groups.end()) groups.push_back(r.held_out);
  }
  constexpr std::size_t kCell = 9;
  constexpr std::size_t kGroup = 4 * kCell;
  std::size_t model_width = 5;
  for (const auto& m : models) model_width = std::max(model_width, m.size());

  std::string out = pad_right("", model_width);
  for (const auto& g : groups) out += " | " + pad_right(g, kGroup);
  out += '\n';
  out += pad_right("Model", model_width);
  for (std::size_t g = 0; g < groups.size(); ++g) {
    out += " | " + pad_left("EER(%)", kCell) + pad_left("BPCER10", kCell) + pad_left("BPCER20", kCell) +
           pad_left("BPCER100", kCell);
  }
  out += '\n';
  out += std::string(model_width, '-');
  for (std::size_t g = 0; g < groups.size(); ++g) out += "-+-" + std::string(kGroup, '-');
  out += '\n';

  std::vector<std::string> notes;
  for (const auto& m : models) {
    out += pad_right(m, model_width);
    for (const auto& g : groups) {
      auto it = std::find_if(rows.begin(), rows.end(),
                             [&](const ResultRow& r) { return r.model == m && r.held_out == g; });
      out += " | ";
      if (it == rows.end()) {
        out += pad_right("", kGroup);
      } else if (it->failure) {
        out += pad_right(pad_left("FAILED", kCell), kGroup);
        notes.push_back(m + " / " + g + ": " + *it->failure);
      } else {
        out += pad_left(format_percent(it->eer), kCell) + pad_left(format_percent(it->bpcer10), kCell) +
               pad_left(format_percent(it->bpcer20), kCell) + pad_left(format_percent(it->bpcer100), kCell);
      }
    }
    out += '\n';
  }
  for (const auto& n : notes) out += "failed: " + n + '\n';
  return out;
}

}  // namespace pad
