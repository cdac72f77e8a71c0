#include "cli.hpp"

#include <filesystem>
#include <iostream>
#include <optional>

#include "CLI11.hpp"
#include "json.hpp"
#include "padeval/det_curve.hpp"
#include "padeval/error.hpp"
#include "padeval/fusion.hpp"
#include "padeval/head.hpp"
#include "padeval/io.hpp"
#include "padeval/protocol.hpp"
#include "padeval/score_metrics.hpp"
#include "padeval/synth.hpp"

namespace pad::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct TrainFlags {
  double lr = 1e-3;
  std::size_t epochs = 100;
  std::size_t batch = 64;
  std::size_t hidden_layers = 0;
  std::size_t hidden_width = 64;
  std::uint64_t seed = 0;
  bool grid = false;

  void add_to(CLI::App& app) {
    app.add_option("--lr", lr, "SGD learning rate")->capture_default_str();
    app.add_option("--epochs", epochs, "Training epochs")->capture_default_str();
    app.add_option("--batch", batch, "Mini-batch size")->capture_default_str();
    app.add_option("--hidden-layers", hidden_layers, "Hidden layers in the head (0-3)")
        ->check(CLI::Range(0, 3))
        ->capture_default_str();
    app.add_option("--hidden-width", hidden_width, "Units per hidden layer")->capture_default_str();
    app.add_option("--seed", seed, "Seed for initialization and shuffling")->capture_default_str();
    app.add_flag("--grid", grid, "Grid-search the learning rate over 1e-3..1e-6 on the val split");
  }

  TrainConfig config() const {
    TrainConfig c;
    c.learning_rate = lr;
    c.epochs = epochs;
    c.batch_size = batch;
    c.hidden_layers = hidden_layers;
    c.hidden_width = hidden_width;
    c.seed = seed;
    c.validate();
    return c;
  }
};

json row_to_json(const ResultRow& r) {
  json j = {{"model", r.model}, {"protocol", r.protocol}, {"held_out", r.held_out}};
  if (r.failure) {
    j["failure"] = *r.failure;
  } else {
    j["eer"] = r.eer;
    j["bpcer10"] = r.bpcer10;
    j["bpcer20"] = r.bpcer20;
    j["bpcer100"] = r.bpcer100;
  }
  return j;
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::io, "cannot create output directory '" + dir.string() + "'");
}

void write_json(const fs::path& path, const json& j) { io::write_file(path, j.dump(2) + '\n'); }

ProtocolSplit split_for(const DatasetManifest& manifest, const std::string& held_out) {
  return held_out.empty() ? build_two_class_split(manifest) : build_loo_split(manifest, held_out);
}

ScoreSet subset(const ScoreSet& scores, const DatasetManifest& manifest, Split split) {
  ScoreSet out;
  std::vector<std::string> missing;
  std::map<std::string, std::pair<const std::string*, double>> by_id;
  for (std::size_t i = 0; i < scores.bona_fide.size(); ++i) {
    by_id[scores.bona_fide.ids[i]] = {nullptr, scores.bona_fide.scores[i]};
  }
  for (const auto& [species, g] : scores.attacks) {
    for (std::size_t i = 0; i < g.size(); ++i) by_id[g.ids[i]] = {&species, g.scores[i]};
  }
  for (const auto& e : manifest.entries) {
    if (e.split != split) continue;
    auto it = by_id.find(e.id);
    if (it == by_id.end()) {
      missing.push_back(e.id);
      continue;
    }
    const bool attack = it->second.first != nullptr;
    if (attack != (e.cls == SampleClass::attack) || (attack && *it->second.first != e.species)) {
      throw Error(ErrorCode::invalid_input, "score id '" + e.id + "' disagrees with the manifest label");
    }
    (attack ? out.attacks[e.species] : out.bona_fide).push_back(e.id, it->second.second);
  }
  if (!missing.empty()) {
    throw Error(ErrorCode::coverage_gap, std::to_string(missing.size()) + " manifest id(s) have no score, first '" +
                                             missing.front() + "'");
  }
  return out;
}

// ---------------------------------------------------------------------------

struct SynthCommand {
  std::string spec_path;
  std::optional<std::uint64_t> seed;
  std::string out_dir = ".";

  void add_to(CLI::App& app) {
    app.add_option("--spec", spec_path, "Synthetic dataset description (JSON)")->required();
    app.add_option("--seed", seed, "Override the spec's seed");
    app.add_option("--out", out_dir, "Output directory")->capture_default_str();
  }

  void run(std::ostream& out) const {
    SynthSpec spec = io::parse_synth_spec(io::read_file(spec_path));
    if (seed) spec.seed = *seed;
    const SynthDataset data = generate(spec);
    const fs::path dir(out_dir);
    ensure_dir(dir);
    io::write_embeddings(data.table, dir / "embeddings.pade");
    io::write_manifest(data.manifest, dir / "manifest.csv");
    io::write_file(dir / "spec.json", io::format_synth_spec(spec));

    json summary = {{"command", "synth"},
                    {"seed", spec.seed},
                    {"rows", data.table.rows()},
                    {"dim", data.table.dim()},
                    {"species", json::array()},
                    {"outputs",
                     {(dir / "embeddings.pade").string(), io::labels_path_for(dir / "embeddings.pade").string(),
                      (dir / "manifest.csv").string(), (dir / "spec.json").string()}}};
    for (const auto& s : spec.species) {
      summary["species"].push_back({{"name", s.name}, {"d_prime", s.d_prime}, {"analytic_eer", analytic_eer(s.d_prime)}});
    }
    out << summary.dump(2) << '\n';
  }
};

struct TrainCommand {
  std::string embeddings;
  std::string manifest_path;
  std::string held_out;
  std::string out_dir = ".";
  TrainFlags flags;

  void add_to(CLI::App& app) {
    app.add_option("--embeddings", embeddings, "Embedding file (PADE)")->required();
    app.add_option("--manifest", manifest_path, "Manifest CSV")->required();
    app.add_option("--held-out", held_out, "Leave this species out of train/val");
    app.add_option("--out", out_dir, "Output directory")->capture_default_str();
    flags.add_to(app);
  }

  void run(std::ostream& out) const {
    const EmbeddingTable table = io::read_embeddings(embeddings);
    const DatasetManifest manifest = io::read_manifest(manifest_path);
    check_manifest_matches(table, manifest);
    const ProtocolSplit split = split_for(manifest, held_out);
    const auto train_rows = resolve_rows(table, split.train);
    const auto val_rows = resolve_rows(table, split.val);

    TrainConfig config = flags.config();
    json grid = nullptr;
    if (flags.grid) {
      const auto result = grid_search(table, train_rows, val_rows, kDefaultLearningRates, config);
      config = result.best;
      grid = json::array();
      for (const auto& p : result.points) grid.push_back({{"learning_rate", p.learning_rate}, {"val_eer", p.validation_eer}});
    }
    std::vector<double> losses;
    const HeadModel head = train_head(table, train_rows, config, &losses);

    const fs::path dir(out_dir);
    ensure_dir(dir);
    io::write_head(head, dir / "head.json", &config);

    json val_report = nullptr;
    if (!val_rows.empty()) {
      const ScoreSet val = predict_scores(head, table, val_rows);
      if (!val.bona_fide.empty() && !val.attacks.empty()) val_report = io::metrics_to_json(compute_report(val));
    }
    json report = {{"command", "train"},
                   {"seed", config.seed},
                   {"train_config", io::train_config_to_json(config)},
                   {"held_out", held_out.empty() ? json(nullptr) : json(held_out)},
                   {"parameters", head.parameter_count()},
                   {"train_rows", train_rows.size()},
                   {"final_loss", losses.empty() ? json(nullptr) : json(losses.back())},
                   {"grid", grid},
                   {"val_report", val_report}};
    write_json(dir / "val_report.json", report);
    out << report.dump(2) << '\n';
  }
};

struct EvalCommand {
  std::string head_path;
  std::string scores_path;
  std::string embeddings;
  std::string manifest_path;
  std::string held_out;
  std::string model;
  std::string threshold_source = "test";
  std::string det_scale = "raw";
  std::string out_dir = ".";

  void add_to(CLI::App& app) {
    auto* head_opt = app.add_option("--head", head_path, "Trained head JSON");
    auto* scores_opt = app.add_option("--scores", scores_path, "Score CSV");
    head_opt->excludes(scores_opt);
    app.add_option("--embeddings", embeddings, "Embedding file (with --head)");
    app.add_option("--manifest", manifest_path, "Manifest CSV");
    app.add_option("--held-out", held_out, "Evaluate the leave-one-out split for this species");
    app.add_option("--model", model, "Model name in the results row");
    app.add_option("--threshold-source", threshold_source, "Operating threshold from the test or val EER")
        ->check(CLI::IsMember({"test", "val"}))
        ->capture_default_str();
    app.add_option("--det-scale", det_scale, "DET export coordinates")
        ->check(CLI::IsMember({"raw", "probit"}))
        ->capture_default_str();
    app.add_option("--out", out_dir, "Output directory")->capture_default_str();
  }

  void run(std::ostream& out) const {
    if (head_path.empty() == scores_path.empty()) {
      throw Error(ErrorCode::invalid_input, "eval needs exactly one of --head or --scores");
    }
    ScoreSet test;
    std::optional<ScoreSet> val;
    std::string name = model;
    if (!head_path.empty()) {
      if (embeddings.empty() || manifest_path.empty()) {
        throw Error(ErrorCode::invalid_input, "eval --head needs --embeddings and --manifest");
      }
      const HeadModel head = io::read_head(head_path);
      const EmbeddingTable table = io::read_embeddings(embeddings);
      const DatasetManifest manifest = io::read_manifest(manifest_path);
      check_manifest_matches(table, manifest);
      const ProtocolSplit split = split_for(manifest, held_out);
      test = predict_scores(head, table, resolve_rows(table, split.test));
      if (threshold_source == "val") val = predict_scores(head, table, resolve_rows(table, split.val));
      if (name.empty()) name = fs::path(head_path).stem().string();
    } else {
      const ScoreSet all = io::read_scores(scores_path);
      if (!manifest_path.empty()) {
        const DatasetManifest manifest = io::read_manifest(manifest_path);
        test = subset(all, manifest, Split::test);
        if (threshold_source == "val") val = subset(all, manifest, Split::val);
      } else {
        if (threshold_source == "val") {
          throw Error(ErrorCode::invalid_input, "--threshold-source val needs --manifest");
        }
        test = all;
      }
      if (name.empty()) name = fs::path(scores_path).stem().string();
    }

    const MetricsReport report = val ? compute_report(test, *val) : compute_report(test);
    const DetCurve det = sweep_det(test.bona_fide.scores, test.pooled_attacks());
    ResultRow row{name, held_out.empty() ? "two-class" : "loo", held_out.empty() ? kAllAttacks : held_out,
                  report.eer, report.bpcer10, report.bpcer20, report.bpcer100, std::nullopt};

    const fs::path dir(out_dir);
    ensure_dir(dir);
    json metrics = {{"command", "eval"}, {"model", name}, {"metrics", io::metrics_to_json(report)},
                    {"row", row_to_json(row)}, {"det_points", det.points.size()}};
    write_json(dir / "metrics.json", metrics);
    io::write_results_table({row}, dir / "results.csv", dir / "results.txt");
    io::write_file(dir / "det.csv", export_det(det, det_scale == "probit" ? DetScale::probit : DetScale::raw));
    if (!head_path.empty()) io::write_scores(test, dir / "scores.csv");

    out << metrics.dump(2) << '\n' << render_results_table({row});
  }
};

struct LooCommand {
  std::vector<std::string> embeddings;
  std::string manifest_path;
  std::string protocol = "loo";
  unsigned jobs = 1;
  std::string threshold_source = "test";
  std::string out_dir = ".";
  TrainFlags flags;

  void add_to(CLI::App& app) {
    app.add_option("--embeddings", embeddings, "Embedding file per model, as NAME=PATH or PATH")->required();
    app.add_option("--manifest", manifest_path, "Manifest CSV")->required();
    app.add_option("--protocol", protocol, "Evaluation protocol")
        ->check(CLI::IsMember({"loo", "two-class"}))
        ->capture_default_str();
    app.add_option("--jobs", jobs, "Parallel experiments")->check(CLI::PositiveNumber)->capture_default_str();
    app.add_option("--threshold-source", threshold_source, "Operating threshold from the test or val EER")
        ->check(CLI::IsMember({"test", "val"}))
        ->capture_default_str();
    app.add_option("--out", out_dir, "Output directory")->capture_default_str();
    flags.add_to(app);
  }

  void run(std::ostream& out) const {
    const TrainConfig config = flags.config();
    const DatasetManifest manifest = io::read_manifest(manifest_path);
    std::vector<NamedTable> tables;
    for (const auto& spec : embeddings) {
      const auto eq = spec.find('=');
      const std::string name = eq == std::string::npos ? fs::path(spec).stem().string() : spec.substr(0, eq);
      const std::string path = eq == std::string::npos ? spec : spec.substr(eq + 1);
      tables.push_back({name, io::read_embeddings(path)});
    }
    ExperimentOptions options;
    if (flags.grid) options.lr_grid = kDefaultLearningRates;
    options.threshold_source = threshold_source == "val" ? ThresholdSource::validation : ThresholdSource::test;
    const Protocol proto = protocol == "two-class" ? Protocol::two_class : Protocol::loo_all_species;
    const auto rows = run_benchmark(tables, manifest, proto, config, options, jobs);

    const fs::path dir(out_dir);
    ensure_dir(dir);
    io::write_results_table(rows, dir / "results.csv", dir / "results.txt");
    json report = {{"command", "loo"},
                   {"seed", config.seed},
                   {"protocol", to_string(proto)},
                   {"train_config", io::train_config_to_json(config)},
                   {"rows", json::array()}};
    for (const auto& r : rows) report["rows"].push_back(row_to_json(r));
    write_json(dir / "results.json", report);
    out << report.dump(2) << '\n' << "seed " << config.seed << '\n' << render_results_table(rows);
  }
};

struct FuseCommand {
  std::vector<std::string> scores;
  bool normalize = false;
  std::string out_dir = ".";

  void add_to(CLI::App& app) {
    app.add_option("--scores", scores, "Two score CSVs (repeat the flag)")->required()->expected(2);
    app.add_flag("--normalize", normalize, "Min-max normalize each detector before averaging");
    app.add_option("--out", out_dir, "Output directory")->capture_default_str();
  }

  void run(std::ostream& out) const {
    const NamedScores a{fs::path(scores[0]).stem().string(), io::read_scores(scores[0])};
    const NamedScores b{fs::path(scores[1]).stem().string(), io::read_scores(scores[1])};
    FusionOptions options;
    options.min_max_normalize = normalize;
    const FusedScoreSet fused = fuse_average(a, b, options);
    const FusionReport report = evaluate_fusion(a, b, options);

    const fs::path dir(out_dir);
    ensure_dir(dir);
    io::write_scores(fused.scores, dir / "fused.csv");
    const std::string table = render_fusion_table(report);
    io::write_file(dir / "fusion.txt", table);
    json j = {{"command", "fuse"},
              {"sources", fused.sources},
              {"normalized", normalize},
              {a.name, io::metrics_to_json(report.a)},
              {"fused", io::metrics_to_json(report.fused)},
              {"fused_improves", report.fused_improves}};
    // Keyed by name; keep both entries when the stems collide.
    j[b.name == a.name ? b.name + " (2)" : b.name] = io::metrics_to_json(report.b);
    write_json(dir / "fusion.json", j);
    out << j.dump(2) << '\n' << table;
  }
};

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Presentation attack detection evaluation"};
  app.name("padeval");
  app.require_subcommand(1);

  SynthCommand synth;
  TrainCommand train;
  EvalCommand eval;
  LooCommand loo;
  FuseCommand fuse;
  synth.add_to(*app.add_subcommand("synth", "Generate a synthetic Gaussian embedding dataset"));
  train.add_to(*app.add_subcommand("train", "Train a probe head on frozen embeddings"));
  eval.add_to(*app.add_subcommand("eval", "Compute metrics and a DET curve for a head or a score file"));
  loo.add_to(*app.add_subcommand("loo", "Run the leave-one-out (or two-class) benchmark"));
  fuse.add_to(*app.add_subcommand("fuse", "Average two detectors' scores and compare"));

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kSuccess;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kSuccess;
  } catch (const CLI::ParseError& e) {
    err << "error: usage: " << e.what() << '\n';
    if (!app.get_subcommands().empty()) err << app.get_subcommands().front()->help();
    return kInputError;
  }

  try {
    if (app.got_subcommand("synth")) synth.run(out);
    else if (app.got_subcommand("train")) train.run(out);
    else if (app.got_subcommand("eval")) eval.run(out);
    else if (app.got_subcommand("loo")) loo.run(out);
    else if (app.got_subcommand("fuse")) fuse.run(out);
    return kSuccess;
  } catch (const ParseError& e) {
    err << "error: " << to_string(e.code()) << ": " << e.what() << '\n'
        << "detail: " << e.detail() << " in input of '" << app.get_subcommands().front()->get_name() << "'\n";
    return kInputError;
  } catch (const Error& e) {
    err << "error: " << to_string(e.code()) << ": " << e.what() << '\n'
        << "detail: raised while running '" << app.get_subcommands().front()->get_name() << "'\n";
    return kInputError;
  } catch (const std::exception& e) {
    err << "error: internal: " << e.what() << '\n';
    return kInternalError;
  }
}

}  // namespace pad::cli
