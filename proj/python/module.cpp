#include <pybind11/numpy.h>
#include <pybind11/operators.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "padeval/det_curve.hpp"
#include "padeval/error.hpp"
#include "padeval/fusion.hpp"
#include "padeval/head.hpp"
#include "padeval/io.hpp"
#include "padeval/normal.hpp"
#include "padeval/protocol.hpp"
#include "padeval/score_metrics.hpp"
#include "padeval/synth.hpp"

namespace py = pybind11;
using namespace pad;

namespace {

using FloatRows = py::array_t<float, py::array::c_style | py::array::forcecast>;

std::vector<float> flatten_rows(const FloatRows& x, std::size_t& rows, std::size_t& dim) {
  if (x.ndim() != 2) throw Error(ErrorCode::shape_mismatch, "expected a 2-D array of shape (rows, dim)");
  rows = static_cast<std::size_t>(x.shape(0));
  dim = static_cast<std::size_t>(x.shape(1));
  return {x.data(), x.data() + rows * dim};
}

Split split_from(const std::string& text) {
  Split s;
  if (!parse_split(text, s)) throw Error(ErrorCode::invalid_input, "unknown split '" + text + "'");
  return s;
}

EmbeddingTable make_table(const FloatRows& values, const std::vector<std::uint8_t>& labels,
                          const std::vector<std::string>& species, const std::vector<std::string>& splits) {
  std::size_t rows = 0, dim = 0;
  auto flat = flatten_rows(values, rows, dim);
  if (labels.size() != rows || species.size() != rows || splits.size() != rows) {
    throw Error(ErrorCode::length_mismatch, "labels, species and splits need one entry per row");
  }
  std::vector<RowLabel> out;
  out.reserve(rows);
  for (std::size_t i = 0; i < rows; ++i) out.push_back({labels[i], species[i], split_from(splits[i])});
  return EmbeddingTable(dim, std::move(flat), std::move(out));
}

py::array_t<float> table_values(const EmbeddingTable& t) {
  py::array_t<float> out({static_cast<py::ssize_t>(t.rows()), static_cast<py::ssize_t>(t.dim())});
  std::copy(t.values().begin(), t.values().end(), out.mutable_data());
  return out;
}

py::array_t<double> predict_rows(const HeadModel& head, const FloatRows& x) {
  std::size_t rows = 0, dim = 0;
  const auto flat = flatten_rows(x, rows, dim);
  if (rows > 0 && dim != head.input_dim()) {
    throw Error(ErrorCode::shape_mismatch, "input dim " + std::to_string(dim) + " does not match head dim " +
                                               std::to_string(head.input_dim()));
  }
  py::array_t<double> out(static_cast<py::ssize_t>(rows));
  auto* p = out.mutable_data();
  for (std::size_t r = 0; r < rows; ++r) p[r] = head.predict(std::span<const float>(flat.data() + r * dim, dim));
  return out;
}

py::array_t<double> det_array(const DetCurve& c) {
  py::array_t<double> out({static_cast<py::ssize_t>(c.points.size()), py::ssize_t{3}});
  auto* p = out.mutable_data();
  for (const auto& pt : c.points) {
    *p++ = pt.threshold;
    *p++ = pt.apcer;
    *p++ = pt.bpcer;
  }
  return out;
}

DetScale det_scale_from(const std::string& text) {
  if (text == "raw") return DetScale::raw;
  if (text == "probit") return DetScale::probit;
  throw Error(ErrorCode::invalid_input, "det scale must be 'raw' or 'probit'");
}

Protocol protocol_from(const std::string& text) {
  if (text == "loo") return Protocol::loo_all_species;
  if (text == "two-class") return Protocol::two_class;
  throw Error(ErrorCode::invalid_input, "protocol must be 'loo' or 'two-class'");
}

const char* kind_name(SourceLocation::Kind k) { return k == SourceLocation::Kind::line ? "line" : "byte_offset"; }

}  // namespace

PYBIND11_MODULE(_padeval, m) {
  m.doc() = "Presentation attack detection evaluation engine";

  static py::handle pad_error = py::exception<Error>(m, "PadError", PyExc_ValueError).release();
  static py::handle parse_error = py::exception<ParseError>(m, "ParseError", pad_error.ptr()).release();
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const ParseError& e) {
      py::object exc = py::reinterpret_borrow<py::object>(parse_error)(e.what());
      exc.attr("code") = to_string(e.code());
      exc.attr("kind") = kind_name(e.where().kind);
      exc.attr("location") = e.where().value;
      exc.attr("detail") = e.detail();
      PyErr_SetObject(parse_error.ptr(), exc.ptr());
    } catch (const Error& e) {
      py::object exc = py::reinterpret_borrow<py::object>(pad_error)(e.what());
      exc.attr("code") = to_string(e.code());
      PyErr_SetObject(pad_error.ptr(), exc.ptr());
    }
  });

  // score-metrics
  py::class_<ScoreGroup>(m, "ScoreGroup")
      .def(py::init<>())
      .def(py::init([](std::vector<std::string> ids, std::vector<double> scores) {
             if (ids.size() != scores.size()) throw Error(ErrorCode::length_mismatch, "ids and scores differ in length");
             return ScoreGroup{std::move(ids), std::move(scores)};
           }),
           py::arg("ids"), py::arg("scores"))
      .def_readwrite("ids", &ScoreGroup::ids)
      .def_readwrite("scores", &ScoreGroup::scores)
      .def("__len__", &ScoreGroup::size)
      .def(py::self == py::self);

  py::class_<ScoreSet>(m, "ScoreSet")
      .def(py::init<>())
      .def_static("from_scores", &ScoreSet::from_scores, py::arg("bona_fide"), py::arg("attacks"))
      .def_readwrite("bona_fide", &ScoreSet::bona_fide)
      .def_readwrite("attacks", &ScoreSet::attacks)
      .def("pooled_attacks", &ScoreSet::pooled_attacks)
      .def("total_size", &ScoreSet::total_size)
      .def("validate", &ScoreSet::validate)
      .def(py::self == py::self);

  py::class_<EerResult>(m, "EerResult")
      .def_readonly("eer", &EerResult::eer)
      .def_readonly("threshold", &EerResult::threshold)
      .def("__repr__", [](const EerResult& r) {
        return "EerResult(eer=" + std::to_string(r.eer) + ", threshold=" + std::to_string(r.threshold) + ")";
      });

  py::class_<MetricsReport>(m, "MetricsReport")
      .def_readonly("eer", &MetricsReport::eer)
      .def_readonly("eer_threshold", &MetricsReport::eer_threshold)
      .def_readonly("bpcer10", &MetricsReport::bpcer10)
      .def_readonly("bpcer20", &MetricsReport::bpcer20)
      .def_readonly("bpcer100", &MetricsReport::bpcer100)
      .def_readonly("per_pais_apcer", &MetricsReport::per_pais_apcer)
      .def_readonly("worst_case_apcer", &MetricsReport::worst_case_apcer)
      .def_property_readonly("threshold_source", [](const MetricsReport& r) {
        return r.threshold_source == ThresholdSource::test ? "test" : "validation";
      });

  m.def("apcer", [](const std::vector<double>& attacks, double t) { return apcer(attacks, t); },
        py::arg("attack_scores"), py::arg("threshold"));
  m.def("bpcer", [](const std::vector<double>& bona, double t) { return bpcer(bona, t); },
        py::arg("bona_fide_scores"), py::arg("threshold"));
  m.def("worst_case_apcer", &worst_case_apcer, py::arg("scores"), py::arg("threshold"));
  m.def("eer", [](const std::vector<double>& b, const std::vector<double>& a) { return eer(b, a); },
        py::arg("bona_fide"), py::arg("attacks"));
  m.def("bpcer_at_apcer",
        [](const std::vector<double>& b, const std::vector<double>& a, double target) {
          return bpcer_at_apcer(b, a, target);
        },
        py::arg("bona_fide"), py::arg("attacks"), py::arg("apcer_target"));
  m.def("compute_report", py::overload_cast<const ScoreSet&>(&compute_report), py::arg("test"));
  m.def("compute_report", py::overload_cast<const ScoreSet&, const ScoreSet&>(&compute_report), py::arg("test"),
        py::arg("validation"));
  m.def("format_percent", &format_percent, py::arg("fraction"));

  // det-curve
  m.def("sweep_det",
        [](const std::vector<double>& b, const std::vector<double>& a) { return det_array(sweep_det(b, a)); },
        py::arg("bona_fide"), py::arg("attacks"),
        "Staircase DET points as an (n, 3) array of threshold, apcer, bpcer.");
  m.def("export_det",
        [](const std::vector<double>& b, const std::vector<double>& a, const std::string& scale) {
          return export_det(sweep_det(b, a), det_scale_from(scale));
        },
        py::arg("bona_fide"), py::arg("attacks"), py::arg("scale") = "raw");
  m.def("parse_det_csv", [](const std::string& text) { return det_array(parse_det_csv(text)); }, py::arg("text"));
  m.def("probit", &probit, py::arg("rate"));
  m.def("normal_cdf", &normal_cdf, py::arg("x"));
  m.def("normal_quantile", &normal_quantile, py::arg("p"));

  // data-io: embedding tables and manifests
  py::class_<EmbeddingTable>(m, "EmbeddingTable")
      .def(py::init(&make_table), py::arg("values"), py::arg("labels"), py::arg("species"), py::arg("splits"))
      .def_property_readonly("dim", &EmbeddingTable::dim)
      .def_property_readonly("rows", &EmbeddingTable::rows)
      .def_property_readonly("values", &table_values)
      .def_property_readonly("labels",
                             [](const EmbeddingTable& t) {
                               std::vector<int> out;
                               for (const auto& l : t.labels()) out.push_back(l.label);
                               return out;
                             })
      .def_property_readonly("species",
                             [](const EmbeddingTable& t) {
                               std::vector<std::string> out;
                               for (const auto& l : t.labels()) out.push_back(l.species);
                               return out;
                             })
      .def_property_readonly("splits",
                             [](const EmbeddingTable& t) {
                               std::vector<std::string> out;
                               for (const auto& l : t.labels()) out.emplace_back(to_string(l.split));
                               return out;
                             })
      .def("__len__", &EmbeddingTable::rows)
      .def(py::self == py::self);

  py::class_<ManifestEntry>(m, "ManifestEntry")
      .def(py::init([](std::string id, const std::string& cls, std::string species, const std::string& split) {
             SampleClass c;
             if (cls == "bona_fide") {
               c = SampleClass::bona_fide;
             } else if (cls == "attack") {
               c = SampleClass::attack;
             } else {
               throw Error(ErrorCode::invalid_input, "class must be 'bona_fide' or 'attack'");
             }
             return ManifestEntry{std::move(id), c, std::move(species), split_from(split)};
           }),
           py::arg("id"), py::arg("cls"), py::arg("species"), py::arg("split"))
      .def_readonly("id", &ManifestEntry::id)
      .def_property_readonly("cls",
                             [](const ManifestEntry& e) { return e.cls == SampleClass::attack ? "attack" : "bona_fide"; })
      .def_readonly("species", &ManifestEntry::species)
      .def_property_readonly("split", [](const ManifestEntry& e) { return to_string(e.split); })
      .def(py::self == py::self);

  py::class_<DatasetManifest>(m, "DatasetManifest")
      .def(py::init([](std::vector<ManifestEntry> entries, std::string source) {
             DatasetManifest d{std::move(entries), std::move(source)};
             d.validate();
             return d;
           }),
           py::arg("entries"), py::arg("source") = "")
      .def_readonly("entries", &DatasetManifest::entries)
      .def_readonly("source", &DatasetManifest::source)
      .def("species", &DatasetManifest::species)
      .def("__len__", [](const DatasetManifest& d) { return d.entries.size(); })
      .def(py::self == py::self);

  m.def("read_embeddings", py::overload_cast<const std::filesystem::path&>(&io::read_embeddings), py::arg("path"));
  m.def("write_embeddings",
        py::overload_cast<const EmbeddingTable&, const std::filesystem::path&>(&io::write_embeddings),
        py::arg("table"), py::arg("path"));
  m.def("labels_path_for", &io::labels_path_for, py::arg("embeddings"));
  m.def("read_manifest", &io::read_manifest, py::arg("path"));
  m.def("write_manifest", &io::write_manifest, py::arg("manifest"), py::arg("path"));
  m.def("check_manifest_matches", &check_manifest_matches, py::arg("table"), py::arg("manifest"));
  m.def("read_scores", &io::read_scores, py::arg("path"));
  m.def("write_scores", &io::write_scores, py::arg("scores"), py::arg("path"));
  m.def("format_scores_csv", &io::format_scores_csv, py::arg("scores"));
  m.def("parse_scores_csv", [](const std::string& text) { return io::parse_scores_csv(text); }, py::arg("text"));

  // head-trainer
  py::class_<TrainConfig>(m, "TrainConfig")
      .def(py::init([](double lr, std::size_t batch, std::size_t epochs, std::uint64_t seed, std::size_t layers,
                       std::size_t width) {
             TrainConfig c;
             c.learning_rate = lr;
             c.batch_size = batch;
             c.epochs = epochs;
             c.seed = seed;
             c.hidden_layers = layers;
             c.hidden_width = width;
             c.validate();
             return c;
           }),
           py::arg("learning_rate") = 1e-3, py::arg("batch_size") = 64, py::arg("epochs") = 100,
           py::arg("seed") = 0, py::arg("hidden_layers") = 0, py::arg("hidden_width") = 64)
      .def_readwrite("learning_rate", &TrainConfig::learning_rate)
      .def_readwrite("batch_size", &TrainConfig::batch_size)
      .def_readwrite("epochs", &TrainConfig::epochs)
      .def_readwrite("seed", &TrainConfig::seed)
      .def_readwrite("hidden_layers", &TrainConfig::hidden_layers)
      .def_readwrite("hidden_width", &TrainConfig::hidden_width)
      .def("validate", &TrainConfig::validate)
      .def(py::self == py::self);

  py::class_<HeadModel>(m, "HeadModel")
      .def_static("zeros", &HeadModel::zeros, py::arg("input_dim"), py::arg("hidden_layers") = 0,
                  py::arg("hidden_width") = 64)
      .def_property_readonly("input_dim", &HeadModel::input_dim)
      .def_property_readonly("hidden_layers", &HeadModel::hidden_layers)
      .def("parameter_count", &HeadModel::parameter_count)
      .def("parameters", [](const HeadModel& h) {
        const auto p = h.parameters();
        return py::array_t<double>(static_cast<py::ssize_t>(p.size()), p.data());
      })
      .def("set_parameters", [](HeadModel& h, const std::vector<double>& v) { h.set_parameters(v); },
           py::arg("values"))
      .def("predict", &predict_rows, py::arg("x"), "Sigmoid scores for an (n, dim) array.")
      .def("to_json", [](const HeadModel& h) { return io::format_head_json(h); })
      .def_static("from_json", [](const std::string& text) { return io::parse_head_json(text); }, py::arg("text"))
      .def(py::self == py::self);

  m.def("initial_head", &initial_head, py::arg("input_dim"), py::arg("config"));
  m.def("sigmoid", &sigmoid, py::arg("z"));
  m.def("bce_loss",
        [](const std::vector<std::uint8_t>& y, const std::vector<double>& p) { return bce_loss(y, p); },
        py::arg("y_true"), py::arg("y_pred"));
  m.def("bce_gradient",
        [](const HeadModel& head, const FloatRows& x, const std::vector<std::uint8_t>& y) {
          std::size_t rows = 0, dim = 0;
          const auto flat = flatten_rows(x, rows, dim);
          const auto g = bce_gradient(head, {flat, y}).flatten();
          return py::array_t<double>(static_cast<py::ssize_t>(g.size()), g.data());
        },
        py::arg("head"), py::arg("x"), py::arg("y"),
        "Gradient of the mean loss, flattened in parameters() order.");
  m.def(
      "train_head",
      [](const EmbeddingTable& t, const TrainConfig& c, bool with_losses) -> py::object {
        std::vector<double> losses;
        HeadModel head;
        {
          py::gil_scoped_release release;
          head = train_head(t, t.rows_in(Split::train), c, with_losses ? &losses : nullptr);
        }
        if (with_losses) return py::make_tuple(std::move(head), losses);
        return py::cast(std::move(head));
      },
      py::arg("table"), py::arg("config") = TrainConfig{}, py::arg("return_losses") = false);
  m.def("predict_scores",
        [](const HeadModel& h, const EmbeddingTable& t, const std::string& split) {
          return predict_scores(h, t, split_from(split));
        },
        py::arg("head"), py::arg("table"), py::arg("split") = "test");
  m.def("read_head", &io::read_head, py::arg("path"));
  m.def("write_head", [](const HeadModel& h, const std::filesystem::path& p) { io::write_head(h, p); },
        py::arg("head"), py::arg("path"));

  // protocol-harness
  py::class_<ResultRow>(m, "ResultRow")
      .def_readonly("model", &ResultRow::model)
      .def_readonly("protocol", &ResultRow::protocol)
      .def_readonly("held_out", &ResultRow::held_out)
      .def_readonly("eer", &ResultRow::eer)
      .def_readonly("bpcer10", &ResultRow::bpcer10)
      .def_readonly("bpcer20", &ResultRow::bpcer20)
      .def_readonly("bpcer100", &ResultRow::bpcer100)
      .def_readonly("failure", &ResultRow::failure);

  m.def(
      "run_benchmark",
      [](const std::map<std::string, EmbeddingTable>& tables, const DatasetManifest& manifest,
         const std::string& protocol, const TrainConfig& config, std::vector<double> lr_grid, unsigned jobs) {
        std::vector<NamedTable> named;
        for (const auto& [name, table] : tables) named.push_back({name, table});
        ExperimentOptions options;
        options.lr_grid = std::move(lr_grid);
        py::gil_scoped_release release;
        return run_benchmark(named, manifest, protocol_from(protocol), config, options, jobs);
      },
      py::arg("tables"), py::arg("manifest"), py::arg("protocol") = "loo", py::arg("config") = TrainConfig{},
      py::arg("lr_grid") = std::vector<double>{}, py::arg("jobs") = 1u,
      "Rows ordered by model name, then held-out species.");
  m.def("render_results_table", &render_results_table, py::arg("rows"));

  // fusion
  m.def("fuse_average",
        [](const ScoreSet& a, const ScoreSet& b, bool normalize) {
          return fuse_average({"a", a}, {"b", b}, {normalize}).scores;
        },
        py::arg("a"), py::arg("b"), py::arg("min_max_normalize") = false);
  m.def("fuse_mean",
        [](const std::vector<ScoreSet>& sets, bool normalize) {
          std::vector<NamedScores> named;
          for (std::size_t i = 0; i < sets.size(); ++i) named.push_back({"s" + std::to_string(i), sets[i]});
          return fuse_mean(named, {normalize}).scores;
        },
        py::arg("sources"), py::arg("min_max_normalize") = false);
  m.def("fusion_table",
        [](const std::string& name_a, const ScoreSet& a, const std::string& name_b, const ScoreSet& b) {
          return render_fusion_table(evaluate_fusion({name_a, a}, {name_b, b}));
        },
        py::arg("name_a"), py::arg("a"), py::arg("name_b"), py::arg("b"));

  // synth-oracle
  py::class_<SynthDataset>(m, "SynthDataset")
      .def_readonly("table", &SynthDataset::table)
      .def_readonly("manifest", &SynthDataset::manifest);
  m.def("generate_json", [](const std::string& spec) { return generate(io::parse_synth_spec(spec)); },
        py::arg("spec_json"));
  m.def("analytic_eer", &analytic_eer, py::arg("d_prime"));
  m.def("synth_detector_pair", &synth_detector_pair, py::arg("per_class"), py::arg("d_prime"), py::arg("seed"));
}
