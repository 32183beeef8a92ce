#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "mwi/continual_eval.hpp"
#include "mwi/error.hpp"
#include "mwi/experiment.hpp"

namespace py = pybind11;
using namespace mwi;

namespace {

py::dict report_dict(const MetricsReport& r) {
  py::dict d;
  for (std::size_t m = 0; m < kMetricCount; ++m) {
    d[py::str(std::string(kMetricNames[m]))] =
        r.values[m] ? py::cast(*r.values[m]) : py::none();
  }
  return d;
}

py::dict summary_dict(const RunSummary& s) {
  py::dict means, errors;
  for (std::size_t m = 0; m < kMetricCount; ++m) {
    const py::str name(std::string(kMetricNames[m]));
    means[name] = s.metrics[m].mean ? py::cast(*s.metrics[m].mean) : py::none();
    errors[name] = s.metrics[m].stderr_;
  }
  py::dict d;
  d["mean"] = means;
  d["stderr"] = errors;
  d["best_threshold"] = s.best_threshold.mean ? py::cast(*s.best_threshold.mean) : py::none();
  d["best_f1"] = s.best_f1.mean ? py::cast(*s.best_f1.mean) : py::none();
  d["episodes"] = s.episodes;
  return d;
}

ExperimentConfig make_config(std::uint32_t ways, std::uint32_t shots, std::uint32_t test,
                             std::uint32_t episodes, int epochs, double lr,
                             const std::string& head, double threshold,
                             std::uint32_t trivial_repeats, const std::string& aug_mode,
                             std::uint64_t seed, unsigned jobs) {
  ExperimentConfig c;
  c.synthetic = SyntheticSpec{};  // placeholder source; the dataset is passed in
  c.episodes = {.n_way = ways, .n_shot = shots, .n_test = test, .n_episodes = episodes,
                .seed = seed};
  c.train.epochs = epochs;
  c.train.learning_rate = lr;
  c.train.seed = seed;
  c.head = parse_head(head);
  c.threshold = threshold;
  c.augmentation.trivial_repeats = trivial_repeats;
  c.augmentation.mode = parse_augmentation_mode(aug_mode);
  c.jobs = jobs;
  c.check();
  return c;
}

#define MWI_RUN_ARGS                                                                  \
  py::arg("ways") = 5, py::arg("shots") = 5, py::arg("test_per_class") = 15,          \
  py::arg("episodes") = kDefaultEpisodes, py::arg("epochs") = kDefaultEpochs,         \
  py::arg("lr") = 1e-3, py::arg("head") = "sigmoid",                                  \
  py::arg("threshold") = kDefaultThreshold, py::arg("trivial_repeats") = 0,          \
  py::arg("aug_mode") = "all", py::arg("seed") = 0, py::arg("jobs") = 1

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Multilabel weight imprinting over frozen embeddings";

  auto base = py::register_exception<Error>(m, "Error", PyExc_ValueError);
  py::register_exception<DataError>(m, "DataError", base.ptr());
  py::register_exception<ConfigError>(m, "ConfigError", base.ptr());

  py::class_<EmbeddingDataset>(m, "Dataset")
      .def_readonly("dim", &EmbeddingDataset::dim)
      .def_readonly("label_vocab", &EmbeddingDataset::label_vocab)
      .def("__len__", [](const EmbeddingDataset& d) { return d.records.size(); })
      .def("embeddings", [](const EmbeddingDataset& d) {
        std::vector<std::size_t> rows(d.records.size());
        for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i;
        return embedding_matrix(d, rows);
      })
      .def("labels", [](const EmbeddingDataset& d) {
        std::vector<std::vector<std::uint32_t>> out;
        for (const auto& r : d.records) out.push_back(r.labels);
        return out;
      })
      .def("group_ids", [](const EmbeddingDataset& d) {
        std::vector<std::uint64_t> out;
        for (const auto& r : d.records) out.push_back(r.group_id);
        return out;
      })
      .def("__eq__", [](const EmbeddingDataset& a, const EmbeddingDataset& b) { return a == b; });

  m.def("generate_synthetic",
        [](std::uint32_t dim, std::uint32_t num_labels, std::uint32_t examples_per_label,
           double noise_sigma, std::uint32_t max_labels, std::uint32_t augmentations,
           std::uint64_t seed) {
          SyntheticSpec s;
          s.dim = dim;
          s.num_labels = num_labels;
          s.examples_per_label = examples_per_label;
          s.noise_sigma = noise_sigma;
          s.max_labels_per_example = max_labels;
          s.augmentations_per_example = augmentations;
          s.seed = seed;
          return generate_synthetic(s);
        },
        py::arg("dim") = 512, py::arg("num_labels") = 20, py::arg("examples_per_label") = 20,
        py::arg("noise_sigma") = 0.05, py::arg("max_labels") = 1, py::arg("augmentations") = 0,
        py::arg("seed") = 0);
  m.def("load_dataset", &load_dataset, py::arg("path"));
  m.def("save_dataset", &save_dataset, py::arg("dataset"), py::arg("path"));
  m.def("validate", &validate, py::arg("dataset"), py::arg("norm_tolerance") = 1e-5);

  py::class_<ImprintClassifier>(m, "Classifier")
      .def(py::init([](std::size_t dim, const std::string& head, double threshold) {
             return ImprintClassifier(dim, parse_head(head), threshold);
           }),
           py::arg("dim"), py::arg("head") = "sigmoid", py::arg("threshold") = kDefaultThreshold)
      .def_static(
          "imprint",
          [](const std::vector<std::pair<std::string, Matrix>>& classes, const std::string& head,
             double threshold) {
            std::vector<ClassExamples> examples;
            for (const auto& [name, rows] : classes) examples.push_back({name, rows});
            return ImprintClassifier::imprint(examples, parse_head(head), threshold);
          },
          py::arg("classes"), py::arg("head") = "sigmoid",
          py::arg("threshold") = kDefaultThreshold)
      .def("add_class", &ImprintClassifier::add_class, py::arg("name"), py::arg("embeddings"))
      .def_property_readonly("dim", &ImprintClassifier::dim)
      .def_property_readonly("class_names", &ImprintClassifier::class_names)
      .def_property_readonly("weights", &ImprintClassifier::weights)
      .def_property("threshold", &ImprintClassifier::threshold, &ImprintClassifier::set_threshold)
      .def_property_readonly("head", [](const ImprintClassifier& c) { return to_string(c.head()); })
      .def("scores", py::overload_cast<const Matrix&>(&ImprintClassifier::scores, py::const_),
           py::arg("embeddings"))
      .def("predict", py::overload_cast<const Matrix&>(&ImprintClassifier::predict, py::const_),
           py::arg("embeddings"))
      .def(
          "train",
          [](ImprintClassifier& c, const Matrix& x, const Matrix& y, int epochs, double lr,
             std::uint64_t seed) {
            TrainConfig config;
            config.epochs = epochs;
            config.learning_rate = lr;
            config.seed = seed;
            return train(c, x, y, config).loss_trace;
          },
          py::arg("embeddings"), py::arg("targets"), py::arg("epochs") = kDefaultEpochs,
          py::arg("lr") = 1e-3, py::arg("seed") = 0)
      .def("save", [](const ImprintClassifier& c, const std::string& p) { save_classifier(c, p); })
      .def_static("load", [](const std::string& p) { return load_classifier(p); })
      .def("__eq__", [](const ImprintClassifier& a, const ImprintClassifier& b) { return a == b; });

  m.def(
      "compute_metrics",
      [](const BinaryMatrix& truth, const Matrix& scores, const BinaryMatrix& predictions,
         const std::string& mode) {
        return report_dict(compute_all({truth, scores, predictions}, parse_eval_mode(mode)));
      },
      py::arg("truth"), py::arg("scores"), py::arg("predictions"), py::arg("mode") = "multilabel");
  m.def(
      "best_threshold",
      [](const BinaryMatrix& truth, const Matrix& scores, double step) {
        const auto c = best_threshold(truth, scores, threshold_grid(step));
        return std::make_pair(c.threshold, c.value);
      },
      py::arg("truth"), py::arg("scores"), py::arg("grid_step") = 0.01);

  m.def(
      "sample_episodes",
      [](const EmbeddingDataset& d, std::uint32_t ways, std::uint32_t shots, std::uint32_t test,
         std::uint32_t episodes, std::uint64_t seed) {
        py::list out;
        for (const auto& e : sample_episodes(d, {ways, shots, test, episodes, seed})) {
          py::dict ep;
          ep["index"] = e.index;
          ep["labels"] = e.sampled_labels;
          ep["train"] = e.train_records;
          ep["test"] = e.test_records;
          out.append(ep);
        }
        return out;
      },
      py::arg("dataset"), py::arg("ways") = 5, py::arg("shots") = 5,
      py::arg("test_per_class") = 15, py::arg("episodes") = kDefaultEpisodes,
      py::arg("seed") = 0);

  m.def(
      "run_fewshot",
      [](const EmbeddingDataset& d, std::uint32_t ways, std::uint32_t shots, std::uint32_t test,
         std::uint32_t episodes, int epochs, double lr, const std::string& head,
         double threshold, std::uint32_t repeats, const std::string& aug, std::uint64_t seed,
         unsigned jobs) {
        const auto config = make_config(ways, shots, test, episodes, epochs, lr, head, threshold,
                                        repeats, aug, seed, jobs);
        FewShotResult r;
        {
          py::gil_scoped_release release;
          r = run_fewshot(d, config);
        }
        py::dict out = summary_dict(r.summary);
        out["mode"] = to_string(r.mode);
        py::list per_episode;
        for (const auto& e : r.episodes) per_episode.append(report_dict(e.metrics));
        out["per_episode"] = per_episode;
        return out;
      },
      py::arg("dataset"), MWI_RUN_ARGS);

  m.def(
      "run_continual",
      [](const EmbeddingDataset& d, std::uint32_t ways, std::uint32_t shots, std::uint32_t test,
         std::uint32_t episodes, int epochs, double lr, const std::string& head,
         double threshold, std::uint32_t repeats, const std::string& aug, std::uint64_t seed,
         unsigned jobs, bool reimprint) {
        const auto config = make_config(ways, shots, test, episodes, epochs, lr, head, threshold,
                                        repeats, aug, seed, jobs);
        ContinualRunResult r;
        {
          py::gil_scoped_release release;
          r = run_continual_experiment(d, config, reimprint);
        }
        py::list steps;
        for (const auto& s : r.steps) {
          py::dict step;
          step["step"] = s.step;
          step["n_visible"] = s.n_visible;
          step["f1"] = s.fixed_threshold_f1.mean ? py::cast(*s.fixed_threshold_f1.mean) : py::none();
          step["best_threshold"] = s.best_threshold.mean ? py::cast(*s.best_threshold.mean) : py::none();
          step["best_f1"] = s.best_f1.mean ? py::cast(*s.best_f1.mean) : py::none();
          steps.append(step);
        }
        return steps;
      },
      py::arg("dataset"), MWI_RUN_ARGS, py::arg("reimprint") = false);

  m.attr("METRICS") = [] {
    std::vector<std::string> names;
    for (auto n : kMetricNames) names.emplace_back(n);
    return names;
  }();
}
