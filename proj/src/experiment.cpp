#include "mwi/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <thread>

#include "json.hpp"
#include "mwi/csv.hpp"
#include "mwi/error.hpp"

namespace mwi {

namespace {

using Clock = std::chrono::steady_clock;

std::ofstream open_output(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  return out;
}

void write_json_file(const std::filesystem::path& path, const std::string& text) {
  auto out = open_output(path);
  out << text << '\n';
}

std::string episode_file_name(std::uint32_t episode, std::string_view ext) {
  std::ostringstream name;
  name << "episode_" << std::setw(4) << std::setfill('0') << episode << ext;
  return name.str();
}

// Throws one EpisodeFailure listing every failed index.
void raise_failures(const std::vector<std::exception_ptr>& errors,
                    std::string_view what) {
  std::string report;
  std::size_t failed = 0;
  for (std::size_t i = 0; i < errors.size(); ++i) {
    if (!errors[i]) continue;
    ++failed;
    try {
      std::rethrow_exception(errors[i]);
    } catch (const std::exception& e) {
      report += "\n  " + std::string(what) + " " + std::to_string(i) + ": " + e.what();
    }
  }
  if (failed > 0) {
    throw EpisodeFailure(std::to_string(failed) + " " + std::string(what) +
                         "(s) failed:" + report);
  }
}

std::vector<double> values_of(const std::vector<MetricsReport>& reports, Metric m) {
  std::vector<double> out;
  for (const auto& r : reports) {
    if (r[m]) out.push_back(*r[m]);
  }
  return out;
}

void write_summary_line(std::ostream& out, std::string_view name,
                        const MetricSummary& s) {
  out << name << ',' << format_optional(s.mean) << ','
      << (s.mean ? format_double(s.stderr_) : std::string(kNotApplicable)) << ','
      << s.count << '\n';
}

}  // namespace

std::vector<std::exception_ptr> parallel_for(
    std::size_t n, unsigned jobs, const std::function<void(std::size_t)>& fn) {
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const unsigned threads =
      static_cast<unsigned>(std::min<std::size_t>(std::max(jobs, 1u), n));
  if (threads <= 1) {
    worker();
    return errors;
  }
  std::vector<std::jthread> pool;
  pool.reserve(threads);
  for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
  pool.clear();  // joins
  return errors;
}

void ExperimentConfig::check() const {
  if (dataset_path.has_value() == synthetic.has_value()) {
    throw ConfigError("exactly one dataset source (file or synthetic) is required");
  }
  if (synthetic) synthetic->check();
  episodes.check();
  train.check();
  if (!(threshold > 0.0 && threshold < 1.0)) {
    throw ConfigError("threshold must lie in (0, 1)");
  }
  threshold_grid(grid_step);  // validates the step
  if (jobs == 0) throw ConfigError("jobs must be >= 1");
}

std::string ExperimentConfig::to_json() const {
  nlohmann::ordered_json j;
  if (dataset_path) {
    j["dataset"] = {{"path", dataset_path->string()}};
  } else if (synthetic) {
    j["dataset"] = {{"synthetic",
                     {{"dim", synthetic->dim},
                      {"num_labels", synthetic->num_labels},
                      {"examples_per_label", synthetic->examples_per_label},
                      {"noise_sigma", synthetic->noise_sigma},
                      {"max_labels_per_example", synthetic->max_labels_per_example},
                      {"augmentations_per_example", synthetic->augmentations_per_example},
                      {"seed", synthetic->seed}}}};
  }
  j["episodes"] = {{"n_way", episodes.n_way},
                   {"n_shot", episodes.n_shot},
                   {"n_test", episodes.n_test},
                   {"n_episodes", episodes.n_episodes},
                   {"seed", episodes.seed}};
  j["train"] = {{"epochs", train.epochs},
                {"learning_rate", train.learning_rate},
                {"adam_beta1", train.adam_beta1},
                {"adam_beta2", train.adam_beta2},
                {"adam_epsilon", train.adam_epsilon},
                {"renormalize_each_step", train.renormalize_each_step},
                {"seed", train.seed}};
  j["head"] = to_string(head);
  j["threshold"] = threshold;
  j["grid_step"] = grid_step;
  j["augmentation"] = {{"mode", to_string(augmentation.mode)},
                       {"trivial_repeats", augmentation.trivial_repeats}};
  return j.dump(2);
}

EmbeddingDataset resolve_dataset(const ExperimentConfig& config) {
  if (config.dataset_path.has_value() == config.synthetic.has_value()) {
    throw ConfigError("exactly one dataset source (file or synthetic) is required");
  }
  if (config.dataset_path) return load_dataset(*config.dataset_path);
  return generate_synthetic(*config.synthetic);
}

EvalMode infer_eval_mode(const EmbeddingDataset& dataset, Head head) {
  const bool single = std::all_of(
      dataset.records.begin(), dataset.records.end(),
      [](const EmbeddingRecord& r) { return r.labels.size() == 1; });
  if (head == Head::kSoftmax) {
    if (!single) {
      throw ConfigError("softmax head requires a single-label dataset");
    }
    return EvalMode::kSingleLabelSoftmax;
  }
  return single ? EvalMode::kSingleLabelSigmoid : EvalMode::kMultiLabel;
}

EpisodeResult evaluate_episode(const EmbeddingDataset& dataset,
                               const Episode& episode,
                               const ExperimentConfig& config, EvalMode mode,
                               EvalBatch* batch_out) {
  const auto rows =
      expand_training_rows(dataset, episode.train_records, config.augmentation);
  const Matrix train_x = embedding_matrix(dataset, rows);

  std::vector<ClassExamples> classes;
  classes.reserve(episode.sampled_labels.size());
  for (auto label : episode.sampled_labels) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (dataset.records[rows[i]].has_label(label)) members.push_back(i);
    }
    Matrix x(static_cast<Eigen::Index>(members.size()), train_x.cols());
    for (std::size_t i = 0; i < members.size(); ++i) {
      x.row(static_cast<Eigen::Index>(i)) =
          train_x.row(static_cast<Eigen::Index>(members[i]));
    }
    classes.push_back({dataset.label_vocab[label], std::move(x)});
  }
  auto classifier =
      ImprintClassifier::imprint(classes, config.head, config.threshold);
  if (config.train.epochs > 0) {
    train(classifier, train_x,
          target_matrix(dataset, rows, episode.sampled_labels), config.train);
  }

  EvalBatch batch;
  batch.truth = target_matrix(dataset, episode.test_records, episode.sampled_labels)
                    .cast<std::uint8_t>();
  batch.scores = classifier.scores(embedding_matrix(dataset, episode.test_records));
  batch.predictions = classifier.decide(batch.scores);

  EpisodeResult result;
  result.episode = episode.index;
  result.seed = episode.seed;
  result.metrics = compute_all(batch, mode);
  result.best = best_threshold(batch.truth, batch.scores, threshold_grid(config.grid_step));
  if (batch_out) *batch_out = std::move(batch);
  return result;
}

MetricSummary summarize_values(const std::vector<double>& values) {
  MetricSummary s;
  s.count = values.size();
  if (values.empty()) return s;
  double sum = 0.0;
  for (double v : values) sum += v;
  const double mean = sum / static_cast<double>(values.size());
  s.mean = mean;
  if (values.size() > 1) {
    double sq = 0.0;
    for (double v : values) sq += (v - mean) * (v - mean);
    const double n = static_cast<double>(values.size());
    s.stderr_ = std::sqrt(sq / (n - 1.0)) / std::sqrt(n);
  }
  return s;
}

RunSummary summarize(const std::vector<EpisodeResult>& episodes) {
  RunSummary s;
  s.episodes = episodes.size();
  std::vector<MetricsReport> reports;
  std::vector<double> thresholds, best_f1;
  for (const auto& e : episodes) {
    reports.push_back(e.metrics);
    thresholds.push_back(e.best.threshold);
    best_f1.push_back(e.best.value);
  }
  for (std::size_t m = 0; m < kMetricCount; ++m) {
    s.metrics[m] = summarize_values(values_of(reports, static_cast<Metric>(m)));
  }
  s.best_threshold = summarize_values(thresholds);
  s.best_f1 = summarize_values(best_f1);
  return s;
}

FewShotResult run_fewshot(const EmbeddingDataset& dataset,
                          const ExperimentConfig& config, bool keep_batches) {
  config.episodes.check();
  return run_fewshot(dataset, sample_episodes(dataset, config.episodes), config,
                     keep_batches);
}

FewShotResult run_fewshot(const EmbeddingDataset& dataset,
                          const std::vector<Episode>& episodes,
                          const ExperimentConfig& config, bool keep_batches) {
  config.train.check();
  const auto start = Clock::now();
  FewShotResult result;
  result.mode = infer_eval_mode(dataset, config.head);
  result.episodes.resize(episodes.size());
  if (keep_batches) result.batches.resize(episodes.size());
  const auto errors = parallel_for(episodes.size(), config.jobs, [&](std::size_t i) {
    result.episodes[i] = evaluate_episode(dataset, episodes[i], config, result.mode,
                                          keep_batches ? &result.batches[i] : nullptr);
  });
  raise_failures(errors, "episode");
  result.summary = summarize(result.episodes);
  result.summary.wall_seconds =
      std::chrono::duration<double>(Clock::now() - start).count();
  return result;
}

void write_episodes_csv(std::ostream& out, const FewShotResult& result) {
  out << "episode,seed";
  for (auto name : kMetricNames) out << ',' << name;
  out << ",best_threshold,best_f1\n";
  for (const auto& e : result.episodes) {
    out << e.episode << ',' << e.seed;
    for (const auto& v : e.metrics.values) out << ',' << format_optional(v);
    out << ',' << format_double(e.best.threshold) << ','
        << format_double(e.best.value) << '\n';
  }
}

void write_summary_csv(std::ostream& out, const RunSummary& summary) {
  out << "metric,mean,stderr,n\n";
  for (std::size_t m = 0; m < kMetricCount; ++m) {
    write_summary_line(out, kMetricNames[m], summary.metrics[m]);
  }
  write_summary_line(out, "best_threshold", summary.best_threshold);
  write_summary_line(out, "best_f1", summary.best_f1);
}

RunSummary summarize_episodes_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw DataError("episodes CSV is empty");
  const auto header = split_csv_line(line);
  std::array<std::optional<std::size_t>, kMetricCount> metric_column;
  std::optional<std::size_t> threshold_column, best_f1_column;
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (auto m = parse_metric(header[c])) {
      metric_column[static_cast<std::size_t>(*m)] = c;
    } else if (header[c] == "best_threshold") {
      threshold_column = c;
    } else if (header[c] == "best_f1") {
      best_f1_column = c;
    }
  }
  std::array<std::vector<double>, kMetricCount> values;
  std::vector<double> thresholds, best_f1;
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    const auto fields = split_csv_line(line);
    if (fields.size() != header.size()) {
      throw DataError("episodes CSV row " + std::to_string(rows + 1) +
                      " has " + std::to_string(fields.size()) + " fields");
    }
    for (std::size_t m = 0; m < kMetricCount; ++m) {
      if (!metric_column[m]) continue;
      if (auto v = parse_csv_number(fields[*metric_column[m]])) values[m].push_back(*v);
    }
    if (threshold_column) {
      if (auto v = parse_csv_number(fields[*threshold_column])) thresholds.push_back(*v);
    }
    if (best_f1_column) {
      if (auto v = parse_csv_number(fields[*best_f1_column])) best_f1.push_back(*v);
    }
    ++rows;
  }
  RunSummary s;
  s.episodes = rows;
  for (std::size_t m = 0; m < kMetricCount; ++m) s.metrics[m] = summarize_values(values[m]);
  s.best_threshold = summarize_values(thresholds);
  s.best_f1 = summarize_values(best_f1);
  return s;
}

void write_fewshot_run(const ExperimentConfig& config, const FewShotResult& result) {
  std::filesystem::create_directories(config.output_dir);
  write_json_file(config.output_dir / "config.json", config.to_json());
  {
    auto out = open_output(config.output_dir / "episodes.csv");
    write_episodes_csv(out, result);
  }
  auto out = open_output(config.output_dir / "summary.csv");
  write_summary_csv(out, result.summary);
}

std::vector<AblationCell> run_ablation_grid(const EmbeddingDataset& dataset,
                                            const ExperimentConfig& config,
                                            const AblationAxes& axes) {
  if (axes.epochs.empty() || axes.augmentation_modes.empty() ||
      axes.trivial_repeats.empty() || axes.heads.empty()) {
    throw ConfigError("every ablation axis needs at least one value");
  }
  config.episodes.check();
  const auto episodes = sample_episodes(dataset, config.episodes);
  std::vector<AblationCell> cells;
  for (int epochs : axes.epochs) {
    for (auto mode : axes.augmentation_modes) {
      for (auto repeats : axes.trivial_repeats) {
        for (auto head : axes.heads) {
          AblationCell cell{epochs, mode, repeats, head, std::nullopt, {}};
          ExperimentConfig c = config;
          c.train.epochs = epochs;
          c.augmentation = {mode, repeats};
          c.head = head;
          try {
            cell.summary = run_fewshot(dataset, episodes, c).summary;
          } catch (const ConfigError& e) {
            cell.error = e.what();
          }
          cells.push_back(std::move(cell));
        }
      }
    }
  }
  return cells;
}

void write_ablation_csv(std::ostream& out, const std::vector<AblationCell>& cells) {
  out << "epochs,aug_mode,trivial_repeats,head";
  for (auto name : kMetricNames) out << ',' << name << "_mean," << name << "_stderr";
  out << ",best_threshold_mean,best_threshold_stderr,error\n";
  for (const auto& c : cells) {
    out << c.epochs << ',' << to_string(c.augmentation_mode) << ','
        << c.trivial_repeats << ',' << to_string(c.head);
    auto put = [&](const MetricSummary& s) {
      out << ',' << format_optional(s.mean) << ','
          << (s.mean ? format_double(s.stderr_) : std::string(kNotApplicable));
    };
    if (c.summary) {
      for (const auto& s : c.summary->metrics) put(s);
      put(c.summary->best_threshold);
    } else {
      for (std::size_t i = 0; i < kMetricCount + 1; ++i) {
        out << ',' << kNotApplicable << ',' << kNotApplicable;
      }
    }
    std::string error = c.error;
    std::replace(error.begin(), error.end(), ',', ';');
    std::replace(error.begin(), error.end(), '\n', ' ');
    out << ',' << error << '\n';
  }
}

ContinualRunResult run_continual_experiment(const EmbeddingDataset& dataset,
                                            const ExperimentConfig& config,
                                            bool reimprint_each_step) {
  config.episodes.check();
  return run_continual_experiment(dataset, sample_episodes(dataset, config.episodes),
                                  config, reimprint_each_step);
}

ContinualRunResult run_continual_experiment(const EmbeddingDataset& dataset,
                                            const std::vector<Episode>& episodes,
                                            const ExperimentConfig& config,
                                            bool reimprint_each_step) {
  if (config.head != Head::kSigmoid) {
    throw ConfigError("continual evaluation uses the sigmoid head");
  }
  ContinualOptions options;
  options.train = config.train;
  options.threshold = config.threshold;
  options.grid = threshold_grid(config.grid_step);
  options.augmentation = config.augmentation;
  options.reimprint_each_step = reimprint_each_step;
  options.check();

  ContinualRunResult result;
  result.traces.resize(episodes.size());
  const auto errors = parallel_for(episodes.size(), config.jobs, [&](std::size_t i) {
    result.traces[i] = run_continual(dataset, episodes[i], options);
  });
  raise_failures(errors, "episode");

  const std::size_t steps = result.traces.empty() ? 0 : result.traces.front().steps.size();
  for (std::size_t k = 0; k < steps; ++k) {
    ContinualStepSummary s;
    s.step = static_cast<std::uint32_t>(k + 1);
    s.n_visible = result.traces.front().steps[k].n_visible;
    std::vector<MetricsReport> reports;
    std::vector<double> fixed, threshold, best;
    for (const auto& t : result.traces) {
      const auto& st = t.steps.at(k);
      reports.push_back(st.metrics);
      fixed.push_back(st.fixed_threshold_f1);
      threshold.push_back(st.best.threshold);
      best.push_back(st.best.value);
    }
    for (std::size_t m = 0; m < kMetricCount; ++m) {
      s.metrics[m] = summarize_values(values_of(reports, static_cast<Metric>(m)));
    }
    s.fixed_threshold_f1 = summarize_values(fixed);
    s.best_threshold = summarize_values(threshold);
    s.best_f1 = summarize_values(best);
    result.steps.push_back(std::move(s));
  }
  return result;
}

void write_continual_summary_csv(std::ostream& out, const ContinualRunResult& result) {
  out << "step,n_visible";
  for (auto name : kMetricNames) out << ',' << name;
  out << ",fixed_threshold_f1,fixed_threshold_f1_stderr,best_threshold,"
         "best_threshold_stderr,best_f1,best_f1_stderr,episodes\n";
  for (const auto& s : result.steps) {
    out << s.step << ',' << s.n_visible;
    for (const auto& m : s.metrics) out << ',' << format_optional(m.mean);
    for (const auto* m : {&s.fixed_threshold_f1, &s.best_threshold, &s.best_f1}) {
      out << ',' << format_optional(m->mean) << ',' << format_double(m->stderr_);
    }
    out << ',' << s.best_f1.count << '\n';
  }
}

void write_continual_run(const ExperimentConfig& config,
                         const ContinualRunResult& result) {
  std::filesystem::create_directories(config.output_dir / "traces");
  write_json_file(config.output_dir / "config.json", config.to_json());
  {
    auto out = open_output(config.output_dir / "continual_summary.csv");
    write_continual_summary_csv(out, result);
  }
  for (const auto& trace : result.traces) {
    auto out = open_output(config.output_dir / "traces" /
                           episode_file_name(trace.episode, ".csv"));
    write_trace_csv(out, trace);
  }
}

ThresholdSweepResult run_threshold_sweep(const EmbeddingDataset& dataset,
                                         const ExperimentConfig& config) {
  auto fewshot = run_fewshot(dataset, config, /*keep_batches=*/true);
  ThresholdSweepResult r;
  r.grid = threshold_grid(config.grid_step);
  std::vector<std::vector<double>> per_threshold(r.grid.size());
  for (const auto& batch : fewshot.batches) {
    const auto curve = f1_curve(batch.truth, batch.scores, r.grid);
    for (std::size_t i = 0; i < curve.size(); ++i) per_threshold[i].push_back(curve[i]);
  }
  for (const auto& values : per_threshold) {
    r.f1_by_threshold.push_back(summarize_values(values));
  }
  r.episodes = std::move(fewshot.episodes);
  return r;
}

void write_threshold_curve_csv(std::ostream& out, const ThresholdSweepResult& r) {
  out << "threshold,mean_f1,stderr\n";
  for (std::size_t i = 0; i < r.grid.size(); ++i) {
    out << format_double(r.grid[i]) << ','
        << format_optional(r.f1_by_threshold[i].mean) << ','
        << format_double(r.f1_by_threshold[i].stderr_) << '\n';
  }
}

std::string batch_to_json(const EvalBatch& batch, EvalMode mode, double threshold) {
  batch.check();
  auto rows = [](const auto& m) {
    auto out = nlohmann::ordered_json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      auto row = nlohmann::ordered_json::array();
      for (Eigen::Index j = 0; j < m.cols(); ++j) {
        if constexpr (std::is_same_v<typename std::decay_t<decltype(m)>::Scalar,
                                     std::uint8_t>) {
          row.push_back(static_cast<int>(m(i, j)));
        } else {
          row.push_back(m(i, j));
        }
      }
      out.push_back(std::move(row));
    }
    return out;
  };
  nlohmann::ordered_json j;
  j["mode"] = to_string(mode);
  j["threshold"] = threshold;
  j["truth"] = rows(batch.truth);
  j["scores"] = rows(batch.scores);
  j["predictions"] = rows(batch.predictions);
  return j.dump();
}

ParsedBatch batch_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("invalid batch JSON: ") + e.what());
  }
  ParsedBatch parsed;
  try {
    if (j.contains("mode")) parsed.mode = parse_eval_mode(j.at("mode").get<std::string>());
    if (j.contains("threshold")) parsed.threshold = j.at("threshold").get<double>();
    const auto& truth = j.at("truth");
    const auto& scores = j.at("scores");
    const auto n = static_cast<Eigen::Index>(truth.size());
    const auto k = n > 0 ? static_cast<Eigen::Index>(truth.at(0).size()) : 0;
    auto read = [&](const nlohmann::json& rows, auto& m) {
      if (static_cast<Eigen::Index>(rows.size()) != n) {
        throw ShapeMismatchError("row count differs from truth");
      }
      m.resize(n, k);
      for (Eigen::Index i = 0; i < n; ++i) {
        const auto& row = rows.at(static_cast<std::size_t>(i));
        if (static_cast<Eigen::Index>(row.size()) != k) {
          throw ShapeMismatchError("row " + std::to_string(i) + " has wrong width");
        }
        for (Eigen::Index c = 0; c < k; ++c) {
          using Scalar = typename std::decay_t<decltype(m)>::Scalar;
          m(i, c) = static_cast<Scalar>(row.at(static_cast<std::size_t>(c)).get<double>());
        }
      }
    };
    read(truth, parsed.batch.truth);
    read(scores, parsed.batch.scores);
    if (j.contains("predictions")) {
      read(j.at("predictions"), parsed.batch.predictions);
    } else {
      ImprintClassifier rule(1, parsed.mode == EvalMode::kSingleLabelSoftmax
                                    ? Head::kSoftmax
                                    : Head::kSigmoid,
                             parsed.threshold);
      parsed.batch.predictions = rule.decide(parsed.batch.scores);
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed batch JSON: ") + e.what());
  }
  parsed.batch.check();
  return parsed;
}

void write_report_csv(std::ostream& out, const MetricsReport& report) {
  out << "metric,value\n";
  for (std::size_t m = 0; m < kMetricCount; ++m) {
    out << kMetricNames[m] << ',' << format_optional(report.values[m]) << '\n';
  }
}

void write_report_table(std::ostream& out, const MetricsReport& report) {
  out << "+------------------------+----------+\n"
      << "| metric                 | value    |\n"
      << "+------------------------+----------+\n";
  for (std::size_t m = 0; m < kMetricCount; ++m) {
    std::ostringstream value;
    if (report.values[m]) {
      value << std::fixed << std::setprecision(4) << *report.values[m];
    } else {
      value << "n/a";
    }
    out << "| " << std::left << std::setw(22) << kMetricNames[m] << " | "
        << std::setw(8) << value.str() << " |\n";
  }
  out << "+------------------------+----------+\n";
}

}  // namespace mwi
