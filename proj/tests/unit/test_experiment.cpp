#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "mwi/csv.hpp"
#include "mwi/error.hpp"
#include "mwi/experiment.hpp"
#include "test_support.hpp"

namespace {

using namespace mwi;

ExperimentConfig small_config(std::uint32_t episodes = 6) {
  ExperimentConfig c;
  c.synthetic = test_support::synthetic_spec(0.05, 1, 10, 20);
  c.episodes = {.n_way = 5, .n_shot = 5, .n_test = 15, .n_episodes = episodes, .seed = 3};
  return c;
}

std::string episodes_csv(const FewShotResult& r) {
  std::ostringstream out;
  write_episodes_csv(out, r);
  return out.str();
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

}  // namespace

TEST_CASE("config validation") {
  ExperimentConfig c = small_config();
  CHECK_NOTHROW(c.check());
  c.dataset_path = "x.mwie";
  CHECK_THROWS_AS(c.check(), ConfigError);
  c = small_config();
  c.synthetic.reset();
  CHECK_THROWS_AS(c.check(), ConfigError);
  c = small_config();
  c.threshold = 0;
  CHECK_THROWS_AS(c.check(), ConfigError);
  c = small_config();
  c.jobs = 0;
  CHECK_THROWS_AS(c.check(), ConfigError);
  CHECK(small_config().to_json().find("\"n_way\": 5") != std::string::npos);
}

TEST_CASE("evaluation mode follows the dataset and head") {
  const auto single = resolve_dataset(small_config());
  CHECK(infer_eval_mode(single, Head::kSigmoid) == EvalMode::kSingleLabelSigmoid);
  CHECK(infer_eval_mode(single, Head::kSoftmax) == EvalMode::kSingleLabelSoftmax);
  auto c = small_config();
  c.synthetic->max_labels_per_example = 3;
  const auto multi = resolve_dataset(c);
  CHECK(infer_eval_mode(multi, Head::kSigmoid) == EvalMode::kMultiLabel);
  CHECK_THROWS_AS(infer_eval_mode(multi, Head::kSoftmax), ConfigError);
}

TEST_CASE("few-shot runs on separable data beat the threshold and are reproducible") {
  const auto config = small_config(8);
  const auto ds = resolve_dataset(config);
  const auto a = run_fewshot(ds, config);
  CHECK(a.episodes.size() == 8);
  CHECK(*a.summary[Metric::kOverallF1].mean >= 0.95);
  CHECK(a.summary[Metric::kTop1Accuracy].mean.has_value());

  auto parallel = config;
  parallel.jobs = 3;
  CHECK(episodes_csv(a) == episodes_csv(run_fewshot(ds, parallel)));
}

TEST_CASE("trivial repetition keeps separable data above the threshold") {
  auto config = small_config(5);
  config.augmentation.trivial_repeats = 10;
  const auto ds = resolve_dataset(config);
  const auto repeated = run_fewshot(ds, config);
  CHECK(*repeated.summary[Metric::kOverallF1].mean >= 0.95);
  // Full-batch mean loss: uniform repetition leaves the gradient unchanged.
  config.augmentation.trivial_repeats = 0;
  const auto plain = run_fewshot(ds, config);
  CHECK(*repeated.summary[Metric::kOverallF1].mean ==
        doctest::Approx(*plain.summary[Metric::kOverallF1].mean).epsilon(1e-9));
}

TEST_CASE("summary means equal the per-episode CSV means") {
  const auto config = small_config(7);
  const auto ds = resolve_dataset(config);
  const auto r = run_fewshot(ds, config);
  std::istringstream in(episodes_csv(r));
  const auto re = summarize_episodes_csv(in);
  CHECK(re.episodes == 7);
  for (std::size_t m = 0; m < kMetricCount; ++m) {
    REQUIRE(re.metrics[m].mean.has_value() == r.summary.metrics[m].mean.has_value());
    if (!re.metrics[m].mean) continue;
    double manual = 0;
    for (const auto& e : r.episodes) manual += *e.metrics.values[m];
    manual /= 7;
    CHECK(std::abs(*re.metrics[m].mean - manual) <= 1e-12);
    CHECK(std::abs(*r.summary.metrics[m].mean - manual) <= 1e-12);
    CHECK(re.metrics[m].stderr_ == doctest::Approx(r.summary.metrics[m].stderr_).epsilon(1e-12));
  }
}

TEST_CASE("summaries of constant values have zero standard error") {
  const auto s = summarize_values({0.5, 0.5, 0.5});
  CHECK(*s.mean == 0.5);
  CHECK(s.stderr_ == 0.0);
  CHECK_FALSE(summarize_values({}).mean.has_value());
  const auto two = summarize_values({0.0, 1.0});
  CHECK(two.stderr_ == doctest::Approx(0.5));
}

TEST_CASE("ablation grid has one row per cell") {
  auto config = small_config(3);
  const auto ds = resolve_dataset(config);
  AblationAxes axes;
  axes.epochs = {0, 20};
  axes.heads = {Head::kSigmoid, Head::kSoftmax};
  const auto cells = run_ablation_grid(ds, config, axes);
  CHECK(cells.size() == 4);
  std::ostringstream out;
  write_ablation_csv(out, cells);
  const auto text = out.str();
  CHECK(std::count(text.begin(), text.end(), '\n') == 5);

  // Labels compete for groups once examples carry several labels.
  config.synthetic->max_labels_per_example = 2;
  config.episodes.n_test = 8;
  const auto multi = resolve_dataset(config);
  const auto with_error = run_ablation_grid(multi, config, axes);
  CHECK(with_error[1].head == Head::kSoftmax);
  CHECK_FALSE(with_error[1].summary.has_value());
  CHECK_FALSE(with_error[1].error.empty());
  CHECK(with_error[0].summary.has_value());
}

TEST_CASE("run directories are byte-identical across repeats") {
  const auto root = std::filesystem::temp_directory_path() / "mwi_experiment_runs";
  std::filesystem::remove_all(root);
  auto config = small_config(4);
  const auto ds = resolve_dataset(config);
  for (const char* name : {"a", "b"}) {
    config.output_dir = root / name;
    write_fewshot_run(config, run_fewshot(ds, config));
  }
  for (const char* file : {"episodes.csv", "summary.csv"}) {
    CHECK(slurp(root / "a" / file) == slurp(root / "b" / file));
  }
  CHECK(std::filesystem::exists(root / "a" / "config.json"));

  config.output_dir = root / "continual";
  config.train.epochs = 5;
  write_continual_run(config, run_continual_experiment(ds, config));
  CHECK(std::filesystem::exists(root / "continual" / "traces" / "episode_0003.csv"));
  std::filesystem::remove_all(root);
}

TEST_CASE("episode failures are aggregated") {
  auto config = small_config(2);
  const auto ds = resolve_dataset(config);
  auto episodes = sample_episodes(ds, config.episodes);
  episodes[1].train_records.clear();
  CHECK_THROWS_AS(run_fewshot(ds, episodes, config), EpisodeFailure);
}

TEST_CASE("batch JSON round-trips") {
  EvalBatch b;
  b.truth = BinaryMatrix::Zero(2, 3);
  b.truth(0, 1) = 1;
  b.truth(1, 2) = 1;
  b.scores.resize(2, 3);
  b.scores << 0.1, 0.9, 0.4, 0.3, 0.55, 0.6;
  b.predictions = threshold_scores(b.scores, 0.5);
  const auto parsed = batch_from_json(batch_to_json(b, EvalMode::kMultiLabel, 0.5));
  CHECK(parsed.mode == EvalMode::kMultiLabel);
  CHECK(parsed.batch.truth == b.truth);
  CHECK(parsed.batch.scores == b.scores);
  CHECK(parsed.batch.predictions == b.predictions);

  const auto derived = batch_from_json(
      R"({"mode":"single-softmax","truth":[[0,1],[1,0]],"scores":[[0.2,0.8],[0.6,0.4]]})");
  CHECK(derived.batch.predictions(0, 1) == 1);
  CHECK(derived.batch.predictions(1, 0) == 1);
  CHECK_THROWS_AS(batch_from_json("{"), DataError);
  CHECK_THROWS_AS(batch_from_json(R"({"truth":[[1]],"scores":[[0.1,0.2]]})"), DataError);
}

TEST_CASE("threshold sweep produces one curve point per grid value") {
  auto config = small_config(3);
  config.grid_step = 0.05;
  const auto ds = resolve_dataset(config);
  const auto sweep = run_threshold_sweep(ds, config);
  CHECK(sweep.grid.size() == 19);
  CHECK(sweep.f1_by_threshold.size() == 19);
  CHECK(sweep.episodes.size() == 3);
}

TEST_CASE("csv helpers") {
  CHECK(split_csv_line("a,b,,c\r") == std::vector<std::string>{"a", "b", "", "c"});
  CHECK(*parse_csv_number("0.25") == 0.25);
  CHECK_FALSE(parse_csv_number("NA").has_value());
  CHECK_THROWS_AS(parse_csv_number("x1"), DataError);
  CHECK(format_double(0.1) == "0.1");
}
