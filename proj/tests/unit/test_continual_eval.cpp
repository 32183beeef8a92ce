#include <cmath>
#include <numeric>
#include <sstream>

#include "doctest.h"
#include "mwi/continual_eval.hpp"
#include "mwi/error.hpp"
#include "mwi/experiment.hpp"
#include "test_support.hpp"

namespace {

using namespace mwi;

const EmbeddingDataset& separable() {
  static const auto ds = generate_synthetic(test_support::synthetic_spec(0.05, 1, 12, 20));
  return ds;
}

ContinualOptions options_with_batches() {
  ContinualOptions o;
  o.keep_batches = true;
  return o;
}

}  // namespace

TEST_CASE("replay buffer bookkeeping") {
  ReplayBuffer buffer;
  const std::vector<std::size_t> a{1, 2}, b{3};
  buffer.add(4, a);
  buffer.add(7, b);
  CHECK(buffer.size() == 3);
  CHECK(buffer.visible_labels() == std::vector<std::uint32_t>{4, 7});
  CHECK_THROWS_AS(buffer.add(4, b), ConfigError);
}

TEST_CASE("first step separates its label as well as a nearest-prototype oracle") {
  const auto& ds = separable();
  const auto episodes = sample_episodes(ds, {.n_way = 5, .n_shot = 5, .n_test = 15,
                                             .n_episodes = 5, .seed = 21});
  for (const auto& ep : episodes) {
    const auto trace = run_continual(ds, ep, options_with_batches());
    const auto& batch = *trace.steps.front().batch;
    REQUIRE(batch.truth.cols() == 1);
    // Oracle: a test row carries the label iff its nearest class mean among
    // all sampled classes is that label's mean.
    const auto oracle = test_support::nearest_prototype_counts(ds, ep);
    REQUIRE(oracle.f1() >= 0.99);
    // Step 1 has no negatives in training, so unseen classes score near 0.5;
    // the separation shows at the step's best grid threshold.
    const double t = trace.steps.front().best.threshold;
    double tp = 0, fp = 0, fn = 0;
    for (Eigen::Index i = 0; i < batch.truth.rows(); ++i) {
      const bool pred = batch.scores(i, 0) >= t;
      tp += batch.truth(i, 0) && pred;
      fp += !batch.truth(i, 0) && pred;
      fn += batch.truth(i, 0) && !pred;
    }
    MESSAGE("step-1 F1 at 0.5: " << trace.steps.front().fixed_threshold_f1);
    CHECK(2 * tp / (2 * tp + fp + fn) >= 0.95);
  }
}

TEST_CASE("trace structure and replay invariants") {
  SyntheticSpec spec = test_support::synthetic_spec(0.1, 2, 10, 15);
  spec.augmentations_per_example = 1;
  const auto ds = generate_synthetic(spec);
  const auto ep = sample_episodes(ds, {.n_way = 5, .n_shot = 3, .n_test = 4,
                                       .n_episodes = 1, .seed = 5})[0];
  const auto trace = run_continual(ds, ep, options_with_batches());
  CHECK(trace.visible_labels == ep.sampled_labels);
  REQUIRE(trace.steps.size() == 5);
  std::size_t expected_buffer = 0;
  const auto& final_truth = trace.steps.back().batch->truth;
  for (std::size_t k = 0; k < 5; ++k) {
    const auto& s = trace.steps[k];
    CHECK(s.step == k + 1);
    CHECK(s.n_visible == k + 1);
    // groups sampled for this label x copies per group
    expected_buffer += 3 * 2;
    CHECK(s.buffer_size == expected_buffer);
    // The fixed test set: step k sees the first k columns of the final truth.
    const auto& truth = s.batch->truth;
    CHECK(truth.rows() == final_truth.rows());
    CHECK(truth == final_truth.leftCols(static_cast<Eigen::Index>(k + 1)));
    for (Eigen::Index i = 0; i < truth.rows(); ++i) {
      bool any_visible = false;
      for (std::size_t j = 0; j <= k; ++j) {
        any_visible = any_visible || ds.records[ep.test_records[static_cast<std::size_t>(i)]]
                                         .has_label(ep.sampled_labels[j]);
      }
      if (!any_visible) CHECK(truth.row(i).cast<int>().sum() == 0);
    }
    CHECK_FALSE(s.metrics[Metric::kTop1Accuracy].has_value());
    CHECK(s.fixed_threshold_f1 == *s.metrics[Metric::kOverallF1]);
  }
}

TEST_CASE("continual runs are deterministic") {
  const auto& ds = separable();
  const auto ep = sample_episodes(ds, {.n_way = 4, .n_shot = 2, .n_test = 3,
                                       .n_episodes = 1, .seed = 8})[0];
  ContinualOptions o;
  o.train.epochs = 10;
  std::ostringstream a, b;
  write_trace_csv(a, run_continual(ds, ep, o));
  write_trace_csv(b, run_continual(ds, ep, o));
  CHECK(a.str() == b.str());
  CHECK(a.str().rfind("step,n_visible,hamming_score", 0) == 0);
}

TEST_CASE("re-imprinting mode keeps unit columns and runs every step") {
  const auto& ds = separable();
  const auto ep = sample_episodes(ds, {.n_way = 3, .n_shot = 2, .n_test = 2,
                                       .n_episodes = 1, .seed = 9})[0];
  ContinualOptions o;
  o.reimprint_each_step = true;
  o.train.epochs = 5;
  CHECK(run_continual(ds, ep, o).steps.size() == 3);
  o.threshold = 1.0;
  CHECK_THROWS_AS(run_continual(ds, ep, o), ConfigError);
}

TEST_CASE("final step approaches the non-continual result") {
  const auto& ds = separable();
  ExperimentConfig config;
  config.synthetic = SyntheticSpec{};
  config.episodes = {.n_way = 5, .n_shot = 5, .n_test = 15, .n_episodes = 10, .seed = 77};
  const auto episodes = sample_episodes(ds, config.episodes);
  const auto fewshot = run_fewshot(ds, episodes, config);
  const auto continual = run_continual_experiment(ds, episodes, config);
  const double final_f1 = *continual.steps.back().fixed_threshold_f1.mean;
  CHECK(std::abs(final_f1 - *fewshot.summary[Metric::kOverallF1].mean) <= 0.05);
  CHECK(*continual.steps.front().best_threshold.mean >=
        *continual.steps.back().best_threshold.mean);
}
