#include <map>
#include <set>

#include "doctest.h"
#include "mwi/episode_sampler.hpp"
#include "mwi/error.hpp"

namespace {

using namespace mwi;

EmbeddingDataset synthetic(std::uint32_t labels, std::uint32_t per_label,
                           std::uint32_t max_labels = 1,
                           std::uint32_t augmentations = 0) {
  SyntheticSpec spec;
  spec.dim = 8;
  spec.num_labels = labels;
  spec.examples_per_label = per_label;
  spec.noise_sigma = 0.1;
  spec.max_labels_per_example = max_labels;
  spec.augmentations_per_example = augmentations;
  spec.seed = 17;
  return generate_synthetic(spec);
}

std::set<std::uint64_t> groups_of(const EmbeddingDataset& ds,
                                  const std::vector<std::size_t>& records) {
  std::set<std::uint64_t> g;
  for (auto r : records) g.insert(ds.records[r].group_id);
  return g;
}

}  // namespace

TEST_CASE("every group lands in exactly one split") {
  const auto ds = synthetic(3, 10);
  const auto episodes = sample_episodes(ds, {.n_way = 3, .n_shot = 5, .n_test = 5,
                                             .n_episodes = 1, .seed = 1});
  REQUIRE(episodes.size() == 1);
  const auto& ep = episodes[0];
  const auto train = groups_of(ds, ep.train_records);
  const auto test = groups_of(ds, ep.test_records);
  CHECK(train.size() == 15);
  CHECK(test.size() == 15);
  std::set<std::uint64_t> all = train;
  all.insert(test.begin(), test.end());
  CHECK(all.size() == 30);
}

TEST_CASE("sampling is deterministic and prefix stable") {
  const auto ds = synthetic(8, 12, 2);
  EpisodeSpec spec{.n_way = 4, .n_shot = 3, .n_test = 4, .n_episodes = 100, .seed = 42};
  const auto a = sample_episodes(ds, spec);
  CHECK(a == sample_episodes(ds, spec));
  spec.n_episodes = 50;
  const auto b = sample_episodes(ds, spec);
  CHECK(std::equal(b.begin(), b.end(), a.begin()));
  spec.seed = 43;
  CHECK_FALSE(sample_episodes(ds, spec)[0] == a[0]);
}

TEST_CASE("insufficient data is reported") {
  auto ds = synthetic(3, 10);
  // Drop label 0 down to 6 groups.
  std::size_t kept = 0;
  std::erase_if(ds.records, [&](const EmbeddingRecord& r) {
    return r.labels[0] == 0 && ++kept > 6;
  });
  ds.label_vocab[0] = "A";
  try {
    sample_episodes(ds, {.n_way = 3, .n_shot = 5, .n_test = 5, .n_episodes = 1, .seed = 0});
    FAIL("expected InsufficientExamplesError");
  } catch (const InsufficientExamplesError& e) {
    CHECK(e.label() == 0);
    CHECK(e.label_name() == "A");
    CHECK(std::string(e.what()).find("'A'") != std::string::npos);
  }
  CHECK_THROWS_AS(sample_episodes(ds, {.n_way = 4, .n_shot = 1, .n_test = 1, .n_episodes = 1}),
                  InsufficientLabelsError);
  CHECK_THROWS_AS(sample_episodes(ds, {.n_way = 1, .n_shot = 1, .n_test = 1, .n_episodes = 1}),
                  ConfigError);
}

TEST_CASE("target matrix restricts to the sampled labels") {
  EmbeddingDataset ds;
  ds.dim = 2;
  ds.label_vocab = {"A", "B", "C", "Z"};
  ds.records.push_back({0, 0, {1, 0}, {0, 3}});
  ds.records.push_back({1, 1, {0, 1}, {3}});
  const std::vector<std::size_t> rows{0, 1};
  const std::vector<std::uint32_t> labels{0, 1, 2};
  const Matrix t = target_matrix(ds, rows, labels);
  CHECK(t.rows() == 2);
  CHECK(t(0, 0) == 1);
  CHECK(t(0, 1) == 0);
  CHECK(t(0, 2) == 0);
  CHECK(t.row(1).sum() == 0);
}

TEST_CASE("episode invariants hold across many multilabel episodes") {
  const auto ds = synthetic(10, 15, 3, 2);
  const EpisodeSpec spec{.n_way = 5, .n_shot = 2, .n_test = 3, .n_episodes = 200, .seed = 9};
  EpisodeSampler sampler(ds);
  for (const auto& ep : sampler.sample_all(spec)) {
    // Train and test never share a group.
    const auto train = groups_of(ds, ep.train_records);
    for (auto g : groups_of(ds, ep.test_records)) CHECK(train.count(g) == 0);

    // Whole groups go to train; test gets only the original copy.
    std::map<std::uint64_t, int> copies;
    for (auto r : ep.train_records) ++copies[ds.records[r].group_id];
    for (const auto& [g, n] : copies) CHECK(n == 3);
    for (auto r : ep.test_records) {
      for (const auto& other : ds.records) {
        if (other.group_id == ds.records[r].group_id) {
          CHECK(other.record_id >= ds.records[r].record_id);
        }
      }
    }

    // Column sums: at least n_shot train groups per label, n_test test rows.
    const auto targets = episode_target_matrix(ds, ep);
    CHECK(targets.test.rows() == 15);
    for (Eigen::Index j = 0; j < 5; ++j) {
      CHECK(targets.train.col(j).sum() >= spec.n_shot * 3);
      CHECK(targets.test.col(j).sum() >= spec.n_test);
    }
    std::set<std::uint32_t> distinct(ep.sampled_labels.begin(), ep.sampled_labels.end());
    CHECK(distinct.size() == 5);
    std::size_t stacked = 0;
    for (const auto& part : ep.train_by_label) stacked += part.size();
    CHECK(stacked == ep.train_records.size());
  }
}

TEST_CASE("labels are sampled uniformly") {
  const auto ds = synthetic(10, 4);
  EpisodeSampler sampler(ds);
  const EpisodeSpec spec{.n_way = 3, .n_shot = 1, .n_test = 1, .n_episodes = 1, .seed = 2024};
  std::vector<int> counts(10, 0);
  constexpr int kDraws = 10000;
  for (std::uint32_t i = 0; i < kDraws; ++i) {
    for (auto l : sampler.sample(spec, i).sampled_labels) ++counts[l];
  }
  for (int c : counts) {
    CHECK(std::abs(double(c) / kDraws - 0.3) <= 0.05);
  }
}

TEST_CASE("training rows expand by augmentation options") {
  const auto ds = synthetic(3, 4, 1, 2);
  const auto ep = sample_episodes(ds, {.n_way = 2, .n_shot = 2, .n_test = 1,
                                       .n_episodes = 1, .seed = 3})[0];
  REQUIRE(ep.train_records.size() == 12);
  CHECK(expand_training_rows(ds, ep.train_records, {}) == ep.train_records);
  const auto originals = expand_training_rows(
      ds, ep.train_records, {AugmentationMode::kUnaugmentedOnly, 0});
  CHECK(originals.size() == 4);
  const auto repeated = expand_training_rows(
      ds, ep.train_records, {AugmentationMode::kUnaugmentedOnly, 10});
  CHECK(repeated.size() == 44);
  CHECK(repeated[0] == repeated[10]);
  CHECK(repeated[11] == originals[1]);
  CHECK(parse_augmentation_mode("all") == AugmentationMode::kAllCopies);
  CHECK_THROWS_AS(parse_augmentation_mode("some"), ConfigError);
}
