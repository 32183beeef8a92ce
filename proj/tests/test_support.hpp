// Dataset-level helpers shared by the unit and acceptance tests.
#ifndef MWI_TESTS_TEST_SUPPORT_HPP_
#define MWI_TESTS_TEST_SUPPORT_HPP_

#include <vector>

#include "mwi/embedding_store.hpp"
#include "mwi/episode_sampler.hpp"
#include "oracles.hpp"

namespace test_support {

// Synthetic data matching the 512-wide embeddings the method targets.
inline mwi::SyntheticSpec synthetic_spec(double sigma, std::uint32_t max_labels,
                                         std::uint32_t labels = 30,
                                         std::uint32_t per_label = 25,
                                         std::uint64_t seed = 1234) {
  mwi::SyntheticSpec spec;
  spec.dim = 512;
  spec.num_labels = labels;
  spec.examples_per_label = per_label;
  spec.noise_sigma = sigma;
  spec.max_labels_per_example = max_labels;
  spec.seed = seed;
  return spec;
}

struct OracleCounts {
  double tp = 0, fp = 0, fn = 0;
  double f1() const { return oracle::div0(2 * tp, 2 * tp + fp + fn); }
};

// Nearest class mean over the episode's training rows, predicting exactly one
// label per test row; returns micro counts against the sampled-label truth.
inline OracleCounts nearest_prototype_counts(const mwi::EmbeddingDataset& ds,
                                             const mwi::Episode& ep) {
  std::vector<std::vector<double>> means(ep.sampled_labels.size(),
                                         std::vector<double>(ds.dim, 0.0));
  for (std::size_t j = 0; j < ep.sampled_labels.size(); ++j) {
    for (auto r : ep.train_records) {
      if (!ds.records[r].has_label(ep.sampled_labels[j])) continue;
      for (std::size_t d = 0; d < ds.dim; ++d) means[j][d] += ds.records[r].vector[d];
    }
  }
  OracleCounts c;
  for (auto r : ep.test_records) {
    const auto& rec = ds.records[r];
    const std::vector<double> x(rec.vector.begin(), rec.vector.end());
    const auto guess = oracle::nearest_prototype(means, x);
    for (std::size_t j = 0; j < ep.sampled_labels.size(); ++j) {
      const bool truth = rec.has_label(ep.sampled_labels[j]);
      const bool pred = j == guess;
      c.tp += truth && pred;
      c.fp += !truth && pred;
      c.fn += truth && !pred;
    }
  }
  return c;
}

}  // namespace test_support

#endif  // MWI_TESTS_TEST_SUPPORT_HPP_
