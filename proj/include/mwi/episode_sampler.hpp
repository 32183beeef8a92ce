#ifndef MWI_EPISODE_SAMPLER_HPP_
#define MWI_EPISODE_SAMPLER_HPP_

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "mwi/embedding_store.hpp"
#include "mwi/types.hpp"

namespace mwi {

struct EpisodeSpec {
  std::uint32_t n_way = 5;
  std::uint32_t n_shot = 5;
  std::uint32_t n_test = 15;
  std::uint32_t n_episodes = 100;
  std::uint64_t seed = 0;

  void check() const;
};

// Record indices refer to positions in EmbeddingDataset::records.
struct Episode {
  std::uint32_t index = 0;
  std::uint64_t seed = 0;
  std::vector<std::uint32_t> sampled_labels;
  std::vector<std::size_t> train_records;
  std::vector<std::size_t> test_records;
  // train_by_label[j]: every record of the groups drawn as shots for
  // sampled_labels[j]; concatenated in order they equal train_records.
  std::vector<std::vector<std::size_t>> train_by_label;

  friend bool operator==(const Episode&, const Episode&) = default;
};

// Group and label lookup built once per dataset and shared by all episodes.
class EpisodeSampler {
 public:
  explicit EpisodeSampler(const EmbeddingDataset& dataset);

  // Labels that occur in at least one record, ascending.
  const std::vector<std::uint32_t>& labels() const { return labels_; }

  // Validates the preconditions for `spec` against the whole dataset:
  // InsufficientLabelsError when fewer than n_way labels occur,
  // InsufficientExamplesError naming the first label with fewer than
  // n_shot + n_test groups.
  void check(const EpisodeSpec& spec) const;

  Episode sample(const EpisodeSpec& spec, std::uint32_t episode_index) const;
  std::vector<Episode> sample_all(const EpisodeSpec& spec) const;

 private:
  const EmbeddingDataset* dataset_;
  std::vector<std::uint32_t> labels_;
  // Per group (dense index): record indices sorted by record_id.
  std::vector<std::vector<std::size_t>> group_records_;
  // Per label id: dense group indices whose records carry the label.
  std::vector<std::vector<std::size_t>> label_groups_;
};

// n_episodes episodes; episode i is seeded with mix_seed(spec.seed, i).
std::vector<Episode> sample_episodes(const EmbeddingDataset& dataset,
                                     const EpisodeSpec& spec);

// Rows of `records` stacked into an N x D matrix.
Matrix embedding_matrix(const EmbeddingDataset& dataset,
                        std::span<const std::size_t> records);

// Entry (r, j) = 1 iff labels[j] is among the labels of records[r].
Matrix target_matrix(const EmbeddingDataset& dataset,
                     std::span<const std::size_t> records,
                     std::span<const std::uint32_t> labels);

struct EpisodeTargets {
  Matrix train;  // train_records x n_way
  Matrix test;   // test_records x n_way
};
EpisodeTargets episode_target_matrix(const EmbeddingDataset& dataset,
                                     const Episode& episode);

enum class AugmentationMode : std::uint8_t {
  kAllCopies,       // every record of each training group
  kUnaugmentedOnly  // only the lowest record_id of each group
};

const char* to_string(AugmentationMode mode);
AugmentationMode parse_augmentation_mode(std::string_view name);

struct AugmentationOptions {
  AugmentationMode mode = AugmentationMode::kAllCopies;
  // Trivial augmentation: each training row appears 1 + trivial_repeats times.
  std::uint32_t trivial_repeats = 0;
};

// Expands a list of training records (group-complete, as produced by the
// sampler) according to `options`. Order is preserved; repeats of a row are
// adjacent.
std::vector<std::size_t> expand_training_rows(
    const EmbeddingDataset& dataset, std::span<const std::size_t> records,
    const AugmentationOptions& options);

}  // namespace mwi

#endif  // MWI_EPISODE_SAMPLER_HPP_
