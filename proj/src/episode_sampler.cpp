#include "mwi/episode_sampler.hpp"

#include <algorithm>
#include <string>
#include <unordered_map>

#include "mwi/error.hpp"
#include "mwi/random.hpp"

namespace mwi {

void EpisodeSpec::check() const {
  if (n_way < 2) throw ConfigError("n_way must be >= 2");
  if (n_shot < 1) throw ConfigError("n_shot must be >= 1");
  if (n_test < 1) throw ConfigError("n_test must be >= 1");
  if (n_episodes < 1) throw ConfigError("n_episodes must be >= 1");
}

EpisodeSampler::EpisodeSampler(const EmbeddingDataset& dataset)
    : dataset_(&dataset), label_groups_(dataset.label_count()) {
  std::unordered_map<std::uint64_t, std::size_t> dense;
  std::vector<std::uint64_t> group_ids;
  for (std::size_t i = 0; i < dataset.records.size(); ++i) {
    const auto g = dataset.records[i].group_id;
    auto [it, inserted] = dense.emplace(g, group_ids.size());
    if (inserted) {
      group_ids.push_back(g);
      group_records_.emplace_back();
    }
    group_records_[it->second].push_back(i);
  }
  // Dense group order follows ascending group_id so sampling does not depend
  // on record order in the file.
  std::vector<std::size_t> order(group_ids.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return group_ids[a] < group_ids[b];
  });
  std::vector<std::vector<std::size_t>> sorted_groups;
  sorted_groups.reserve(order.size());
  for (auto g : order) sorted_groups.push_back(std::move(group_records_[g]));
  group_records_ = std::move(sorted_groups);

  for (std::size_t g = 0; g < group_records_.size(); ++g) {
    auto& members = group_records_[g];
    std::sort(members.begin(), members.end(), [&](std::size_t a, std::size_t b) {
      return dataset.records[a].record_id < dataset.records[b].record_id;
    });
    // Group labels are those of the designated (unaugmented) copy.
    for (auto l : dataset.records[members.front()].labels) {
      label_groups_[l].push_back(g);
    }
  }
  for (std::uint32_t l = 0; l < label_groups_.size(); ++l) {
    if (!label_groups_[l].empty()) labels_.push_back(l);
  }
}

void EpisodeSampler::check(const EpisodeSpec& spec) const {
  spec.check();
  if (labels_.size() < spec.n_way) {
    throw InsufficientLabelsError(
        "dataset has " + std::to_string(labels_.size()) +
        " labels with examples, episode needs " + std::to_string(spec.n_way));
  }
  const std::size_t needed = std::size_t{spec.n_shot} + spec.n_test;
  for (auto l : labels_) {
    if (label_groups_[l].size() < needed) {
      throw InsufficientExamplesError(l, dataset_->label_vocab[l],
                                      label_groups_[l].size(), needed);
    }
  }
}

Episode EpisodeSampler::sample(const EpisodeSpec& spec,
                               std::uint32_t episode_index) const {
  check(spec);
  Episode ep;
  ep.index = episode_index;
  ep.seed = mix_seed(spec.seed, episode_index);
  Rng rng(ep.seed);

  // Uniform n_way labels without replacement, in draw order.
  std::vector<std::uint32_t> pool = labels_;
  for (std::uint32_t k = 0; k < spec.n_way; ++k) {
    const auto j = k + rng.uniform_index(pool.size() - k);
    std::swap(pool[k], pool[j]);
    ep.sampled_labels.push_back(pool[k]);
  }

  std::vector<bool> taken(group_records_.size(), false);
  std::vector<std::size_t> available;
  auto draw = [&](std::uint32_t label, std::size_t count) {
    available.clear();
    for (auto g : label_groups_[label]) {
      if (!taken[g]) available.push_back(g);
    }
    if (available.size() < count) {
      throw InsufficientExamplesError(label, dataset_->label_vocab[label],
                                      available.size(), count);
    }
    std::vector<std::size_t> chosen;
    chosen.reserve(count);
    for (std::size_t k = 0; k < count; ++k) {
      const auto j = k + rng.uniform_index(available.size() - k);
      std::swap(available[k], available[j]);
      chosen.push_back(available[k]);
      taken[available[k]] = true;
    }
    return chosen;
  };

  for (auto label : ep.sampled_labels) {
    auto& shots = ep.train_by_label.emplace_back();
    for (auto g : draw(label, spec.n_shot)) {
      for (auto r : group_records_[g]) shots.push_back(r);
    }
    ep.train_records.insert(ep.train_records.end(), shots.begin(), shots.end());
    for (auto g : draw(label, spec.n_test)) {
      ep.test_records.push_back(group_records_[g].front());
    }
  }
  return ep;
}

std::vector<Episode> EpisodeSampler::sample_all(const EpisodeSpec& spec) const {
  check(spec);
  std::vector<Episode> episodes;
  episodes.reserve(spec.n_episodes);
  for (std::uint32_t i = 0; i < spec.n_episodes; ++i) {
    episodes.push_back(sample(spec, i));
  }
  return episodes;
}

std::vector<Episode> sample_episodes(const EmbeddingDataset& dataset,
                                     const EpisodeSpec& spec) {
  return EpisodeSampler(dataset).sample_all(spec);
}

Matrix embedding_matrix(const EmbeddingDataset& dataset,
                        std::span<const std::size_t> records) {
  Matrix out(static_cast<Eigen::Index>(records.size()),
             static_cast<Eigen::Index>(dataset.dim));
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& v = dataset.records.at(records[i]).vector;
    for (std::size_t d = 0; d < v.size(); ++d) {
      out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(d)) = v[d];
    }
  }
  return out;
}

Matrix target_matrix(const EmbeddingDataset& dataset,
                     std::span<const std::size_t> records,
                     std::span<const std::uint32_t> labels) {
  Matrix out = Matrix::Zero(static_cast<Eigen::Index>(records.size()),
                            static_cast<Eigen::Index>(labels.size()));
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& rec = dataset.records.at(records[i]);
    for (std::size_t j = 0; j < labels.size(); ++j) {
      if (rec.has_label(labels[j])) {
        out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = 1.0;
      }
    }
  }
  return out;
}

EpisodeTargets episode_target_matrix(const EmbeddingDataset& dataset,
                                     const Episode& episode) {
  return {target_matrix(dataset, episode.train_records, episode.sampled_labels),
          target_matrix(dataset, episode.test_records, episode.sampled_labels)};
}

const char* to_string(AugmentationMode mode) {
  return mode == AugmentationMode::kUnaugmentedOnly ? "unaugmented" : "all";
}

AugmentationMode parse_augmentation_mode(std::string_view name) {
  if (name == "all") return AugmentationMode::kAllCopies;
  if (name == "unaugmented") return AugmentationMode::kUnaugmentedOnly;
  throw ConfigError("unknown augmentation mode '" + std::string(name) +
                    "' (expected all or unaugmented)");
}

std::vector<std::size_t> expand_training_rows(
    const EmbeddingDataset& dataset, std::span<const std::size_t> records,
    const AugmentationOptions& options) {
  std::vector<std::size_t> rows;
  rows.reserve(records.size() * (std::size_t{options.trivial_repeats} + 1));
  // Lowest record_id seen per group among the given records.
  std::unordered_map<std::uint64_t, std::uint64_t> original;
  if (options.mode == AugmentationMode::kUnaugmentedOnly) {
    for (auto r : records) {
      const auto& rec = dataset.records.at(r);
      auto [it, inserted] = original.emplace(rec.group_id, rec.record_id);
      if (!inserted) it->second = std::min(it->second, rec.record_id);
    }
  }
  for (auto r : records) {
    const auto& rec = dataset.records.at(r);
    if (options.mode == AugmentationMode::kUnaugmentedOnly &&
        original.at(rec.group_id) != rec.record_id) {
      continue;
    }
    for (std::uint32_t k = 0; k <= options.trivial_repeats; ++k) rows.push_back(r);
  }
  return rows;
}

}  // namespace mwi
