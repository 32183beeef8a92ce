#ifndef MWI_CONTINUAL_EVAL_HPP_
#define MWI_CONTINUAL_EVAL_HPP_

#include <cstdint>
#include <optional>
#include <ostream>
#include <span>
#include <vector>

#include "mwi/embedding_store.hpp"
#include "mwi/episode_sampler.hpp"
#include "mwi/imprint_core.hpp"
#include "mwi/metrics.hpp"

namespace mwi {

// Experience replay memory: every training row seen so far, no eviction.
class ReplayBuffer {
 public:
  // Adds `label` to the visible set and stores its rows. Throws ConfigError if
  // the label is already visible.
  void add(std::uint32_t label, std::span<const std::size_t> rows);

  const std::vector<std::size_t>& rows() const { return rows_; }
  const std::vector<std::uint32_t>& visible_labels() const { return visible_; }
  std::size_t size() const { return rows_.size(); }

 private:
  std::vector<std::size_t> rows_;
  std::vector<std::uint32_t> visible_;
};

struct ContinualOptions {
  TrainConfig train;
  double threshold = kDefaultThreshold;
  std::vector<double> grid = threshold_grid(0.01);
  AugmentationOptions augmentation;
  // Ablation: re-imprint every visible column from the buffer before each
  // retraining instead of keeping the trained weights.
  bool reimprint_each_step = false;
  // Keep each step's evaluation batch in the trace.
  bool keep_batches = false;

  void check() const;
};

struct ContinualStep {
  std::uint32_t step = 0;  // 1-based
  std::uint32_t n_visible = 0;
  std::uint32_t added_label = 0;
  std::size_t buffer_size = 0;
  MetricsReport metrics;  // multilabel mode, at the configured threshold
  double fixed_threshold_f1 = 0.0;
  ThresholdChoice best;
  std::optional<EvalBatch> batch;
};

struct ContinualTrace {
  std::uint32_t episode = 0;
  std::vector<std::uint32_t> visible_labels;
  std::vector<ContinualStep> steps;
};

// Adds the episode's labels one at a time in sampled order. Step k imprints
// the new class from the buffered rows carrying it (a fresh classifier for
// k = 1), relabels every buffered row over the k visible labels, retrains
// for train.epochs epochs from the current weights, and evaluates the fixed
// test split restricted to the visible labels.
ContinualTrace run_continual(const EmbeddingDataset& dataset,
                             const Episode& episode,
                             const ContinualOptions& options);

// Header plus one line per step:
// step,n_visible,<13 metrics>,fixed_threshold_f1,best_threshold,best_f1
void write_trace_csv(std::ostream& out, const ContinualTrace& trace);

}  // namespace mwi

#endif  // MWI_CONTINUAL_EVAL_HPP_
