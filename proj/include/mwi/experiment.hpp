#ifndef MWI_EXPERIMENT_HPP_
#define MWI_EXPERIMENT_HPP_

#include <array>
#include <exception>
#include <functional>
#include <cstdint>
#include <filesystem>
#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "mwi/continual_eval.hpp"
#include "mwi/error.hpp"
#include "mwi/embedding_store.hpp"
#include "mwi/episode_sampler.hpp"
#include "mwi/imprint_core.hpp"
#include "mwi/metrics.hpp"

namespace mwi {

inline constexpr std::uint32_t kDefaultEpisodes = 100;

struct ExperimentConfig {
  // Exactly one of the two dataset sources.
  std::optional<std::filesystem::path> dataset_path;
  std::optional<SyntheticSpec> synthetic;

  EpisodeSpec episodes;
  TrainConfig train;
  Head head = Head::kSigmoid;
  double threshold = kDefaultThreshold;
  double grid_step = 0.01;
  AugmentationOptions augmentation;
  std::filesystem::path output_dir;
  unsigned jobs = 1;

  void check() const;
  std::string to_json() const;
};

// Loads the file or generates the synthetic dataset.
EmbeddingDataset resolve_dataset(const ExperimentConfig& config);

// Single-label iff every record has exactly one label. Softmax on a
// multilabel dataset is a ConfigError.
EvalMode infer_eval_mode(const EmbeddingDataset& dataset, Head head);

struct EpisodeResult {
  std::uint32_t episode = 0;
  std::uint64_t seed = 0;
  MetricsReport metrics;
  ThresholdChoice best;
};

// Imprints one column per sampled label from the (augmented) training rows
// carrying it, trains for config.train.epochs, and scores the test split.
// The raw evaluation batch is stored in `batch_out` when given.
EpisodeResult evaluate_episode(const EmbeddingDataset& dataset,
                               const Episode& episode,
                               const ExperimentConfig& config, EvalMode mode,
                               EvalBatch* batch_out = nullptr);

struct MetricSummary {
  std::optional<double> mean;
  double stderr_ = 0.0;  // sample standard deviation / sqrt(n)
  std::size_t count = 0;
};

MetricSummary summarize_values(const std::vector<double>& values);

struct RunSummary {
  std::array<MetricSummary, kMetricCount> metrics;
  MetricSummary best_threshold;
  MetricSummary best_f1;
  std::size_t episodes = 0;
  double wall_seconds = 0.0;

  const MetricSummary& operator[](Metric m) const {
    return metrics[static_cast<std::size_t>(m)];
  }
};

RunSummary summarize(const std::vector<EpisodeResult>& episodes);

struct FewShotResult {
  EvalMode mode = EvalMode::kMultiLabel;
  std::vector<EpisodeResult> episodes;
  std::vector<EvalBatch> batches;  // filled only when requested
  RunSummary summary;
};

// Runs every episode of config.episodes (on config.jobs threads); results
// are ordered by episode index. Failing episodes are collected into a single
// EpisodeFailure.
FewShotResult run_fewshot(const EmbeddingDataset& dataset,
                          const ExperimentConfig& config,
                          bool keep_batches = false);
FewShotResult run_fewshot(const EmbeddingDataset& dataset,
                          const std::vector<Episode>& episodes,
                          const ExperimentConfig& config,
                          bool keep_batches = false);

class EpisodeFailure : public DataError {
 public:
  using DataError::DataError;
};

// episode,seed,<13 metrics>,best_threshold,best_f1
void write_episodes_csv(std::ostream& out, const FewShotResult& result);
// metric,mean,stderr,n   (one line per metric plus best_threshold/best_f1)
void write_summary_csv(std::ostream& out, const RunSummary& summary);
// Re-aggregates an episodes CSV written by write_episodes_csv.
RunSummary summarize_episodes_csv(std::istream& in);

// Writes config.json, episodes.csv and summary.csv into config.output_dir.
void write_fewshot_run(const ExperimentConfig& config, const FewShotResult& result);

struct AblationAxes {
  std::vector<int> epochs{0, kDefaultEpochs};
  std::vector<AugmentationMode> augmentation_modes{AugmentationMode::kAllCopies};
  std::vector<std::uint32_t> trivial_repeats{0};
  std::vector<Head> heads{Head::kSigmoid};
};

struct AblationCell {
  int epochs = 0;
  AugmentationMode augmentation_mode = AugmentationMode::kAllCopies;
  std::uint32_t trivial_repeats = 0;
  Head head = Head::kSigmoid;
  std::optional<RunSummary> summary;
  std::string error;  // set when the cell could not run (e.g. softmax on multilabel)
};

// Cartesian product of the axes over one shared list of episodes, so cells
// differ only in the ablated settings.
std::vector<AblationCell> run_ablation_grid(const EmbeddingDataset& dataset,
                                            const ExperimentConfig& config,
                                            const AblationAxes& axes);

// epochs,aug_mode,trivial_repeats,head,<metric>_mean,<metric>_stderr...,error
void write_ablation_csv(std::ostream& out, const std::vector<AblationCell>& cells);

struct ContinualStepSummary {
  std::uint32_t step = 0;
  std::uint32_t n_visible = 0;
  std::array<MetricSummary, kMetricCount> metrics;
  MetricSummary fixed_threshold_f1;
  MetricSummary best_threshold;
  MetricSummary best_f1;
};

struct ContinualRunResult {
  std::vector<ContinualTrace> traces;
  std::vector<ContinualStepSummary> steps;
};

ContinualRunResult run_continual_experiment(const EmbeddingDataset& dataset,
                                            const ExperimentConfig& config,
                                            bool reimprint_each_step = false);
ContinualRunResult run_continual_experiment(const EmbeddingDataset& dataset,
                                            const std::vector<Episode>& episodes,
                                            const ExperimentConfig& config,
                                            bool reimprint_each_step = false);

void write_continual_summary_csv(std::ostream& out,
                                 const ContinualRunResult& result);
// config.json, continual_summary.csv and traces/episode_NNNN.csv.
void write_continual_run(const ExperimentConfig& config,
                         const ContinualRunResult& result);

struct ThresholdSweepResult {
  std::vector<double> grid;
  std::vector<MetricSummary> f1_by_threshold;  // parallel to grid
  std::vector<EpisodeResult> episodes;         // per-episode best threshold
};

ThresholdSweepResult run_threshold_sweep(const EmbeddingDataset& dataset,
                                         const ExperimentConfig& config);
// threshold,mean_f1,stderr
void write_threshold_curve_csv(std::ostream& out, const ThresholdSweepResult& r);

// JSON form of an evaluation batch:
// {"mode": ..., "threshold": t, "truth": [[0,1],...], "scores": [[...],...],
//  "predictions": [[...],...]}  ("predictions" optional: derived from the
// scores by threshold, or argmax in single-softmax mode).
std::string batch_to_json(const EvalBatch& batch, EvalMode mode, double threshold);
struct ParsedBatch {
  EvalBatch batch;
  EvalMode mode = EvalMode::kMultiLabel;
  double threshold = kDefaultThreshold;
};
ParsedBatch batch_from_json(const std::string& text);

void write_report_csv(std::ostream& out, const MetricsReport& report);
void write_report_table(std::ostream& out, const MetricsReport& report);

// Runs fn(i) for i in [0, n) on up to `jobs` threads. Exceptions are
// captured per index and returned (nullptr where fn succeeded).
std::vector<std::exception_ptr> parallel_for(std::size_t n, unsigned jobs,
                                             const std::function<void(std::size_t)>& fn);

}  // namespace mwi

#endif  // MWI_EXPERIMENT_HPP_
