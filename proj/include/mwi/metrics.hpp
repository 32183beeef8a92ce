#ifndef MWI_METRICS_HPP_
#define MWI_METRICS_HPP_

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "mwi/types.hpp"

namespace mwi {

enum class Metric : std::size_t {
  kHammingScore,
  kJaccard,
  kSubsetAccuracy,
  kMeanAveragePrecision,
  kClassF1,
  kOverallF1,
  kClassPrecision,
  kOverallPrecision,
  kClassRecall,
  kOverallRecall,
  kTop1Accuracy,
  kTop5Accuracy,
  kClassAccuracy,
};

inline constexpr std::size_t kMetricCount = 13;

// snake_case names in enum order; used as CSV column headers.
inline constexpr std::array<std::string_view, kMetricCount> kMetricNames = {
    "hamming_score",    "jaccard",           "subset_accuracy",
    "mean_average_precision", "class_f1",    "overall_f1",
    "class_precision",  "overall_precision", "class_recall",
    "overall_recall",   "top1_accuracy",     "top5_accuracy",
    "class_accuracy"};

std::optional<Metric> parse_metric(std::string_view name);

// Which columns apply follows the usual split between softmax single-label,
// sigmoid single-label and multilabel evaluation: ranking-free set metrics
// need a thresholded decision, top-k needs exactly one true label.
enum class EvalMode : std::uint8_t {
  kSingleLabelSoftmax,
  kSingleLabelSigmoid,
  kMultiLabel,
};

const char* to_string(EvalMode mode);
EvalMode parse_eval_mode(std::string_view name);
bool is_applicable(Metric metric, EvalMode mode);

struct MetricsReport {
  std::array<std::optional<double>, kMetricCount> values;

  const std::optional<double>& operator[](Metric m) const {
    return values[static_cast<std::size_t>(m)];
  }
  std::optional<double>& operator[](Metric m) {
    return values[static_cast<std::size_t>(m)];
  }
  friend bool operator==(const MetricsReport&, const MetricsReport&) = default;
};

// truth, scores and predictions share shape N x K (N, K >= 1).
struct EvalBatch {
  BinaryMatrix truth;
  Matrix scores;
  BinaryMatrix predictions;

  void check() const;
};

// All metrics applicable in `mode`; the rest are left empty.
//   hamming_score   mean over cells of [pred == truth]
//   jaccard         mean over rows of |P & T| / |P | T|, 1 when both empty
//   subset_accuracy fraction of rows with P == T
//   overall_*       micro-averaged over all cells, 0 when a denominator is 0
//   class_*         per-class value averaged over the K classes
//   mAP             mean over classes with >= 1 positive of the average
//                   precision of rows ranked by score (ties: lower row first)
//   top-k           truth bit among the k highest scores (ties: lower index)
//   class_accuracy  mean over classes of per-class bit accuracy
MetricsReport compute_all(const EvalBatch& batch, EvalMode mode);

// Average precision of one column; nullopt when the column has no positives.
std::optional<double> average_precision(std::span<const double> scores,
                                        std::span<const std::uint8_t> truth);

// Micro F1 of thresholded predictions (score >= threshold).
double overall_f1(const BinaryMatrix& truth, const BinaryMatrix& predictions);
BinaryMatrix threshold_scores(const Matrix& scores, double threshold);

// k * step for k = 1, 2, ... while below 1. When 1/step is an integer n the
// values are exactly k / n.
std::vector<double> threshold_grid(double step = 0.01);

struct ThresholdChoice {
  double threshold = 0.0;
  double value = 0.0;  // overall F1 at that threshold
};

// Grid threshold with the highest overall F1; ties go to the lowest threshold.
ThresholdChoice best_threshold(const BinaryMatrix& truth, const Matrix& scores,
                               std::span<const double> grid);

// Overall F1 at each grid threshold, in grid order.
std::vector<double> f1_curve(const BinaryMatrix& truth, const Matrix& scores,
                             std::span<const double> grid);

}  // namespace mwi

#endif  // MWI_METRICS_HPP_
