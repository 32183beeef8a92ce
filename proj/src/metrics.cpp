#include "mwi/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "mwi/error.hpp"

namespace mwi {

namespace {

double safe_ratio(double num, double den) { return den > 0.0 ? num / den : 0.0; }

struct CellCounts {
  double tp = 0, fp = 0, fn = 0, tn = 0;

  double precision() const { return safe_ratio(tp, tp + fp); }
  double recall() const { return safe_ratio(tp, tp + fn); }
  double f1() const { return safe_ratio(2 * tp, 2 * tp + fp + fn); }
  double accuracy() const { return safe_ratio(tp + tn, tp + fp + fn + tn); }

  void add(bool truth, bool pred) {
    if (truth && pred) ++tp;
    else if (pred) ++fp;
    else if (truth) ++fn;
    else ++tn;
  }
};

// Fraction of rows whose truth bit is among the k best-scored columns.
double top_k_accuracy(const EvalBatch& b, Eigen::Index k) {
  const Eigen::Index n = b.scores.rows();
  const Eigen::Index classes = b.scores.cols();
  k = std::min(k, classes);
  std::vector<Eigen::Index> order(static_cast<std::size_t>(classes));
  double hits = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    std::partial_sort(order.begin(), order.begin() + k, order.end(),
                      [&](Eigen::Index a, Eigen::Index c) {
                        if (b.scores(i, a) != b.scores(i, c)) {
                          return b.scores(i, a) > b.scores(i, c);
                        }
                        return a < c;
                      });
    for (Eigen::Index j = 0; j < k; ++j) {
      if (b.truth(i, order[static_cast<std::size_t>(j)])) {
        ++hits;
        break;
      }
    }
  }
  return hits / static_cast<double>(n);
}

}  // namespace

std::optional<Metric> parse_metric(std::string_view name) {
  for (std::size_t i = 0; i < kMetricCount; ++i) {
    if (kMetricNames[i] == name) return static_cast<Metric>(i);
  }
  return std::nullopt;
}

const char* to_string(EvalMode mode) {
  switch (mode) {
    case EvalMode::kSingleLabelSoftmax:
      return "single-softmax";
    case EvalMode::kSingleLabelSigmoid:
      return "single-sigmoid";
    case EvalMode::kMultiLabel:
      return "multilabel";
  }
  return "multilabel";
}

EvalMode parse_eval_mode(std::string_view name) {
  if (name == "single-softmax") return EvalMode::kSingleLabelSoftmax;
  if (name == "single-sigmoid" || name == "single") {
    return EvalMode::kSingleLabelSigmoid;
  }
  if (name == "multilabel") return EvalMode::kMultiLabel;
  throw ConfigError("unknown evaluation mode '" + std::string(name) + "'");
}

bool is_applicable(Metric metric, EvalMode mode) {
  switch (metric) {
    case Metric::kHammingScore:
    case Metric::kJaccard:
    case Metric::kSubsetAccuracy:
    case Metric::kMeanAveragePrecision:
      return mode != EvalMode::kSingleLabelSoftmax;
    case Metric::kTop1Accuracy:
    case Metric::kTop5Accuracy:
      return mode != EvalMode::kMultiLabel;
    default:
      return true;
  }
}

void EvalBatch::check() const {
  if (truth.rows() == 0 || truth.cols() == 0) {
    throw ShapeMismatchError("evaluation batch is empty");
  }
  if (scores.rows() != truth.rows() || scores.cols() != truth.cols() ||
      predictions.rows() != truth.rows() || predictions.cols() != truth.cols()) {
    throw ShapeMismatchError(
        "truth " + std::to_string(truth.rows()) + "x" +
        std::to_string(truth.cols()) + ", scores " +
        std::to_string(scores.rows()) + "x" + std::to_string(scores.cols()) +
        ", predictions " + std::to_string(predictions.rows()) + "x" +
        std::to_string(predictions.cols()));
  }
}

std::optional<double> average_precision(std::span<const double> scores,
                                        std::span<const std::uint8_t> truth) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  // Total order (score descending, then row index), so an unstable sort is
  // deterministic and avoids stable_sort's scratch buffer.
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return scores[a] > scores[b] || (scores[a] == scores[b] && a < b);
  });
  double hits = 0.0;
  double sum = 0.0;
  for (std::size_t rank = 0; rank < order.size(); ++rank) {
    if (truth[order[rank]]) {
      ++hits;
      sum += hits / static_cast<double>(rank + 1);
    }
  }
  if (hits == 0.0) return std::nullopt;
  return sum / hits;
}

MetricsReport compute_all(const EvalBatch& b, EvalMode mode) {
  b.check();
  const Eigen::Index n = b.truth.rows();
  const Eigen::Index k = b.truth.cols();
  if (mode != EvalMode::kMultiLabel) {
    for (Eigen::Index i = 0; i < n; ++i) {
      int bits = 0;
      for (Eigen::Index j = 0; j < k; ++j) bits += b.truth(i, j) ? 1 : 0;
      if (bits != 1) {
        throw DataError("single-label evaluation needs exactly one true label "
                        "per row (row " + std::to_string(i) + " has " +
                        std::to_string(bits) + ")");
      }
    }
  }

  CellCounts overall;
  std::vector<CellCounts> per_class(static_cast<std::size_t>(k));
  double jaccard_sum = 0.0;
  double exact_rows = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    double inter = 0, uni = 0;
    bool exact = true;
    for (Eigen::Index j = 0; j < k; ++j) {
      const bool t = b.truth(i, j) != 0;
      const bool p = b.predictions(i, j) != 0;
      overall.add(t, p);
      per_class[static_cast<std::size_t>(j)].add(t, p);
      inter += (t && p) ? 1 : 0;
      uni += (t || p) ? 1 : 0;
      exact = exact && (t == p);
    }
    jaccard_sum += uni > 0 ? inter / uni : 1.0;
    exact_rows += exact ? 1 : 0;
  }

  MetricsReport r;
  const double rows = static_cast<double>(n);
  const double classes = static_cast<double>(k);
  auto set = [&](Metric m, double v) {
    if (is_applicable(m, mode)) r[m] = v;
  };
  auto class_mean = [&](auto fn) {
    double s = 0.0;
    for (const auto& c : per_class) s += fn(c);
    return s / classes;
  };

  set(Metric::kHammingScore, overall.accuracy());
  set(Metric::kJaccard, jaccard_sum / rows);
  set(Metric::kSubsetAccuracy, exact_rows / rows);
  set(Metric::kOverallPrecision, overall.precision());
  set(Metric::kOverallRecall, overall.recall());
  set(Metric::kOverallF1, overall.f1());
  set(Metric::kClassPrecision, class_mean([](const CellCounts& c) { return c.precision(); }));
  set(Metric::kClassRecall, class_mean([](const CellCounts& c) { return c.recall(); }));
  set(Metric::kClassF1, class_mean([](const CellCounts& c) { return c.f1(); }));
  set(Metric::kClassAccuracy, class_mean([](const CellCounts& c) { return c.accuracy(); }));

  if (is_applicable(Metric::kMeanAveragePrecision, mode)) {
    std::vector<double> col_scores(static_cast<std::size_t>(n));
    std::vector<std::uint8_t> col_truth(static_cast<std::size_t>(n));
    double ap_sum = 0.0;
    int ap_classes = 0;
    for (Eigen::Index j = 0; j < k; ++j) {
      for (Eigen::Index i = 0; i < n; ++i) {
        col_scores[static_cast<std::size_t>(i)] = b.scores(i, j);
        col_truth[static_cast<std::size_t>(i)] = b.truth(i, j);
      }
      if (auto ap = average_precision(col_scores, col_truth)) {
        ap_sum += *ap;
        ++ap_classes;
      }
    }
    if (ap_classes > 0) r[Metric::kMeanAveragePrecision] = ap_sum / ap_classes;
  }

  if (is_applicable(Metric::kTop1Accuracy, mode)) {
    r[Metric::kTop1Accuracy] = top_k_accuracy(b, 1);
    r[Metric::kTop5Accuracy] = top_k_accuracy(b, 5);
  }
  return r;
}

double overall_f1(const BinaryMatrix& truth, const BinaryMatrix& predictions) {
  if (truth.rows() != predictions.rows() || truth.cols() != predictions.cols()) {
    throw ShapeMismatchError("truth and predictions differ in shape");
  }
  CellCounts c;
  for (Eigen::Index i = 0; i < truth.size(); ++i) {
    c.add(truth.data()[i] != 0, predictions.data()[i] != 0);
  }
  return c.f1();
}

BinaryMatrix threshold_scores(const Matrix& scores, double threshold) {
  return (scores.array() >= threshold).cast<std::uint8_t>();
}

std::vector<double> threshold_grid(double step) {
  if (!(step > 0.0 && step < 1.0)) {
    throw ConfigError("grid step must lie in (0, 1)");
  }
  std::vector<double> grid;
  const double inverse = 1.0 / step;
  const double steps = std::round(inverse);
  const bool exact = std::abs(inverse - steps) < 1e-9;
  for (int k = 1;; ++k) {
    const double t = exact ? k / steps : k * step;
    if (t >= 1.0 - 1e-12) break;
    grid.push_back(t);
  }
  return grid;
}

std::vector<double> f1_curve(const BinaryMatrix& truth, const Matrix& scores,
                             std::span<const double> grid) {
  if (truth.rows() != scores.rows() || truth.cols() != scores.cols()) {
    throw ShapeMismatchError("truth and scores differ in shape");
  }
  std::vector<double> curve;
  curve.reserve(grid.size());
  for (double t : grid) {
    CellCounts c;
    for (Eigen::Index i = 0; i < truth.size(); ++i) {
      c.add(truth.data()[i] != 0, scores.data()[i] >= t);
    }
    curve.push_back(c.f1());
  }
  return curve;
}

ThresholdChoice best_threshold(const BinaryMatrix& truth, const Matrix& scores,
                               std::span<const double> grid) {
  if (grid.empty()) throw ConfigError("threshold grid is empty");
  for (double t : grid) {
    if (!(t > 0.0 && t < 1.0)) {
      throw ConfigError("threshold grid values must lie in (0, 1)");
    }
  }
  const auto curve = f1_curve(truth, scores, grid);
  ThresholdChoice best{grid[0], curve[0]};
  for (std::size_t i = 1; i < grid.size(); ++i) {
    if (curve[i] > best.value ||
        (curve[i] == best.value && grid[i] < best.threshold)) {
      best = {grid[i], curve[i]};
    }
  }
  return best;
}

}  // namespace mwi
