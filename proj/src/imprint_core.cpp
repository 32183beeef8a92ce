#include "mwi/imprint_core.hpp"

#include <algorithm>
#include <bit>
#include <cmath>

#include "mwi/error.hpp"

namespace mwi {

namespace {

constexpr double kProbabilityFloor = 1e-12;

double clip_probability(double p) {
  return std::clamp(p, kProbabilityFloor, 1.0 - kProbabilityFloor);
}

// Row-wise softmax with max subtraction.
Matrix softmax_rows(const Matrix& logits) {
  Matrix out(logits.rows(), logits.cols());
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const double top = logits.row(i).maxCoeff();
    double total = 0.0;
    for (Eigen::Index k = 0; k < logits.cols(); ++k) {
      out(i, k) = std::exp(logits(i, k) - top);
      total += out(i, k);
    }
    out.row(i) /= total;
  }
  return out;
}

void check_training_inputs(const ImprintClassifier& c, const Matrix& x,
                           const Matrix& y) {
  if (x.rows() == 0) throw DataError("empty training set");
  if (static_cast<std::size_t>(x.cols()) != c.dim()) {
    throw DimensionMismatchError(c.dim(), static_cast<std::size_t>(x.cols()));
  }
  if (c.num_classes() == 0) throw DataError("classifier has no classes");
  if (y.rows() != x.rows() ||
      static_cast<std::size_t>(y.cols()) != c.num_classes()) {
    throw ShapeMismatchError("targets must be " + std::to_string(x.rows()) +
                             " x " + std::to_string(c.num_classes()));
  }
  if (c.head() == Head::kSoftmax) {
    for (Eigen::Index i = 0; i < y.rows(); ++i) {
      if (y.row(i).sum() != 1.0) {
        throw DataError("softmax head needs exactly one label per record (row " +
                        std::to_string(i) + ")");
      }
    }
  }
}

}  // namespace

const char* to_string(Head head) {
  return head == Head::kSoftmax ? "softmax" : "sigmoid";
}

Head parse_head(std::string_view name) {
  if (name == "sigmoid") return Head::kSigmoid;
  if (name == "softmax") return Head::kSoftmax;
  throw ConfigError("unknown head '" + std::string(name) +
                    "' (expected sigmoid or softmax)");
}

double logistic(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

void TrainConfig::check() const {
  if (epochs < 0) throw ConfigError("epochs must be >= 0");
  if (!(learning_rate > 0.0)) throw ConfigError("learning rate must be > 0");
  if (!(adam_beta1 > 0.0 && adam_beta1 < 1.0) ||
      !(adam_beta2 > 0.0 && adam_beta2 < 1.0)) {
    throw ConfigError("Adam betas must lie in (0, 1)");
  }
  if (!(adam_epsilon > 0.0)) throw ConfigError("Adam epsilon must be > 0");
}

AdamState::AdamState(Eigen::Index rows, Eigen::Index cols)
    : first_moment(Matrix::Zero(rows, cols)),
      second_moment(Matrix::Zero(rows, cols)) {}

void AdamState::update(Matrix& params, const Matrix& gradient,
                       const TrainConfig& config) {
  ++step;
  const double b1 = config.adam_beta1;
  const double b2 = config.adam_beta2;
  first_moment = b1 * first_moment + (1.0 - b1) * gradient;
  second_moment =
      b2 * second_moment + (1.0 - b2) * gradient.cwiseProduct(gradient);
  const double m_corr = 1.0 - std::pow(b1, static_cast<double>(step));
  const double v_corr = 1.0 - std::pow(b2, static_cast<double>(step));
  params.array() -=
      config.learning_rate * (first_moment.array() / m_corr) /
      ((second_moment.array() / v_corr).sqrt() + config.adam_epsilon);
}

Vector imprint_column(const Matrix& embeddings) {
  if (embeddings.rows() == 0) {
    throw DegenerateClassError("cannot imprint a class without examples");
  }
  Vector mean = embeddings.colwise().mean().transpose();
  const double norm = mean.norm();
  if (!(norm > 0.0) || !std::isfinite(norm)) {
    throw DegenerateClassError("class mean embedding has zero norm");
  }
  return mean / norm;
}

ImprintClassifier::ImprintClassifier(std::size_t dim, Head head,
                                     double threshold)
    : dim_(dim), weights_(static_cast<Eigen::Index>(dim), 0), head_(head) {
  if (dim == 0) throw ConfigError("classifier dim must be positive");
  set_threshold(threshold);
}

ImprintClassifier ImprintClassifier::imprint(
    const std::vector<ClassExamples>& classes, Head head, double threshold) {
  if (classes.empty()) throw DegenerateClassError("no classes to imprint");
  ImprintClassifier c(static_cast<std::size_t>(classes.front().embeddings.cols()),
                      head, threshold);
  for (const auto& cls : classes) c.add_class(cls.name, cls.embeddings);
  return c;
}

void ImprintClassifier::check_dim(Eigen::Index cols) const {
  if (static_cast<std::size_t>(cols) != dim_) {
    throw DimensionMismatchError(dim_, static_cast<std::size_t>(cols));
  }
}

void ImprintClassifier::add_class(const std::string& name,
                                  const Matrix& embeddings) {
  if (std::find(class_names_.begin(), class_names_.end(), name) !=
      class_names_.end()) {
    throw DuplicateClassError(name);
  }
  check_dim(embeddings.cols());
  const Vector column = imprint_column(embeddings);
  // conservativeResize keeps the existing column-major block in place.
  weights_.conservativeResize(Eigen::NoChange, weights_.cols() + 1);
  weights_.col(weights_.cols() - 1) = column;
  class_names_.push_back(name);
}

void ImprintClassifier::reimprint_class(std::size_t k, const Matrix& embeddings) {
  if (k >= num_classes()) throw ConfigError("class index out of range");
  check_dim(embeddings.cols());
  weights_.col(static_cast<Eigen::Index>(k)) = imprint_column(embeddings);
}

void ImprintClassifier::set_threshold(double threshold) {
  if (!(threshold > 0.0 && threshold < 1.0)) {
    throw ConfigError("threshold must lie in (0, 1)");
  }
  threshold_ = threshold;
}

void ImprintClassifier::set_weights(Matrix weights) {
  if (weights.rows() != weights_.rows() || weights.cols() != weights_.cols()) {
    throw ShapeMismatchError("weights must keep shape " +
                             std::to_string(weights_.rows()) + " x " +
                             std::to_string(weights_.cols()));
  }
  weights_ = std::move(weights);
}

void ImprintClassifier::renormalize_columns() {
  for (Eigen::Index k = 0; k < weights_.cols(); ++k) {
    const double norm = weights_.col(k).norm();
    if (!(norm > 0.0) || !std::isfinite(norm)) {
      throw DegenerateClassError("weight column " + std::to_string(k) +
                                 " collapsed to zero");
    }
    weights_.col(k) /= norm;
  }
}

Vector ImprintClassifier::logits(const Vector& embedding) const {
  check_dim(embedding.size());
  return weights_.transpose() * embedding;
}

Matrix ImprintClassifier::logits(const Matrix& embeddings) const {
  check_dim(embeddings.cols());
  return embeddings * weights_;
}

Vector ImprintClassifier::scores(const Vector& embedding) const {
  Matrix row = logits(embedding).transpose();
  if (head_ == Head::kSoftmax) return softmax_rows(row).transpose();
  return row.unaryExpr(&logistic).transpose();
}

Matrix ImprintClassifier::scores(const Matrix& embeddings) const {
  Matrix z = logits(embeddings);
  if (head_ == Head::kSoftmax) return softmax_rows(z);
  return z.unaryExpr(&logistic);
}

BinaryMatrix ImprintClassifier::decide(const Matrix& scores) const {
  BinaryMatrix out = BinaryMatrix::Zero(scores.rows(), scores.cols());
  for (Eigen::Index i = 0; i < scores.rows(); ++i) {
    if (head_ == Head::kSoftmax) {
      if (scores.cols() == 0) continue;
      Eigen::Index best = 0;
      for (Eigen::Index k = 1; k < scores.cols(); ++k) {
        if (scores(i, k) > scores(i, best)) best = k;
      }
      out(i, best) = 1;
    } else {
      for (Eigen::Index k = 0; k < scores.cols(); ++k) {
        out(i, k) = scores(i, k) >= threshold_ ? 1 : 0;
      }
    }
  }
  return out;
}

BinaryMatrix ImprintClassifier::predict(const Matrix& embeddings) const {
  if (head_ == Head::kSoftmax) {
    // Argmax on logits: softmax is monotone and exp may merge close values.
    return decide(logits(embeddings));
  }
  return decide(scores(embeddings));
}

std::vector<std::size_t> ImprintClassifier::predict(const Vector& embedding) const {
  const BinaryMatrix row = predict(Matrix(embedding.transpose()));
  std::vector<std::size_t> labels;
  for (Eigen::Index k = 0; k < row.cols(); ++k) {
    if (row(0, k)) labels.push_back(static_cast<std::size_t>(k));
  }
  return labels;
}

bool operator==(const ImprintClassifier& a, const ImprintClassifier& b) {
  return a.dim_ == b.dim_ && a.class_names_ == b.class_names_ &&
         a.head_ == b.head_ && a.threshold_ == b.threshold_ &&
         a.weights_.rows() == b.weights_.rows() &&
         a.weights_.cols() == b.weights_.cols() &&
         std::equal(a.weights_.data(), a.weights_.data() + a.weights_.size(),
                    b.weights_.data(),
                    [](double x, double y) {
                      return std::bit_cast<std::uint64_t>(x) ==
                             std::bit_cast<std::uint64_t>(y);
                    });
}

double loss(const ImprintClassifier& classifier, const Matrix& embeddings,
            const Matrix& targets) {
  check_training_inputs(classifier, embeddings, targets);
  const Matrix s = classifier.scores(embeddings);
  double total = 0.0;
  if (classifier.head() == Head::kSoftmax) {
    for (Eigen::Index i = 0; i < s.rows(); ++i) {
      for (Eigen::Index k = 0; k < s.cols(); ++k) {
        if (targets(i, k) > 0.0) total -= std::log(clip_probability(s(i, k)));
      }
    }
    return total / static_cast<double>(s.rows());
  }
  for (Eigen::Index i = 0; i < s.rows(); ++i) {
    for (Eigen::Index k = 0; k < s.cols(); ++k) {
      const double p = clip_probability(s(i, k));
      const double y = targets(i, k);
      total -= y * std::log(p) + (1.0 - y) * std::log(1.0 - p);
    }
  }
  return total / static_cast<double>(s.size());
}

Matrix loss_gradient(const ImprintClassifier& classifier,
                     const Matrix& embeddings, const Matrix& targets) {
  check_training_inputs(classifier, embeddings, targets);
  const Matrix residual = classifier.scores(embeddings) - targets;
  const double scale =
      classifier.head() == Head::kSoftmax
          ? 1.0 / static_cast<double>(embeddings.rows())
          : 1.0 / static_cast<double>(residual.size());
  return scale * (embeddings.transpose() * residual);
}

TrainResult train(ImprintClassifier& classifier, const Matrix& embeddings,
                  const Matrix& targets, const TrainConfig& config) {
  config.check();
  check_training_inputs(classifier, embeddings, targets);
  TrainResult result;
  result.loss_trace.reserve(static_cast<std::size_t>(config.epochs));
  Matrix weights = classifier.weights();
  AdamState adam(weights.rows(), weights.cols());
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    result.loss_trace.push_back(loss(classifier, embeddings, targets));
    const Matrix gradient = loss_gradient(classifier, embeddings, targets);
    adam.update(weights, gradient, config);
    classifier.set_weights(weights);
    if (config.renormalize_each_step) {
      classifier.renormalize_columns();
      weights = classifier.weights();
    }
  }
  return result;
}

}  // namespace mwi
