#ifndef MWI_IMPRINT_CORE_HPP_
#define MWI_IMPRINT_CORE_HPP_

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "mwi/types.hpp"

namespace mwi {

enum class Head : std::uint8_t { kSigmoid = 0, kSoftmax = 1 };

const char* to_string(Head head);
Head parse_head(std::string_view name);  // "sigmoid" | "softmax"

inline constexpr double kDefaultThreshold = 0.5;
inline constexpr int kDefaultEpochs = 60;

struct TrainConfig {
  int epochs = kDefaultEpochs;
  double learning_rate = 1e-3;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;
  // Project every column back to the unit sphere after each Adam step. When
  // false, columns are only normalized at imprinting time.
  bool renormalize_each_step = true;
  // Full-batch training draws no random numbers; kept so configs round-trip.
  std::uint64_t seed = 0;

  void check() const;
};

// Adam with bias correction (Kingma & Ba). Moments are zero-initialized and
// shaped like the parameters they update.
struct AdamState {
  Matrix first_moment;
  Matrix second_moment;
  std::uint64_t step = 0;

  AdamState(Eigen::Index rows, Eigen::Index cols);

  void update(Matrix& params, const Matrix& gradient, const TrainConfig& config);
};

// Examples of one class, one embedding per row.
struct ClassExamples {
  std::string name;
  Matrix embeddings;
};

// normalize(mean of rows). Throws DegenerateClassError for zero rows or a
// vanishing mean.
Vector imprint_column(const Matrix& embeddings);

// Linear layer without bias over unit-norm embeddings. Column k of the D x K
// weight matrix is the unit-norm template of class k, so logits are cosine
// similarities.
class ImprintClassifier {
 public:
  explicit ImprintClassifier(std::size_t dim, Head head = Head::kSigmoid,
                             double threshold = kDefaultThreshold);

  static ImprintClassifier imprint(const std::vector<ClassExamples>& classes,
                                   Head head = Head::kSigmoid,
                                   double threshold = kDefaultThreshold);

  // Appends one imprinted column; existing columns are untouched.
  void add_class(const std::string& name, const Matrix& embeddings);

  // Re-imprints an existing column from new examples.
  void reimprint_class(std::size_t k, const Matrix& embeddings);

  std::size_t dim() const { return dim_; }
  std::size_t num_classes() const { return class_names_.size(); }
  const std::vector<std::string>& class_names() const { return class_names_; }
  const Matrix& weights() const { return weights_; }
  Head head() const { return head_; }
  double threshold() const { return threshold_; }

  void set_head(Head head) { head_ = head; }
  void set_threshold(double threshold);
  // Replaces the weights; shape must stay D x K.
  void set_weights(Matrix weights);
  void renormalize_columns();

  Vector logits(const Vector& embedding) const;
  Matrix logits(const Matrix& embeddings) const;  // N x K

  // Sigmoid head: logistic per class. Softmax head: softmax over classes.
  Vector scores(const Vector& embedding) const;
  Matrix scores(const Matrix& embeddings) const;

  // Sigmoid head: every class whose score reaches the threshold (possibly
  // none). Softmax head: the argmax class, lowest index on ties.
  std::vector<std::size_t> predict(const Vector& embedding) const;
  BinaryMatrix predict(const Matrix& embeddings) const;
  BinaryMatrix decide(const Matrix& scores) const;

  friend bool operator==(const ImprintClassifier& a, const ImprintClassifier& b);

 private:
  void check_dim(Eigen::Index cols) const;

  std::size_t dim_;
  std::vector<std::string> class_names_;
  Matrix weights_;
  Head head_;
  double threshold_;
};

double logistic(double z);

// Mean loss over the batch: per-cell binary cross-entropy averaged over N*K
// for the sigmoid head, categorical cross-entropy averaged over N for the
// softmax head. Activations are clipped to [1e-12, 1 - 1e-12] before the log.
double loss(const ImprintClassifier& classifier, const Matrix& embeddings,
            const Matrix& targets);

// d loss / d weights (D x K), ignoring the clipping.
Matrix loss_gradient(const ImprintClassifier& classifier,
                     const Matrix& embeddings, const Matrix& targets);

struct TrainResult {
  std::vector<double> loss_trace;  // loss before each step, one per epoch
};

// Full-batch Adam for config.epochs steps. targets is N x K with 0/1 entries
// over the classifier's classes; with the softmax head each row must hold
// exactly one 1.
TrainResult train(ImprintClassifier& classifier, const Matrix& embeddings,
                  const Matrix& targets, const TrainConfig& config);

// ".mwic": "MWIC" | u16 version=1 | u32 dim | u32 K | u8 head | f64 threshold
// | K x (u16 len + UTF-8 name) | D*K f64 weights, column-major.
inline constexpr char kClassifierMagic[4] = {'M', 'W', 'I', 'C'};
inline constexpr std::uint16_t kClassifierFormatVersion = 1;

std::string encode_classifier(const ImprintClassifier& classifier);
ImprintClassifier decode_classifier(std::string_view bytes);
void save_classifier(const ImprintClassifier& classifier,
                     const std::filesystem::path& path);
ImprintClassifier load_classifier(const std::filesystem::path& path);

}  // namespace mwi

#endif  // MWI_IMPRINT_CORE_HPP_
