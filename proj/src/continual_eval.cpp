#include "mwi/continual_eval.hpp"

#include <algorithm>
#include <string>

#include "mwi/csv.hpp"
#include "mwi/error.hpp"

namespace mwi {

void ReplayBuffer::add(std::uint32_t label, std::span<const std::size_t> rows) {
  if (std::find(visible_.begin(), visible_.end(), label) != visible_.end()) {
    throw ConfigError("label " + std::to_string(label) + " already visible");
  }
  visible_.push_back(label);
  rows_.insert(rows_.end(), rows.begin(), rows.end());
}

void ContinualOptions::check() const {
  train.check();
  if (!(threshold > 0.0 && threshold < 1.0)) {
    throw ConfigError("threshold must lie in (0, 1)");
  }
  if (grid.empty()) throw ConfigError("threshold grid is empty");
}

ContinualTrace run_continual(const EmbeddingDataset& dataset,
                             const Episode& episode,
                             const ContinualOptions& options) {
  options.check();
  if (episode.train_by_label.size() != episode.sampled_labels.size()) {
    throw DataError("episode is missing its per-label training split");
  }
  ContinualTrace trace;
  trace.episode = episode.index;

  const Matrix test_x = embedding_matrix(dataset, episode.test_records);
  ReplayBuffer buffer;
  std::optional<ImprintClassifier> classifier;

  for (std::size_t step = 0; step < episode.sampled_labels.size(); ++step) {
    const std::uint32_t label = episode.sampled_labels[step];
    const auto arrived = expand_training_rows(
        dataset, episode.train_by_label[step], options.augmentation);
    buffer.add(label, arrived);

    // Rows in memory that carry the new label, including older rows that
    // are now relabeled with it.
    std::vector<std::size_t> label_rows;
    for (auto r : buffer.rows()) {
      if (dataset.records[r].has_label(label)) label_rows.push_back(r);
    }
    if (label_rows.empty()) {
      throw DegenerateClassError("no training rows for label " +
                                 dataset.label_vocab[label]);
    }
    const Matrix label_x = embedding_matrix(dataset, label_rows);
    if (!classifier) {
      classifier = ImprintClassifier::imprint(
          {{dataset.label_vocab[label], label_x}}, Head::kSigmoid,
          options.threshold);
    } else {
      classifier->add_class(dataset.label_vocab[label], label_x);
    }

    const auto& visible = buffer.visible_labels();
    if (options.reimprint_each_step) {
      for (std::size_t k = 0; k + 1 < visible.size(); ++k) {
        std::vector<std::size_t> rows;
        for (auto r : buffer.rows()) {
          if (dataset.records[r].has_label(visible[k])) rows.push_back(r);
        }
        classifier->reimprint_class(k, embedding_matrix(dataset, rows));
      }
    }

    const Matrix train_x = embedding_matrix(dataset, buffer.rows());
    const Matrix train_y = target_matrix(dataset, buffer.rows(), visible);
    train(*classifier, train_x, train_y, options.train);

    EvalBatch batch;
    batch.truth = target_matrix(dataset, episode.test_records, visible)
                      .cast<std::uint8_t>();
    batch.scores = classifier->scores(test_x);
    batch.predictions = classifier->decide(batch.scores);

    ContinualStep s;
    s.step = static_cast<std::uint32_t>(step + 1);
    s.n_visible = static_cast<std::uint32_t>(visible.size());
    s.added_label = label;
    s.buffer_size = buffer.size();
    s.metrics = compute_all(batch, EvalMode::kMultiLabel);
    s.fixed_threshold_f1 = *s.metrics[Metric::kOverallF1];
    s.best = best_threshold(batch.truth, batch.scores, options.grid);
    if (options.keep_batches) s.batch = std::move(batch);
    trace.steps.push_back(std::move(s));
  }
  trace.visible_labels = buffer.visible_labels();
  return trace;
}

void write_trace_csv(std::ostream& out, const ContinualTrace& trace) {
  out << "step,n_visible";
  for (auto name : kMetricNames) out << ',' << name;
  out << ",fixed_threshold_f1,best_threshold,best_f1\n";
  for (const auto& s : trace.steps) {
    out << s.step << ',' << s.n_visible;
    for (const auto& v : s.metrics.values) out << ',' << format_optional(v);
    out << ',' << format_double(s.fixed_threshold_f1) << ','
        << format_double(s.best.threshold) << ','
        << format_double(s.best.value) << '\n';
  }
}

}  // namespace mwi
