#include "mwi/embedding_store.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <unordered_set>

#include "binary_io.hpp"
#include "json.hpp"
#include "mwi/error.hpp"
#include "mwi/random.hpp"

namespace mwi {

namespace {

template <typename T>
std::vector<double> normalize_impl(std::span<const T> vector) {
  double sq = 0.0;
  for (const T v : vector) sq += static_cast<double>(v) * static_cast<double>(v);
  if (!(sq > 0.0)) {
    throw DegenerateInputError("cannot normalize a zero vector");
  }
  const double norm = std::sqrt(sq);
  std::vector<double> out(vector.size());
  for (std::size_t i = 0; i < vector.size(); ++i) {
    out[i] = static_cast<double>(vector[i]) / norm;
  }
  return out;
}

std::string record_tag(const EmbeddingRecord& r) {
  return "record " + std::to_string(r.record_id);
}

}  // namespace

bool EmbeddingRecord::has_label(std::uint32_t label) const {
  return std::binary_search(labels.begin(), labels.end(), label);
}

std::vector<double> normalize(std::span<const double> vector) {
  return normalize_impl(vector);
}

std::vector<double> normalize(std::span<const float> vector) {
  return normalize_impl(vector);
}

void EmbeddingDataset::check() const {
  if (dim == 0) throw DataError("dataset dim must be positive");
  std::unordered_set<std::uint64_t> ids;
  ids.reserve(records.size());
  for (const auto& r : records) {
    if (r.vector.size() != dim) {
      throw DimensionMismatchError(dim, r.vector.size());
    }
    if (!ids.insert(r.record_id).second) {
      throw DataError("duplicate " + record_tag(r));
    }
    for (std::size_t i = 0; i < r.labels.size(); ++i) {
      if (r.labels[i] >= label_vocab.size()) {
        throw FormatError(FormatErrorCode::kLabelOutOfRange,
                          record_tag(r) + " has label " +
                              std::to_string(r.labels[i]) + " >= " +
                              std::to_string(label_vocab.size()));
      }
      if (i > 0 && r.labels[i - 1] >= r.labels[i]) {
        throw DataError(record_tag(r) + " labels not sorted and unique");
      }
    }
  }
}

std::vector<std::string> validate(const EmbeddingDataset& dataset,
                                  double norm_tolerance) {
  std::vector<std::string> problems;
  if (dataset.dim == 0) problems.push_back("dim is zero");
  std::unordered_set<std::uint64_t> ids;
  std::map<std::uint64_t, const EmbeddingRecord*> group_label_owner;
  for (const auto& r : dataset.records) {
    if (r.vector.size() != dataset.dim) {
      problems.push_back(record_tag(r) + ": vector length " +
                         std::to_string(r.vector.size()));
      continue;
    }
    if (!ids.insert(r.record_id).second) {
      problems.push_back(record_tag(r) + ": duplicate id");
    }
    double sq = 0.0;
    for (float v : r.vector) sq += static_cast<double>(v) * v;
    const double norm = std::sqrt(sq);
    if (!(std::abs(norm - 1.0) <= norm_tolerance)) {
      problems.push_back(record_tag(r) + ": norm " + std::to_string(norm));
    }
    for (std::size_t i = 0; i < r.labels.size(); ++i) {
      if (r.labels[i] >= dataset.label_vocab.size()) {
        problems.push_back(record_tag(r) + ": label " +
                           std::to_string(r.labels[i]) + " out of range");
      } else if (i > 0 && r.labels[i - 1] >= r.labels[i]) {
        problems.push_back(record_tag(r) + ": labels not sorted/unique");
      }
    }
    auto [it, inserted] = group_label_owner.emplace(r.group_id, &r);
    if (!inserted && it->second->labels != r.labels) {
      problems.push_back(record_tag(r) + ": labels differ from group " +
                         std::to_string(r.group_id));
    }
  }
  return problems;
}

std::string encode_dataset(const EmbeddingDataset& dataset) {
  dataset.check();
  detail::ByteWriter w;
  w.put_raw(std::string_view(kDatasetMagic, 4));
  w.put(kDatasetFormatVersion);
  w.put(dataset.dim);
  w.put(static_cast<std::uint32_t>(dataset.label_vocab.size()));
  w.put(static_cast<std::uint64_t>(dataset.records.size()));
  for (const auto& name : dataset.label_vocab) w.put_string(name, "label name");
  for (const auto& r : dataset.records) {
    w.put(r.record_id);
    w.put(r.group_id);
    if (r.labels.size() > UINT16_MAX) {
      throw ConfigError(record_tag(r) + " has more than 65535 labels");
    }
    w.put(static_cast<std::uint16_t>(r.labels.size()));
    for (auto l : r.labels) w.put(l);
    for (float v : r.vector) w.put_f32(v);
  }
  return std::move(w.bytes());
}

EmbeddingDataset decode_dataset(std::string_view bytes) {
  detail::ByteReader in(bytes);
  if (bytes.size() < 4 || bytes.substr(0, 4) != std::string_view(kDatasetMagic, 4)) {
    throw FormatError(FormatErrorCode::kBadMagic, "expected \"MWIE\"");
  }
  in.get_raw(4);
  const auto version = in.get<std::uint16_t>();
  if (version != kDatasetFormatVersion) {
    throw FormatError(FormatErrorCode::kVersionMismatch,
                      "file version " + std::to_string(version) +
                          ", supported " +
                          std::to_string(kDatasetFormatVersion));
  }
  EmbeddingDataset ds;
  ds.dim = in.get<std::uint32_t>();
  if (ds.dim == 0) throw FormatError(FormatErrorCode::kDimMismatch, "dim is 0");
  const auto label_count = in.get<std::uint32_t>();
  const auto record_count = in.get<std::uint64_t>();
  ds.label_vocab.reserve(std::min<std::size_t>(label_count, in.remaining() / 2));
  for (std::uint32_t i = 0; i < label_count; ++i) {
    ds.label_vocab.push_back(in.get_string());
  }
  // Every record occupies at least 18 + 4*dim bytes; bounds the reserve so a
  // corrupt count cannot trigger a huge allocation.
  const std::size_t min_record = 18 + 4 * static_cast<std::size_t>(ds.dim);
  ds.records.reserve(std::min<std::uint64_t>(record_count, in.remaining() / min_record));
  for (std::uint64_t i = 0; i < record_count; ++i) {
    EmbeddingRecord r;
    r.record_id = in.get<std::uint64_t>();
    r.group_id = in.get<std::uint64_t>();
    const auto n = in.get<std::uint16_t>();
    r.labels.resize(n);
    for (auto& l : r.labels) {
      l = in.get<std::uint32_t>();
      if (l >= label_count) {
        throw FormatError(FormatErrorCode::kLabelOutOfRange,
                          record_tag(r) + " has label " + std::to_string(l) +
                              " >= " + std::to_string(label_count));
      }
    }
    r.vector.resize(ds.dim);
    for (auto& v : r.vector) v = in.get_f32();
    ds.records.push_back(std::move(r));
  }
  in.expect_end();
  ds.check();
  return ds;
}

void save_dataset(const EmbeddingDataset& dataset,
                  const std::filesystem::path& path) {
  detail::write_file(path, encode_dataset(dataset));
}

EmbeddingDataset load_dataset(const std::filesystem::path& path) {
  return decode_dataset(detail::read_file(path));
}

std::string dataset_to_json(const EmbeddingDataset& dataset, int indent) {
  nlohmann::ordered_json j;
  j["format"] = "mwie-debug";
  j["version"] = kDatasetFormatVersion;
  j["dim"] = dataset.dim;
  j["label_vocab"] = dataset.label_vocab;
  auto records = nlohmann::ordered_json::array();
  for (const auto& r : dataset.records) {
    nlohmann::ordered_json jr;
    jr["record_id"] = r.record_id;
    jr["group_id"] = r.group_id;
    jr["labels"] = r.labels;
    jr["vector"] = r.vector;
    records.push_back(std::move(jr));
  }
  j["records"] = std::move(records);
  return j.dump(indent);
}

void SyntheticSpec::check() const {
  if (dim < 2) throw ConfigError("synthetic dim must be >= 2");
  if (num_labels < 1) throw ConfigError("synthetic num_labels must be >= 1");
  if (examples_per_label < 1) {
    throw ConfigError("synthetic examples_per_label must be >= 1");
  }
  if (max_labels_per_example < 1) {
    throw ConfigError("synthetic max_labels_per_example must be >= 1");
  }
  if (!(noise_sigma >= 0.0) || !std::isfinite(noise_sigma)) {
    throw ConfigError("synthetic noise_sigma must be finite and >= 0");
  }
}

namespace {

std::vector<std::vector<double>> draw_prototypes(const SyntheticSpec& spec,
                                                 Rng& rng) {
  std::vector<std::vector<double>> prototypes(spec.num_labels);
  for (auto& p : prototypes) {
    std::vector<double> g(spec.dim);
    do {
      for (auto& x : g) x = rng.normal();
    } while (std::all_of(g.begin(), g.end(), [](double x) { return x == 0.0; }));
    p = normalize(std::span<const double>(g));
  }
  return prototypes;
}

std::vector<float> noisy_superposition(
    const std::vector<std::vector<double>>& prototypes,
    const std::vector<std::uint32_t>& labels, double sigma, Rng& rng) {
  const std::size_t dim = prototypes.front().size();
  std::vector<double> v(dim, 0.0);
  for (;;) {
    std::fill(v.begin(), v.end(), 0.0);
    for (auto l : labels) {
      for (std::size_t i = 0; i < dim; ++i) v[i] += prototypes[l][i];
    }
    if (sigma > 0.0) {
      for (auto& x : v) x += sigma * rng.normal();
    }
    try {
      const auto unit = normalize(std::span<const double>(v));
      return std::vector<float>(unit.begin(), unit.end());
    } catch (const DegenerateInputError&) {
      // Antipodal prototypes with zero noise; redraw noise or give up.
      if (sigma == 0.0) throw;
    }
  }
}

}  // namespace

std::vector<std::vector<double>> synthetic_prototypes(const SyntheticSpec& spec) {
  spec.check();
  Rng rng(spec.seed);
  return draw_prototypes(spec, rng);
}

EmbeddingDataset generate_synthetic(const SyntheticSpec& spec) {
  spec.check();
  Rng rng(spec.seed);
  const auto prototypes = draw_prototypes(spec, rng);

  EmbeddingDataset ds;
  ds.dim = spec.dim;
  ds.label_vocab.reserve(spec.num_labels);
  for (std::uint32_t l = 0; l < spec.num_labels; ++l) {
    ds.label_vocab.push_back("label_" + std::to_string(l));
  }

  const std::uint32_t max_labels =
      std::min(spec.max_labels_per_example, spec.num_labels);
  std::vector<std::uint32_t> others;
  std::uint64_t next_record = 0;
  std::uint64_t next_group = 0;
  for (std::uint32_t label = 0; label < spec.num_labels; ++label) {
    for (std::uint32_t e = 0; e < spec.examples_per_label; ++e) {
      const auto extra =
          static_cast<std::uint32_t>(rng.uniform_index(max_labels));
      // Partial Fisher-Yates over the other labels.
      others.clear();
      for (std::uint32_t l = 0; l < spec.num_labels; ++l) {
        if (l != label) others.push_back(l);
      }
      std::vector<std::uint32_t> labels{label};
      for (std::uint32_t k = 0; k < extra; ++k) {
        const auto j = k + rng.uniform_index(others.size() - k);
        std::swap(others[k], others[j]);
        labels.push_back(others[k]);
      }
      std::sort(labels.begin(), labels.end());

      const std::uint64_t group = next_group++;
      for (std::uint32_t copy = 0; copy <= spec.augmentations_per_example;
           ++copy) {
        EmbeddingRecord r;
        r.record_id = next_record++;
        r.group_id = group;
        r.labels = labels;
        r.vector = noisy_superposition(prototypes, labels, spec.noise_sigma, rng);
        ds.records.push_back(std::move(r));
      }
    }
  }
  return ds;
}

}  // namespace mwi
