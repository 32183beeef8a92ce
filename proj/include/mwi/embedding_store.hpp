#ifndef MWI_EMBEDDING_STORE_HPP_
#define MWI_EMBEDDING_STORE_HPP_

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace mwi {

// One embedding. Augmented copies of the same source image share group_id;
// the copy with the lowest record_id is the unaugmented original.
struct EmbeddingRecord {
  std::uint64_t record_id = 0;
  std::uint64_t group_id = 0;
  std::vector<float> vector;
  std::vector<std::uint32_t> labels;  // sorted, unique; may be empty

  bool has_label(std::uint32_t label) const;
  friend bool operator==(const EmbeddingRecord&, const EmbeddingRecord&) = default;
};

struct EmbeddingDataset {
  std::uint32_t dim = 0;
  std::vector<std::string> label_vocab;
  std::vector<EmbeddingRecord> records;

  std::size_t label_count() const { return label_vocab.size(); }

  // Throws DataError on the first violated structural invariant: vector
  // length, label range, duplicate record ids, sorted labels.
  void check() const;

  friend bool operator==(const EmbeddingDataset&, const EmbeddingDataset&) = default;
};

// Full validation used by the `validate` subcommand. Returns one message per
// problem (empty when the dataset is valid). Besides the structural checks it
// verifies unit norm within `norm_tolerance` and that all records of a group
// carry identical labels.
std::vector<std::string> validate(const EmbeddingDataset& dataset,
                                  double norm_tolerance = 1e-5);

// Divides by the L2 norm. Throws DegenerateInputError for an all-zero input.
std::vector<double> normalize(std::span<const double> vector);
std::vector<double> normalize(std::span<const float> vector);

// Binary ".mwie" container, little-endian:
//   "MWIE" | u16 version=1 | u32 dim | u32 label_count | u64 record_count |
//   label_count x (u16 byte length + UTF-8 name) |
//   record_count x (u64 record_id, u64 group_id, u16 n + n x u32 label,
//                   dim x f32)
inline constexpr char kDatasetMagic[4] = {'M', 'W', 'I', 'E'};
inline constexpr std::uint16_t kDatasetFormatVersion = 1;

void save_dataset(const EmbeddingDataset& dataset,
                  const std::filesystem::path& path);
EmbeddingDataset load_dataset(const std::filesystem::path& path);

std::string encode_dataset(const EmbeddingDataset& dataset);
EmbeddingDataset decode_dataset(std::string_view bytes);

// Debug export; floats written as decimals. Not an ingestion format.
std::string dataset_to_json(const EmbeddingDataset& dataset, int indent = -1);

struct SyntheticSpec {
  std::uint32_t dim = 512;
  std::uint32_t num_labels = 20;
  std::uint32_t examples_per_label = 20;
  double noise_sigma = 0.05;
  std::uint32_t max_labels_per_example = 1;
  // Extra noisy copies per record, stored in the same group. These stand in
  // for the exporter's non-trivial augmentations.
  std::uint32_t augmentations_per_example = 0;
  std::uint64_t seed = 0;

  void check() const;
};

// Unit-norm class prototypes drawn for `spec` (the first values generate_synthetic
// draws from its random stream).
std::vector<std::vector<double>> synthetic_prototypes(const SyntheticSpec& spec);

// For each label, examples_per_label groups are created whose label set
// contains that label plus 0..max_labels-1 others chosen uniformly; each vector
// is normalize(sum of prototypes + sigma * N(0, I)).
EmbeddingDataset generate_synthetic(const SyntheticSpec& spec);

}  // namespace mwi

#endif  // MWI_EMBEDDING_STORE_HPP_
