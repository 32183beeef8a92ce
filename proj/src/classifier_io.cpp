#include <string>

#include "binary_io.hpp"
#include "mwi/error.hpp"
#include "mwi/imprint_core.hpp"

namespace mwi {

std::string encode_classifier(const ImprintClassifier& classifier) {
  detail::ByteWriter w;
  w.put_raw(std::string_view(kClassifierMagic, 4));
  w.put(kClassifierFormatVersion);
  w.put(static_cast<std::uint32_t>(classifier.dim()));
  w.put(static_cast<std::uint32_t>(classifier.num_classes()));
  w.put(static_cast<std::uint8_t>(classifier.head()));
  w.put_f64(classifier.threshold());
  for (const auto& name : classifier.class_names()) w.put_string(name, "class name");
  const Matrix& weights = classifier.weights();  // column-major storage
  for (Eigen::Index i = 0; i < weights.size(); ++i) w.put_f64(weights.data()[i]);
  return std::move(w.bytes());
}

ImprintClassifier decode_classifier(std::string_view bytes) {
  if (bytes.size() < 4 ||
      bytes.substr(0, 4) != std::string_view(kClassifierMagic, 4)) {
    throw FormatError(FormatErrorCode::kBadMagic, "expected \"MWIC\"");
  }
  detail::ByteReader in(bytes);
  in.get_raw(4);
  const auto version = in.get<std::uint16_t>();
  if (version != kClassifierFormatVersion) {
    throw FormatError(FormatErrorCode::kVersionMismatch,
                      "file version " + std::to_string(version));
  }
  const auto dim = in.get<std::uint32_t>();
  const auto k = in.get<std::uint32_t>();
  const auto head_code = in.get<std::uint8_t>();
  if (head_code > 1) {
    throw DataError("unknown head code " + std::to_string(head_code));
  }
  const double threshold = in.get_f64();
  if (dim == 0) throw FormatError(FormatErrorCode::kDimMismatch, "dim is 0");
  if (!(threshold > 0.0 && threshold < 1.0)) {
    throw DataError("stored threshold outside (0, 1)");
  }

  std::vector<std::string> names;
  names.reserve(std::min<std::size_t>(k, in.remaining() / 2));
  for (std::uint32_t i = 0; i < k; ++i) names.push_back(in.get_string());

  const std::uint64_t expected = static_cast<std::uint64_t>(dim) * k * 8;
  if (in.remaining() != expected) {
    throw FormatError(FormatErrorCode::kDimMismatch,
                      "weight payload has " + std::to_string(in.remaining()) +
                          " bytes, header declares " + std::to_string(dim) +
                          " x " + std::to_string(k) + " doubles");
  }
  Matrix weights(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(k));
  for (Eigen::Index i = 0; i < weights.size(); ++i) weights.data()[i] = in.get_f64();

  ImprintClassifier c(dim, static_cast<Head>(head_code), threshold);
  // Rebuild the class list with placeholder columns, then install the
  // stored weights verbatim.
  for (const auto& name : names) {
    Matrix e = Matrix::Zero(1, dim);
    e(0, 0) = 1.0;
    c.add_class(name, e);
  }
  c.set_weights(std::move(weights));
  return c;
}

void save_classifier(const ImprintClassifier& classifier,
                     const std::filesystem::path& path) {
  detail::write_file(path, encode_classifier(classifier));
}

ImprintClassifier load_classifier(const std::filesystem::path& path) {
  return decode_classifier(detail::read_file(path));
}

}  // namespace mwi
