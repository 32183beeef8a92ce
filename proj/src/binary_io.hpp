// Little-endian byte packing shared by the .mwie and .mwic containers.
#ifndef MWI_SRC_BINARY_IO_HPP_
#define MWI_SRC_BINARY_IO_HPP_

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <string_view>

#include "mwi/error.hpp"

namespace mwi::detail {

class ByteWriter {
 public:
  template <typename T>
  void put(T value) {
    static_assert(std::is_integral_v<T>);
    for (std::size_t i = 0; i < sizeof(T); ++i) {
      out_.push_back(static_cast<char>(
          (static_cast<std::uint64_t>(value) >> (8 * i)) & 0xFF));
    }
  }
  void put_f32(float value) { put(std::bit_cast<std::uint32_t>(value)); }
  void put_f64(double value) { put(std::bit_cast<std::uint64_t>(value)); }
  void put_raw(std::string_view bytes) { out_.append(bytes); }

  // u16 length prefix + bytes.
  void put_string(std::string_view s, const char* what) {
    if (s.size() > UINT16_MAX) {
      throw ConfigError(std::string(what) + " longer than 65535 bytes");
    }
    put(static_cast<std::uint16_t>(s.size()));
    put_raw(s);
  }

  std::string& bytes() { return out_; }

 private:
  std::string out_;
};

class ByteReader {
 public:
  explicit ByteReader(std::string_view data) : data_(data) {}

  template <typename T>
  T get() {
    static_assert(std::is_integral_v<T>);
    require(sizeof(T));
    std::uint64_t value = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) {
      value |= static_cast<std::uint64_t>(
                   static_cast<unsigned char>(data_[pos_ + i]))
               << (8 * i);
    }
    pos_ += sizeof(T);
    return static_cast<T>(value);
  }
  float get_f32() { return std::bit_cast<float>(get<std::uint32_t>()); }
  double get_f64() { return std::bit_cast<double>(get<std::uint64_t>()); }

  std::string_view get_raw(std::size_t n) {
    require(n);
    auto view = data_.substr(pos_, n);
    pos_ += n;
    return view;
  }
  std::string get_string() {
    const auto n = get<std::uint16_t>();
    return std::string(get_raw(n));
  }

  std::size_t remaining() const { return data_.size() - pos_; }
  std::size_t position() const { return pos_; }

  void expect_end() const {
    if (remaining() != 0) {
      throw FormatError(FormatErrorCode::kTrailingBytes,
                        std::to_string(remaining()) + " unread bytes");
    }
  }

 private:
  void require(std::size_t n) const {
    if (data_.size() - pos_ < n) {
      throw FormatError(FormatErrorCode::kTruncated,
                        "needed " + std::to_string(n) + " bytes at offset " +
                            std::to_string(pos_) + ", " +
                            std::to_string(data_.size() - pos_) + " left");
    }
  }

  std::string_view data_;
  std::size_t pos_ = 0;
};

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw FormatError(FormatErrorCode::kIo, "cannot open " + path.string());
  }
  return std::string(std::istreambuf_iterator<char>(in), {});
}

inline void write_file(const std::filesystem::path& path,
                       std::string_view bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw FormatError(FormatErrorCode::kIo, "cannot write " + path.string());
  }
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) {
    throw FormatError(FormatErrorCode::kIo, "write failed: " + path.string());
  }
}

}  // namespace mwi::detail

#endif  // MWI_SRC_BINARY_IO_HPP_
