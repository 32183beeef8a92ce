#ifndef MWI_ERROR_HPP_
#define MWI_ERROR_HPP_

#include <cstdint>
#include <stdexcept>
#include <string>

namespace mwi {

// Base of every error thrown by the library. `DataError` covers problems
// with inputs (files, datasets, degenerate vectors); `ConfigError` covers
// invalid parameters. The CLI maps them to exit codes 3 and 2.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DataError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

// A vector with zero norm was given where a direction is required.
class DegenerateInputError : public DataError {
 public:
  using DataError::DataError;
};

// The mean of a class' embeddings vanished (or the class had no examples).
class DegenerateClassError : public DataError {
 public:
  using DataError::DataError;
};

class DimensionMismatchError : public DataError {
 public:
  DimensionMismatchError(std::size_t expected, std::size_t actual)
      : DataError("dimension mismatch: expected " + std::to_string(expected) +
                  ", got " + std::to_string(actual)),
        expected_(expected),
        actual_(actual) {}

  std::size_t expected() const { return expected_; }
  std::size_t actual() const { return actual_; }

 private:
  std::size_t expected_;
  std::size_t actual_;
};

class DuplicateClassError : public DataError {
 public:
  explicit DuplicateClassError(const std::string& name)
      : DataError("class already present: " + name) {}
};

class ShapeMismatchError : public DataError {
 public:
  using DataError::DataError;
};

enum class FormatErrorCode : std::uint8_t {
  kBadMagic,
  kVersionMismatch,
  kTruncated,
  kLabelOutOfRange,
  kDimMismatch,
  kTrailingBytes,
  kIo,
};

const char* to_string(FormatErrorCode code);

class FormatError : public DataError {
 public:
  FormatError(FormatErrorCode code, const std::string& detail)
      : DataError(std::string(to_string(code)) + ": " + detail), code_(code) {}

  FormatErrorCode code() const { return code_; }

 private:
  FormatErrorCode code_;
};

class InsufficientLabelsError : public DataError {
 public:
  using DataError::DataError;
};

// A sampled label does not have enough distinct groups left.
class InsufficientExamplesError : public DataError {
 public:
  InsufficientExamplesError(std::uint32_t label, const std::string& label_name,
                            std::size_t available, std::size_t required)
      : DataError("insufficient examples for label '" + label_name + "' (#" +
                  std::to_string(label) + "): " + std::to_string(available) +
                  " groups available, " + std::to_string(required) +
                  " required"),
        label_(label),
        label_name_(label_name) {}

  std::uint32_t label() const { return label_; }
  const std::string& label_name() const { return label_name_; }

 private:
  std::uint32_t label_;
  std::string label_name_;
};

inline const char* to_string(FormatErrorCode code) {
  switch (code) {
    case FormatErrorCode::kBadMagic:
      return "bad magic";
    case FormatErrorCode::kVersionMismatch:
      return "version mismatch";
    case FormatErrorCode::kTruncated:
      return "truncated payload";
    case FormatErrorCode::kLabelOutOfRange:
      return "label index out of range";
    case FormatErrorCode::kDimMismatch:
      return "dimension mismatch";
    case FormatErrorCode::kTrailingBytes:
      return "trailing bytes";
    case FormatErrorCode::kIo:
      return "i/o error";
  }
  return "format error";
}

}  // namespace mwi

#endif  // MWI_ERROR_HPP_
