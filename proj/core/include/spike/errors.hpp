#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace spike {

/// Base for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operand shapes do not conform.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// A configuration value is out of range or inconsistent.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Input data is missing, malformed or semantically unusable.
class DataError : public Error {
 public:
  using Error::Error;
};

/// NaN/Inf encountered where finite values are required.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Binary or text file failed to parse. Carries the byte offset of the failure.
class ParseError : public DataError {
 public:
  ParseError(const std::string& file, std::size_t offset, const std::string& what)
      : DataError(file + " @ byte " + std::to_string(offset) + ": " + what),
        file_(file),
        offset_(offset) {}

  const std::string& file() const { return file_; }
  std::size_t offset() const { return offset_; }

 private:
  std::string file_;
  std::size_t offset_;
};

}  // namespace spike
