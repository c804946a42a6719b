#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace ihpe {

/// Base class of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class BoundsError : public Error {
 public:
  using Error::Error;
};

/// A pixel that was required to lie on the hand reads the background sentinel.
class BackgroundError : public Error {
 public:
  using Error::Error;
};

/// Geometry that cannot be evaluated: non-positive depth, zero-length direction, empty mask...
class DegenerateError : public Error {
 public:
  using Error::Error;
};

class EmptyTrainingError : public Error {
 public:
  using Error::Error;
};

/// Bad training or evaluation data (non-finite joints, skeleton mismatch).
class DataError : public Error {
 public:
  using Error::Error;
};

class NoHandError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

/// Malformed file content. `offset` is a byte offset for binary formats and a
/// 1-based line number for text formats (see `is_line`).
class FormatError : public Error {
 public:
  FormatError(const std::string& what, std::uint64_t offset, bool is_line = false)
      : Error(what), offset_(offset), is_line_(is_line) {}

  std::uint64_t offset() const noexcept { return offset_; }
  bool is_line() const noexcept { return is_line_; }

 private:
  std::uint64_t offset_;
  bool is_line_;
};

class VersionError : public FormatError {
 public:
  VersionError(const std::string& what, std::uint32_t found)
      : FormatError(what, 8), found_(found) {}
  std::uint32_t found() const noexcept { return found_; }

 private:
  std::uint32_t found_;
};

}  // namespace ihpe
