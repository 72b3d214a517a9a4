#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace hgd {

/// Base class of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Tensor or image dimensions do not line up with what an operation expects.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// A NaN or infinity showed up where only finite values are allowed.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Bad argument outside of shape checks (ranges, empty inputs, ...).
class ArgumentError : public Error {
 public:
  using Error::Error;
};

/// Filesystem failure (missing file, unwritable directory, ...).
class IoError : public Error {
 public:
  using Error::Error;
};

/// Malformed PGM/PPM stream. `offset()` is the byte position where parsing failed.
class DecodeError : public Error {
 public:
  DecodeError(const std::string& what, std::size_t offset)
      : Error(what + " (at byte offset " + std::to_string(offset) + ")"), offset_(offset) {}
  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

class CheckpointError : public Error {
 public:
  enum class Kind { io, bad_magic, version_mismatch, bad_header, length_mismatch, truncated };

  CheckpointError(Kind kind, const std::string& what) : Error(what), kind_(kind) {}
  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

}  // namespace hgd
