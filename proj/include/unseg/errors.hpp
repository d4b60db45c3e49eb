#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace unseg {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

class ShapeMismatch : public Error {
 public:
  using Error::Error;
};

class DimensionMismatch : public Error {
 public:
  using Error::Error;
};

class ZeroFeatureRow : public Error {
 public:
  explicit ZeroFeatureRow(std::size_t row)
      : Error("feature row " + std::to_string(row) + " has (near-)zero norm"), row_(row) {}
  std::size_t row() const noexcept { return row_; }

 private:
  std::size_t row_;
};

/// The similarity threshold removed every edge.
class EmptyGraph : public Error {
 public:
  using Error::Error;
};

/// Training produced a non-finite loss.
class DivergedLoss : public Error {
 public:
  DivergedLoss(int epoch, double value)
      : Error("loss became non-finite (" + std::to_string(value) + ") at epoch " +
              std::to_string(epoch)),
        epoch_(epoch) {}
  int epoch() const noexcept { return epoch_; }

 private:
  int epoch_;
};

// Feature-file parse errors carry the byte offset where parsing failed.
class FormatError : public Error {
 public:
  FormatError(const std::string& what, std::uint64_t offset)
      : Error(what + " (at byte offset " + std::to_string(offset) + ")"), offset_(offset) {}
  std::uint64_t offset() const noexcept { return offset_; }

 private:
  std::uint64_t offset_;
};

class BadMagic : public FormatError {
 public:
  using FormatError::FormatError;
};

class BadVersion : public FormatError {
 public:
  using FormatError::FormatError;
};

class InvalidHeader : public FormatError {
 public:
  using FormatError::FormatError;
};

class TruncatedPayload : public FormatError {
 public:
  TruncatedPayload(const std::string& prefix, std::uint64_t offset, std::uint64_t expected,
                   std::uint64_t actual)
      : FormatError(prefix + "truncated payload: expected " + std::to_string(expected) +
                        " payload bytes, found " + std::to_string(actual),
                    offset),
        expected_(expected),
        actual_(actual) {}
  std::uint64_t expected_bytes() const noexcept { return expected_; }
  std::uint64_t actual_bytes() const noexcept { return actual_; }

 private:
  std::uint64_t expected_;
  std::uint64_t actual_;
};

class TrailingData : public FormatError {
 public:
  using FormatError::FormatError;
};

class NonFinitePayload : public FormatError {
 public:
  using FormatError::FormatError;
};

class UnsupportedFormat : public Error {
 public:
  using Error::Error;
};

class CorruptImage : public Error {
 public:
  using Error::Error;
};

class EmptyDataset : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace unseg
