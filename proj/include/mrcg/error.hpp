#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace mrcg {

/// Base class for every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Thrown for inputs that violate a documented invariant (NaN entries,
/// asymmetric values, nonpositive tolerances, ...).
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// File system failure outside of Matrix Market parsing.
class IoError : public Error {
 public:
  using Error::Error;
};

enum class ParseErrorKind {
  Io,
  MalformedHeader,
  UnsupportedObject,
  UnsupportedFormat,
  UnsupportedField,
  UnsupportedSymmetry,
  MalformedSize,
  MalformedEntry,
  IndexOutOfRange,
  DuplicateEntry,
  EntryCountMismatch,
};

const char* to_string(ParseErrorKind kind) noexcept;

class ParseError : public Error {
 public:
  ParseError(ParseErrorKind kind, const std::string& what)
      : Error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ParseErrorKind kind() const noexcept { return kind_; }

 private:
  ParseErrorKind kind_;
};

/// A factorization hit an exactly zero pivot. `row()` is 0-based.
class ZeroPivotError : public Error {
 public:
  explicit ZeroPivotError(std::size_t row)
      : Error("zero pivot at row " + std::to_string(row + 1) + " (1-based)"),
        row_(row) {}

  std::size_t row() const noexcept { return row_; }

 private:
  std::size_t row_;
};

/// Incomplete LDL^T could not find a usable 1x1 or 2x2 pivot.
class PivotBreakdownError : public Error {
 public:
  explicit PivotBreakdownError(std::size_t step)
      : Error("unrecoverable pivot breakdown at elimination step " +
              std::to_string(step)),
        step_(step) {}

  std::size_t step() const noexcept { return step_; }

 private:
  std::size_t step_;
};

class SingularBlockError : public Error {
 public:
  explicit SingularBlockError(std::size_t block)
      : Error("cannot positivize singular block " + std::to_string(block)),
        block_(block) {}

  std::size_t block() const noexcept { return block_; }

 private:
  std::size_t block_;
};

class SpecError : public Error {
 public:
  using Error::Error;
};

}  // namespace mrcg
