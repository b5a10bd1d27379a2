#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace gpcalib {

/// Base class of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// A factorization failed. `block_index` is the knot whose 9x9 pivot block
/// was not positive definite.
class NumericalFailure : public Error {
 public:
  NumericalFailure(const std::string& what, std::size_t block_index)
      : Error(what), block_index_(block_index) {}
  std::size_t block_index() const noexcept { return block_index_; }

 private:
  std::size_t block_index_;
};

/// Query time outside [first knot, last knot]. The trajectory is never
/// extrapolated.
class OutOfSupport : public Error {
 public:
  using Error::Error;
};

class InsufficientOverlap : public Error {
 public:
  InsufficientOverlap(const std::string& what, std::size_t n_overlapping)
      : Error(what), n_overlapping_(n_overlapping) {}
  std::size_t n_overlapping() const noexcept { return n_overlapping_; }

 private:
  std::size_t n_overlapping_;
};

class InsufficientCorrespondences : public Error {
 public:
  using Error::Error;
};

class DegenerateGeometry : public Error {
 public:
  using Error::Error;
};

/// Malformed input text. Line and column are 1-based; column 0 means the
/// whole line.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line, std::size_t column)
      : Error(what), line_(line), column_(column) {}
  std::size_t line() const noexcept { return line_; }
  std::size_t column() const noexcept { return column_; }

 private:
  std::size_t line_;
  std::size_t column_;
};

/// Well-formed input that violates a data invariant.
class ValidationError : public Error {
 public:
  using Error::Error;
};

}  // namespace gpcalib
