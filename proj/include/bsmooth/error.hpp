#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace bsmooth {

/// Bad arguments or violated preconditions (orders, ranges, sizes).
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Base class for failures that arise during numerical work.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NotPositiveDefinite : public NumericalError {
 public:
  explicit NotPositiveDefinite(std::size_t row)
      : NumericalError("matrix is not positive definite (pivot failed at row " +
                       std::to_string(row) + ")"),
        row_(row) {}

  [[nodiscard]] std::size_t row() const noexcept { return row_; }

 private:
  std::size_t row_;
};

class SingularMatrix : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

/// The penalized normal equations are not positive definite.
class IdentifiabilityError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

/// tr(A) reached n, so a GCV-type score is undefined.
class DegenerateFit : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

}  // namespace bsmooth
