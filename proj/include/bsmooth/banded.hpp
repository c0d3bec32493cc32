#pragma once

/**
 * @file banded.hpp
 * @brief Square banded matrices, banded Cholesky and banded solves.
 *
 * Storage layout: a matrix of dimension n with bandwidth b keeps b+1
 * diagonals, each as a contiguous run of n values. Diagonal d (0 <= d <= b)
 * starts at offset d*n and its entry i holds A(i, i+d) for i < n-d; the
 * trailing d slots of that run are unused and stay zero.
 *
 * Only the upper bands are stored. The `shape` tag decides what the lower
 * triangle means:
 *   - symmetric:        A(i+d, i) == A(i, i+d)
 *   - upper_triangular: A(i+d, i) == 0 for d > 0
 */

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <limits>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "bsmooth/error.hpp"

namespace bsmooth {

enum class BandShape { symmetric, upper_triangular };

template <std::floating_point T>
class BandedMatrix {
 public:
  using value_type = T;

  BandedMatrix() = default;

  BandedMatrix(std::size_t n, std::size_t bandwidth, BandShape shape)
      : n_(n), bandwidth_(bandwidth), shape_(shape), data_((bandwidth + 1) * n, T{0}) {
    if (n == 0) {
      throw InvalidArgument("banded matrix dimension must be positive");
    }
    if (bandwidth >= n) {
      throw InvalidArgument("bandwidth " + std::to_string(bandwidth) +
                            " must be smaller than dimension " + std::to_string(n));
    }
  }

  static BandedMatrix identity(std::size_t n) {
    BandedMatrix m(n, 0, BandShape::symmetric);
    for (std::size_t i = 0; i < n; ++i) m.band(i, 0) = T{1};
    return m;
  }

  static BandedMatrix diagonal(std::span<const T> d) {
    BandedMatrix m(d.size(), 0, BandShape::symmetric);
    for (std::size_t i = 0; i < d.size(); ++i) m.band(i, 0) = d[i];
    return m;
  }

  [[nodiscard]] std::size_t size() const noexcept { return n_; }
  [[nodiscard]] std::size_t bandwidth() const noexcept { return bandwidth_; }
  [[nodiscard]] BandShape shape() const noexcept { return shape_; }
  [[nodiscard]] bool symmetric() const noexcept { return shape_ == BandShape::symmetric; }
  [[nodiscard]] std::span<const T> data() const noexcept { return data_; }

  /// Entry (i, i+d) of the upper band d. No bounds check.
  T& band(std::size_t i, std::size_t d) noexcept { return data_[d * n_ + i]; }
  [[nodiscard]] T band(std::size_t i, std::size_t d) const noexcept { return data_[d * n_ + i]; }

  /// Full-matrix element access, zero outside the band.
  [[nodiscard]] T operator()(std::size_t i, std::size_t j) const noexcept {
    if (i <= j) {
      const std::size_t d = j - i;
      return d <= bandwidth_ ? band(i, d) : T{0};
    }
    if (shape_ == BandShape::upper_triangular) return T{0};
    const std::size_t d = i - j;
    return d <= bandwidth_ ? band(j, d) : T{0};
  }

  /// Writes the upper-band entry (min(i,j), max(i,j)). Lower entries of a
  /// triangular matrix are not representable.
  void set(std::size_t i, std::size_t j, T value) {
    if (i > j) {
      if (shape_ == BandShape::upper_triangular && value != T{0}) {
        throw InvalidArgument("cannot store a lower entry in an upper-triangular matrix");
      }
      std::swap(i, j);
    }
    const std::size_t d = j - i;
    if (d > bandwidth_) {
      if (value == T{0}) return;
      throw InvalidArgument("entry lies outside the band");
    }
    band(i, d) = value;
  }

  /// Number of diagonals (counting both triangles) holding a nonzero value.
  [[nodiscard]] std::size_t nonzero_diagonals() const noexcept {
    std::size_t count = 0;
    for (std::size_t d = 0; d <= bandwidth_; ++d) {
      bool any = false;
      for (std::size_t i = 0; i + d < n_ && !any; ++i) any = band(i, d) != T{0};
      if (any) count += (d == 0 || shape_ == BandShape::upper_triangular) ? 1 : 2;
    }
    return count;
  }

  /// Row-major dense copy.
  [[nodiscard]] std::vector<T> to_dense() const {
    std::vector<T> out(n_ * n_, T{0});
    for (std::size_t i = 0; i < n_; ++i) {
      for (std::size_t j = 0; j < n_; ++j) out[i * n_ + j] = (*this)(i, j);
    }
    return out;
  }

  /// Bands a row-major dense matrix. Nonzeros outside `bandwidth` are an error;
  /// for the symmetric shape the lower triangle must mirror the upper.
  static BandedMatrix from_dense(std::span<const T> dense, std::size_t n, std::size_t bandwidth,
                                 BandShape shape) {
    if (dense.size() != n * n) throw InvalidArgument("dense matrix size mismatch");
    BandedMatrix m(n, bandwidth, shape);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        const T v = dense[i * n + j];
        const std::size_t d = i > j ? i - j : j - i;
        if (d > bandwidth) {
          if (v != T{0}) throw InvalidArgument("dense matrix has entries outside the band");
          continue;
        }
        if (i <= j) {
          m.band(i, d) = v;
        } else if (shape == BandShape::symmetric) {
          if (v != dense[j * n + i]) throw InvalidArgument("dense matrix is not symmetric");
        } else if (v != T{0}) {
          throw InvalidArgument("dense matrix is not upper triangular");
        }
      }
    }
    return m;
  }

  [[nodiscard]] T max_abs() const noexcept {
    T m{0};
    for (T v : data_) m = std::max(m, std::abs(v));
    return m;
  }

 private:
  std::size_t n_ = 0;
  std::size_t bandwidth_ = 0;
  BandShape shape_ = BandShape::symmetric;
  std::vector<T> data_;
};

enum class CholeskyPath { banded, dense };

namespace detail {

template <std::floating_point T>
T pivot_threshold(const BandedMatrix<T>& a) {
  T max_diag{0};
  for (std::size_t i = 0; i < a.size(); ++i) max_diag = std::max(max_diag, std::abs(a.band(i, 0)));
  return static_cast<T>(a.size()) * std::numeric_limits<T>::epsilon() * max_diag;
}

template <std::floating_point T>
BandedMatrix<T> dense_cholesky(const BandedMatrix<T>& a) {
  const std::size_t n = a.size();
  std::vector<T> r = a.to_dense();
  const T tol = pivot_threshold(a);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < i; ++k) r[i * n + i] -= r[k * n + i] * r[k * n + i];
    if (!(r[i * n + i] > tol)) throw NotPositiveDefinite(i);
    r[i * n + i] = std::sqrt(r[i * n + i]);
    for (std::size_t j = i + 1; j < n; ++j) {
      for (std::size_t k = 0; k < i; ++k) r[i * n + j] -= r[k * n + i] * r[k * n + j];
      r[i * n + j] /= r[i * n + i];
    }
    for (std::size_t j = 0; j < i; ++j) r[i * n + j] = T{0};
  }
  BandedMatrix<T> out(n, a.bandwidth(), BandShape::upper_triangular);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t d = 0; d <= a.bandwidth() && i + d < n; ++d) out.band(i, d) = r[i * n + i + d];
  }
  return out;
}

}  // namespace detail

/**
 * Upper-triangular R with RᵀR = A for symmetric positive definite banded A.
 *
 * Rows are processed top to bottom; within a row, columns left to right:
 *   R(i,i) = sqrt(A(i,i) - sum_{k=i-b}^{i-1} R(k,i)^2)
 *   R(i,j) = (A(i,j) - sum_{k=j-b}^{i-1} R(k,i) R(k,j)) / R(i,i),  i < j <= i+b
 * The factor keeps the bandwidth b of A. A pivot at or below
 * n * eps * max|A(i,i)| throws NotPositiveDefinite naming the row.
 */
template <std::floating_point T>
BandedMatrix<T> banded_cholesky(const BandedMatrix<T>& a, CholeskyPath path = CholeskyPath::banded) {
  if (!a.symmetric()) throw InvalidArgument("banded_cholesky requires a symmetric matrix");
  if (path == CholeskyPath::dense) return detail::dense_cholesky(a);

  const std::size_t n = a.size();
  const std::size_t b = a.bandwidth();
  const T tol = detail::pivot_threshold(a);
  BandedMatrix<T> r(n, b, BandShape::upper_triangular);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t k0 = i > b ? i - b : 0;
    T pivot = a.band(i, 0);
    for (std::size_t k = k0; k < i; ++k) {
      const T rki = r.band(k, i - k);
      pivot -= rki * rki;
    }
    if (!(pivot > tol)) throw NotPositiveDefinite(i);
    const T rii = std::sqrt(pivot);
    r.band(i, 0) = rii;
    const std::size_t jmax = std::min(n - 1, i + b);
    for (std::size_t j = i + 1; j <= jmax; ++j) {
      T s = a.band(i, j - i);
      // R(k,j) is inside the band only for k >= j-b.
      for (std::size_t k = std::max(k0, j > b ? j - b : 0); k < i; ++k) s -= r.band(k, i - k) * r.band(k, j - k);
      r.band(i, j - i) = s / rii;
    }
  }
  return r;
}

/// Solves RᵀR x = y given the upper-triangular banded factor R.
template <std::floating_point T>
std::vector<T> banded_solve(const BandedMatrix<T>& r, std::span<const T> y) {
  if (r.shape() != BandShape::upper_triangular) {
    throw InvalidArgument("banded_solve expects an upper-triangular factor");
  }
  const std::size_t n = r.size();
  const std::size_t b = r.bandwidth();
  if (y.size() != n) {
    throw InvalidArgument("right-hand side has length " + std::to_string(y.size()) +
                          ", expected " + std::to_string(n));
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (r.band(i, 0) == T{0}) throw SingularMatrix("zero diagonal at row " + std::to_string(i));
  }
  // Rᵀ z = y
  std::vector<T> x(y.begin(), y.end());
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t k0 = i > b ? i - b : 0;
    T s = x[i];
    for (std::size_t k = k0; k < i; ++k) s -= r.band(k, i - k) * x[k];
    x[i] = s / r.band(i, 0);
  }
  // R x = z
  for (std::size_t ii = n; ii-- > 0;) {
    const std::size_t jmax = std::min(n - 1, ii + b);
    T s = x[ii];
    for (std::size_t j = ii + 1; j <= jmax; ++j) s -= r.band(ii, j - ii) * x[j];
    x[ii] = s / r.band(ii, 0);
  }
  return x;
}

/**
 * Entries of A^{-1} inside the band of A = RᵀR, from the upper-triangular
 * banded factor R. With Z = A^{-1}, rows are filled bottom to top:
 *   Z(i,j) = -(1/R(i,i)) sum_{k=i+1}^{i+b} R(i,k) Z(k,j),  i < j <= i+b
 *   Z(i,i) = 1/R(i,i)^2 - (1/R(i,i)) sum_{k=i+1}^{i+b} R(i,k) Z(k,i)
 * Every Z(k,j) used lies inside the band, so the cost is O(n b^2).
 */
template <std::floating_point T>
BandedMatrix<T> banded_inverse_band(const BandedMatrix<T>& r) {
  if (r.shape() != BandShape::upper_triangular) {
    throw InvalidArgument("banded_inverse_band expects an upper-triangular factor");
  }
  const std::size_t n = r.size();
  const std::size_t b = r.bandwidth();
  BandedMatrix<T> z(n, b, BandShape::symmetric);
  auto zat = [&](std::size_t i, std::size_t j) { return i <= j ? z.band(i, j - i) : z.band(j, i - j); };
  for (std::size_t i = n; i-- > 0;) {
    const T rii = r.band(i, 0);
    if (rii == T{0}) throw SingularMatrix("zero diagonal at row " + std::to_string(i));
    const std::size_t kmax = std::min(n - 1, i + b);
    for (std::size_t j = kmax; j > i; --j) {
      T s{0};
      for (std::size_t k = i + 1; k <= kmax; ++k) s += r.band(i, k - i) * zat(k, j);
      z.band(i, j - i) = -s / rii;
    }
    T s{0};
    for (std::size_t k = i + 1; k <= kmax; ++k) s += r.band(i, k - i) * z.band(i, k - i);
    z.band(i, 0) = (T{1} / rii - s) / rii;
  }
  return z;
}

template <std::floating_point T>
std::vector<T> band_matvec(const BandedMatrix<T>& a, std::span<const T> x) {
  const std::size_t n = a.size();
  if (x.size() != n) {
    throw InvalidArgument("vector has length " + std::to_string(x.size()) + ", expected " +
                          std::to_string(n));
  }
  std::vector<T> y(n, T{0});
  for (std::size_t d = 0; d <= a.bandwidth(); ++d) {
    for (std::size_t i = 0; i + d < n; ++i) {
      const T v = a.band(i, d);
      y[i] += v * x[i + d];
      if (d > 0 && a.symmetric()) y[i + d] += v * x[i];
    }
  }
  return y;
}

/// Dense CSV, one row per line.
template <std::floating_point T>
void write_dense_csv(std::ostream& os, const BandedMatrix<T>& a) {
  const auto old_precision = os.precision(std::numeric_limits<T>::max_digits10);
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t j = 0; j < a.size(); ++j) {
      if (j) os << ',';
      os << a(i, j);
    }
    os << '\n';
  }
  os.precision(old_precision);
}

/// (row, col, value) lines for every stored nonzero; symmetric matrices list
/// both triangles.
template <std::floating_point T>
void write_triplets(std::ostream& os, const BandedMatrix<T>& a) {
  const auto old_precision = os.precision(std::numeric_limits<T>::max_digits10);
  os << "row,col,value\n";
  const std::size_t b = a.bandwidth();
  for (std::size_t i = 0; i < a.size(); ++i) {
    const std::size_t j_end = std::min(a.size(), i + b + 1);
    for (std::size_t j = i > b ? i - b : 0; j < j_end; ++j) {
      const T v = a(i, j);
      if (v != T{0}) os << i << ',' << j << ',' << v << '\n';
    }
  }
  os.precision(old_precision);
}

}  // namespace bsmooth
