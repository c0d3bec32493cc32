#pragma once

/**
 * @file bspline.hpp
 * @brief B-spline bases with strictly ascending knots.
 *
 * Order convention: `order() == 3` is a cubic (polynomial degree 3). A basis
 * of dimension k carries k + order + 1 knots t_0 < ... < t_{k+order}; it is
 * evaluated on [a, b] = [t_order, t_k], which holds the k - order + 1
 * interior knots. Knots outside [a, b] continue the boundary spacing.
 *
 * Values come from the Cox-de Boor recursion
 *   B_{r,i}(x) = (x - t_i)/(t_{i+r} - t_i) B_{r-1,i}(x)
 *              + (t_{i+r+1} - x)/(t_{i+r+1} - t_{i+1}) B_{r-1,i+1}(x),
 * with B_{0,i} the indicator of [t_i, t_{i+1}). Derivatives raise the degree
 * one step at a time with
 *   D^d B_{r,i} = r [ D^{d-1}B_{r-1,i}/(t_{i+r} - t_i)
 *                   - D^{d-1}B_{r-1,i+1}/(t_{i+r+1} - t_{i+1}) ].
 * The factor is the degree r. The variant with factor (r - 1) belongs to the
 * "order = degree + 1" convention and is wrong here; the finite-difference
 * tests pin this down.
 *
 * At x = b the last interval is used, so values there are limits from the left.
 */

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "bsmooth/error.hpp"
#include "bsmooth/sparse.hpp"

namespace bsmooth {

enum class KnotPlacement { even, quantile };

class BSplineBasis {
 public:
  BSplineBasis() = default;

  /// Full knot vector of length k + order + 1.
  BSplineBasis(int order, std::vector<double> knots) : order_(order), knots_(std::move(knots)) {
    if (order_ < 0) throw InvalidArgument("spline order must be non-negative");
    const auto m = static_cast<std::size_t>(order_);
    if (knots_.size() < 2 * m + 2) {
      throw InvalidArgument("need at least " + std::to_string(2 * m + 2) + " knots for order " +
                            std::to_string(order_));
    }
    for (std::size_t i = 0; i + 1 < knots_.size(); ++i) {
      if (!std::isfinite(knots_[i]) || !(knots_[i] < knots_[i + 1])) {
        throw InvalidArgument("knots must be finite and strictly ascending (violated at index " +
                              std::to_string(i) + ")");
      }
    }
    k_ = knots_.size() - m - 1;
  }

  /// Builds the basis from its interior knots, extending the boundary spacing
  /// outwards for the `order` exterior knots on each side.
  static BSplineBasis from_interior(int order, std::span<const double> interior) {
    if (order < 0) throw InvalidArgument("spline order must be non-negative");
    if (interior.size() < 2) throw InvalidArgument("need at least two interior knots");
    const auto m = static_cast<std::size_t>(order);
    std::vector<double> knots(interior.size() + 2 * m);
    const double h_left = interior[1] - interior[0];
    const double h_right = interior[interior.size() - 1] - interior[interior.size() - 2];
    for (std::size_t i = 0; i < m; ++i) {
      knots[m - 1 - i] = interior.front() - static_cast<double>(i + 1) * h_left;
      knots[m + interior.size() + i] = interior.back() + static_cast<double>(i + 1) * h_right;
    }
    std::copy(interior.begin(), interior.end(), knots.begin() + static_cast<std::ptrdiff_t>(m));
    return BSplineBasis(order, std::move(knots));
  }

  [[nodiscard]] int order() const noexcept { return order_; }
  [[nodiscard]] std::size_t size() const noexcept { return k_; }
  [[nodiscard]] std::span<const double> knots() const noexcept { return knots_; }
  [[nodiscard]] double a() const noexcept { return knots_[static_cast<std::size_t>(order_)]; }
  [[nodiscard]] double b() const noexcept { return knots_[k_]; }

  [[nodiscard]] std::span<const double> interior_knots() const noexcept {
    const auto m = static_cast<std::size_t>(order_);
    return std::span<const double>(knots_).subspan(m, k_ - m + 1);
  }

  [[nodiscard]] bool contains(double x) const noexcept { return x >= a() && x <= b(); }

  /// Index l of the knot interval [t_l, t_{l+1}) holding x; b maps to the last one.
  [[nodiscard]] std::size_t interval(double x) const {
    check_domain(x);
    const auto m = static_cast<std::size_t>(order_);
    const auto first = knots_.begin() + static_cast<std::ptrdiff_t>(m);
    const auto last = knots_.begin() + static_cast<std::ptrdiff_t>(k_);
    const auto it = std::upper_bound(first, last, x);
    return static_cast<std::size_t>(it - knots_.begin()) - 1;
  }

  /// `deriv`-th derivative of the order() + 1 basis functions whose support
  /// covers the interval holding x. Entry c belongs to function start + c.
  [[nodiscard]] SparseRow eval(double x, int deriv = 0) const {
    if (deriv < 0) throw InvalidArgument("derivative order must be non-negative");
    if (deriv > order_) {
      throw InvalidArgument("derivative order " + std::to_string(deriv) +
                            " exceeds spline order " + std::to_string(order_));
    }
    const std::size_t l = interval(x);
    const auto m = static_cast<std::size_t>(order_);
    const auto lowest = static_cast<std::size_t>(order_ - deriv);

    // v[o] holds function l - r + o at the current degree r.
    std::vector<double> v(m + 1, 0.0);
    std::vector<double> next(m + 1, 0.0);
    v[0] = 1.0;
    for (std::size_t r = 1; r <= lowest; ++r) {
      for (std::size_t o = 0; o <= r; ++o) {
        const std::size_t i = l - r + o;
        const double lo = o >= 1 ? v[o - 1] : 0.0;  // B_{r-1,i}
        const double hi = o < r ? v[o] : 0.0;       // B_{r-1,i+1}
        double s = 0.0;
        if (lo != 0.0) s += (x - knots_[i]) / (knots_[i + r] - knots_[i]) * lo;
        if (hi != 0.0) s += (knots_[i + r + 1] - x) / (knots_[i + r + 1] - knots_[i + 1]) * hi;
        next[o] = s;
      }
      std::swap(v, next);
    }
    for (std::size_t r = lowest + 1; r <= m; ++r) {
      const auto degree = static_cast<double>(r);
      for (std::size_t o = 0; o <= r; ++o) {
        const std::size_t i = l - r + o;
        const double lo = o >= 1 ? v[o - 1] : 0.0;
        const double hi = o < r ? v[o] : 0.0;
        next[o] = degree * (lo / (knots_[i + r] - knots_[i]) -
                            hi / (knots_[i + r + 1] - knots_[i + 1]));
      }
      std::swap(v, next);
    }
    return SparseRow{l - m, std::move(v)};
  }

  /// Inclusive range of basis functions that are nonzero at x. Known from
  /// knots alone: for order >= 1 a function is positive exactly on the open
  /// interior of its support.
  [[nodiscard]] std::pair<std::size_t, std::size_t> support(double x) const {
    const std::size_t l = interval(x);
    const auto m = static_cast<std::size_t>(order_);
    std::size_t lo = l - m;
    std::size_t hi = l;
    if (m > 0) {
      if (x == knots_[l]) --hi;        // function l starts at t_l
      if (x == knots_[l + 1]) ++lo;    // only at x == b: function l-m ends there
    }
    return {lo, hi};
  }

 private:
  void check_domain(double x) const {
    if (!(x >= a() && x <= b())) {
      throw InvalidArgument("x = " + std::to_string(x) + " lies outside [" + std::to_string(a()) +
                            ", " + std::to_string(b()) + "]");
    }
  }

  int order_ = 0;
  std::size_t k_ = 0;
  std::vector<double> knots_;
};

/**
 * Basis of dimension k and given order on [a, b]. With `even` placement the
 * k - order + 1 interior knots are equally spaced. With `quantile` placement
 * the end knots are a and b and the rest sit at evenly spaced quantiles of the
 * distinct data values in [a, b].
 */
inline BSplineBasis make_basis(std::size_t k, int order, double a, double b,
                               KnotPlacement placement = KnotPlacement::even,
                               std::span<const double> data = {}) {
  if (order < 0) throw InvalidArgument("spline order must be non-negative");
  const auto m = static_cast<std::size_t>(order);
  if (k < m + 1) {
    throw InvalidArgument("basis dimension k = " + std::to_string(k) + " must be at least order + 1 = " +
                          std::to_string(m + 1));
  }
  if (!(a < b)) throw InvalidArgument("interval requires a < b");
  const std::size_t intervals = k - m;
  std::vector<double> interior(intervals + 1);
  if (placement == KnotPlacement::even) {
    for (std::size_t j = 0; j <= intervals; ++j) {
      interior[j] = a + (b - a) * static_cast<double>(j) / static_cast<double>(intervals);
    }
    interior.back() = b;
  } else {
    std::vector<double> xs;
    for (double x : data) {
      if (x >= a && x <= b) xs.push_back(x);
    }
    std::sort(xs.begin(), xs.end());
    xs.erase(std::unique(xs.begin(), xs.end()), xs.end());
    if (xs.size() < intervals + 1) {
      throw InvalidArgument("quantile placement needs at least " + std::to_string(intervals + 1) +
                            " distinct data values in [a, b], got " + std::to_string(xs.size()));
    }
    interior.front() = a;
    interior.back() = b;
    const double last = static_cast<double>(xs.size() - 1);
    for (std::size_t j = 1; j < intervals; ++j) {
      const double pos = last * static_cast<double>(j) / static_cast<double>(intervals);
      const auto lo = static_cast<std::size_t>(std::floor(pos));
      const std::size_t hi = std::min(lo + 1, xs.size() - 1);
      interior[j] = xs[lo] + (pos - static_cast<double>(lo)) * (xs[hi] - xs[lo]);
    }
    for (std::size_t j = 0; j + 1 < interior.size(); ++j) {
      if (!(interior[j] < interior[j + 1])) {
        throw InvalidArgument("quantile placement produced repeated knots; use fewer basis functions");
      }
    }
  }
  return BSplineBasis::from_interior(order, interior);
}

inline SparseRow eval_basis(const BSplineBasis& basis, double x, int deriv = 0) {
  return basis.eval(x, deriv);
}

/// Row i holds the `deriv`-th derivatives of the basis at xs[i].
inline RowSparseMatrix design_matrix(const BSplineBasis& basis, std::span<const double> xs, int deriv = 0) {
  RowSparseMatrix g;
  g.cols = basis.size();
  g.rows.reserve(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) {
    try {
      g.rows.push_back(basis.eval(xs[i], deriv));
    } catch (const InvalidArgument& e) {
      throw InvalidArgument("row " + std::to_string(i) + ": " + e.what());
    }
  }
  return g;
}

}  // namespace bsmooth
