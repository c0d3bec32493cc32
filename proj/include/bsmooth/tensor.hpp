#pragma once

/**
 * @file tensor.hpp
 * @brief Tensor-product smooths built from B-spline marginals, with basis
 *        reduction for covariates that fill only part of the domain box.
 *
 * Coefficients are linearized with the LAST marginal index varying fastest,
 * which makes the per-margin penalty square roots the Kronecker products
 *
 *   D~_1 = D_1 (x) I_{k2} (x) ... (x) I_{kd},  ...,  D~_d = I_{k1} (x) ... (x) D_d
 *
 * and S_j = D~_jᵀ D~_j. Reduction drops every coefficient whose basis
 * function vanishes at all data points and, for each margin, every row of
 * D~_j with a nonzero in a dropped column. The surviving rows penalize only
 * retained coefficients, so nothing is implicitly forced to zero.
 */

#include <algorithm>
#include <cstddef>
#include <ostream>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "bsmooth/bspline.hpp"
#include "bsmooth/error.hpp"
#include "bsmooth/penalty.hpp"
#include "bsmooth/sparse.hpp"

namespace bsmooth {

/// Row-major block of d-dimensional points.
class PointSet {
 public:
  PointSet() = default;
  PointSet(std::size_t dims, std::vector<double> coords) : dims_(dims), coords_(std::move(coords)) {
    if (dims_ == 0) throw InvalidArgument("points need at least one dimension");
    if (coords_.size() % dims_ != 0) throw InvalidArgument("coordinate count is not a multiple of dims");
  }

  [[nodiscard]] std::size_t dims() const noexcept { return dims_; }
  [[nodiscard]] std::size_t size() const noexcept { return dims_ ? coords_.size() / dims_ : 0; }
  [[nodiscard]] std::span<const double> operator[](std::size_t i) const noexcept {
    return std::span<const double>(coords_).subspan(i * dims_, dims_);
  }
  [[nodiscard]] std::span<const double> coords() const noexcept { return coords_; }

 private:
  std::size_t dims_ = 0;
  std::vector<double> coords_;
};

struct Marginal {
  BSplineBasis basis;
  PenaltyFactor penalty;
};

inline Marginal make_marginal(BSplineBasis basis, int m2) {
  PenaltyFactor pf = build_penalty(basis, PenaltySpec::make(basis.order(), m2));
  return Marginal{std::move(basis), std::move(pf)};
}

class TensorSmooth {
 public:
  TensorSmooth() = default;

  explicit TensorSmooth(std::vector<Marginal> marginals) : marginals_(std::move(marginals)) {
    if (marginals_.empty()) throw InvalidArgument("a tensor smooth needs at least one marginal");
    const std::size_t d = marginals_.size();
    strides_.assign(d, 1);
    for (std::size_t j = d - 1; j-- > 0;) strides_[j] = strides_[j + 1] * marginals_[j + 1].basis.size();
    full_size_ = strides_[0] * marginals_[0].basis.size();
    retained_.resize(full_size_);
    position_.resize(full_size_);
    for (std::size_t i = 0; i < full_size_; ++i) {
      retained_[i] = i;
      position_[i] = static_cast<std::ptrdiff_t>(i);
    }
    penalty_sqrts_.reserve(d);
    for (std::size_t j = 0; j < d; ++j) penalty_sqrts_.push_back(kronecker_sqrt(j));
  }

  [[nodiscard]] std::size_t dims() const noexcept { return marginals_.size(); }
  [[nodiscard]] const std::vector<Marginal>& marginals() const noexcept { return marginals_; }
  [[nodiscard]] std::size_t full_size() const noexcept { return full_size_; }
  /// Number of retained coefficients.
  [[nodiscard]] std::size_t size() const noexcept { return retained_.size(); }
  [[nodiscard]] bool reduced() const noexcept { return retained_.size() != full_size_; }
  [[nodiscard]] std::span<const std::size_t> retained() const noexcept { return retained_; }
  [[nodiscard]] const std::vector<SparseMatrix>& penalty_sqrts() const noexcept { return penalty_sqrts_; }

  [[nodiscard]] std::vector<std::size_t> multi_index(std::size_t full) const {
    std::vector<std::size_t> idx(dims());
    for (std::size_t j = 0; j < dims(); ++j) {
      idx[j] = full / strides_[j];
      full %= strides_[j];
    }
    return idx;
  }

  /// Position of a full coefficient index among the retained ones, or -1.
  [[nodiscard]] std::ptrdiff_t position(std::size_t full) const noexcept { return position_[full]; }

  /// Products of marginal basis values at z over retained coefficients,
  /// ascending by position.
  [[nodiscard]] SparseVector row(std::span<const double> z) const {
    check_point(z);
    const std::size_t d = dims();
    std::vector<SparseRow> parts;
    parts.reserve(d);
    for (std::size_t j = 0; j < d; ++j) parts.push_back(marginals_[j].basis.eval(z[j]));

    SparseVector out;
    std::vector<std::size_t> c(d, 0);
    while (true) {
      std::size_t full = 0;
      double v = 1.0;
      for (std::size_t j = 0; j < d; ++j) {
        full += (parts[j].start + c[j]) * strides_[j];
        v *= parts[j].values[c[j]];
      }
      const std::ptrdiff_t pos = position_[full];
      if (pos >= 0) {
        out.index.push_back(static_cast<std::size_t>(pos));
        out.value.push_back(v);
      }
      std::size_t j = d;
      while (j-- > 0) {
        if (++c[j] < parts[j].values.size()) break;
        c[j] = 0;
      }
      if (j == static_cast<std::size_t>(-1)) break;
    }
    return out;
  }

  /// Design matrix over retained coefficients, one row per point.
  [[nodiscard]] SparseMatrix design(const PointSet& points) const {
    if (points.dims() != dims()) throw InvalidArgument("point dimension does not match the smooth");
    SparseMatrix x(size());
    for (std::size_t i = 0; i < points.size(); ++i) {
      SparseVector r;
      try {
        r = row(points[i]);
      } catch (const InvalidArgument& e) {
        throw InvalidArgument("point " + std::to_string(i) + ": " + e.what());
      }
      x.begin_row();
      for (std::size_t t = 0; t < r.size(); ++t) x.push(r.index[t], r.value[t]);
    }
    return x;
  }

  /**
   * Keeps the coefficients whose tensor basis function is nonzero at some data
   * point (decided from knot supports, no tolerance) and removes every penalty
   * row that touches a dropped coefficient. Reducing an already reduced smooth
   * only ever removes more.
   */
  [[nodiscard]] TensorSmooth reduce(const PointSet& data) const {
    if (data.size() == 0) throw InvalidArgument("reduce needs at least one data point");
    if (data.dims() != dims()) throw InvalidArgument("point dimension does not match the smooth");
    const std::size_t d = dims();
    std::vector<char> hit(full_size_, 0);
    std::vector<std::pair<std::size_t, std::size_t>> range(d);
    std::vector<std::size_t> c(d);
    for (std::size_t i = 0; i < data.size(); ++i) {
      const auto z = data[i];
      try {
        check_point(z);
      } catch (const InvalidArgument& e) {
        throw InvalidArgument("point " + std::to_string(i) + ": " + e.what());
      }
      bool empty = false;
      for (std::size_t j = 0; j < d; ++j) {
        range[j] = marginals_[j].basis.support(z[j]);
        c[j] = range[j].first;
        empty = empty || range[j].first > range[j].second;
      }
      if (empty) continue;
      while (true) {
        std::size_t full = 0;
        for (std::size_t j = 0; j < d; ++j) full += c[j] * strides_[j];
        hit[full] = 1;
        std::size_t j = d;
        while (j-- > 0) {
          if (++c[j] <= range[j].second) break;
          c[j] = range[j].first;
        }
        if (j == static_cast<std::size_t>(-1)) break;
      }
    }

    TensorSmooth out;
    out.marginals_ = marginals_;
    out.strides_ = strides_;
    out.full_size_ = full_size_;
    out.position_.assign(full_size_, -1);
    for (std::size_t full : retained_) {
      if (hit[full]) {
        out.position_[full] = static_cast<std::ptrdiff_t>(out.retained_.size());
        out.retained_.push_back(full);
      }
    }
    if (out.retained_.empty()) {
      throw IdentifiabilityError("no data point lies in the support of any basis function");
    }
    for (const SparseMatrix& dj : penalty_sqrts_) {
      SparseMatrix kept(out.size());
      for (std::size_t r = 0; r < dj.rows(); ++r) {
        const auto cols = dj.row_cols(r);
        const bool touches_dropped = std::any_of(cols.begin(), cols.end(), [&](std::size_t pos) {
          return out.position_[retained_[pos]] < 0;
        });
        if (touches_dropped) continue;
        kept.begin_row();
        const auto vals = dj.row_values(r);
        for (std::size_t t = 0; t < cols.size(); ++t) {
          kept.push(static_cast<std::size_t>(out.position_[retained_[cols[t]]]), vals[t]);
        }
      }
      out.penalty_sqrts_.push_back(std::move(kept));
    }
    return out;
  }

 private:
  void check_point(std::span<const double> z) const {
    if (z.size() != dims()) throw InvalidArgument("point dimension does not match the smooth");
    for (std::size_t j = 0; j < dims(); ++j) {
      const auto& b = marginals_[j].basis;
      if (!b.contains(z[j])) {
        throw InvalidArgument("coordinate " + std::to_string(z[j]) + " in dimension " + std::to_string(j) +
                              " lies outside [" + std::to_string(b.a()) + ", " + std::to_string(b.b()) + "]");
      }
    }
  }

  /// I (x) ... (x) D_j (x) ... (x) I with rows in the same last-fastest order.
  [[nodiscard]] SparseMatrix kronecker_sqrt(std::size_t j) const {
    const RowSparseMatrix& dj = marginals_[j].penalty.D;
    const std::size_t d = dims();
    std::vector<std::size_t> extent(d);
    for (std::size_t i = 0; i < d; ++i) extent[i] = i == j ? dj.row_count() : marginals_[i].basis.size();

    SparseMatrix out(full_size_);
    std::vector<std::size_t> c(d, 0);
    while (true) {
      const SparseRow& r = dj.rows[c[j]];
      std::size_t base = 0;
      for (std::size_t i = 0; i < d; ++i) {
        if (i != j) base += c[i] * strides_[i];
      }
      out.begin_row();
      for (std::size_t t = 0; t < r.values.size(); ++t) {
        if (r.values[t] != 0.0) out.push(base + (r.start + t) * strides_[j], r.values[t]);
      }
      std::size_t i = d;
      while (i-- > 0) {
        if (++c[i] < extent[i]) break;
        c[i] = 0;
      }
      if (i == static_cast<std::size_t>(-1)) break;
    }
    return out;
  }

  std::vector<Marginal> marginals_;
  std::vector<std::size_t> strides_;
  std::size_t full_size_ = 0;
  std::vector<std::size_t> retained_;
  std::vector<std::ptrdiff_t> position_;
  std::vector<SparseMatrix> penalty_sqrts_;
};

/// Header "index,i1,...,id", one line per retained coefficient.
inline void write_retained_csv(std::ostream& os, const TensorSmooth& smooth) {
  os << "index";
  for (std::size_t j = 0; j < smooth.dims(); ++j) os << ",i" << j + 1;
  os << '\n';
  for (std::size_t full : smooth.retained()) {
    os << full;
    for (std::size_t i : smooth.multi_index(full)) os << ',' << i;
    os << '\n';
  }
}

inline SparseVector tensor_row(const TensorSmooth& smooth, std::span<const double> z) { return smooth.row(z); }

inline const std::vector<SparseMatrix>& penalty_sqrts(const TensorSmooth& smooth) {
  return smooth.penalty_sqrts();
}

}  // namespace bsmooth
