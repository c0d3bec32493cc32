#pragma once

/**
 * @file penalty.hpp
 * @brief Exact banded derivative penalties for B-spline bases.
 *
 * For f = sum_j beta_j B_j, the penalty J = int_a^b f^(m2)(x)^2 dx equals
 * betaᵀ S beta. On every knot interval f^(m2) is a polynomial of degree
 * p = m1 - m2, so it is pinned down by its values at p+1 evenly spaced points
 * and the integral of a product of two such polynomials is an exact quadratic
 * form in those values. Writing G for the map from beta to f^(m2) at all
 * (deduplicated) points and W for the summed per-interval forms,
 *
 *   S = Gᵀ W G,   RᵀR = W,   D = R G,   S = DᵀD.
 *
 * W is banded with bandwidth p and G has at most m1+1 nonzeros per row, so S
 * has bandwidth m1 and D is banded too.
 */

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "bsmooth/banded.hpp"
#include "bsmooth/bspline.hpp"
#include "bsmooth/error.hpp"
#include "bsmooth/sparse.hpp"

namespace bsmooth {

/// Basis order m1, penalized derivative m2, and p = m1 - m2.
struct PenaltySpec {
  int m1 = 3;
  int m2 = 2;

  static PenaltySpec make(int m1, int m2) {
    if (m1 < 0 || m2 < 0) throw InvalidArgument("orders must be non-negative");
    if (m2 > m1) {
      throw InvalidArgument("penalty order m2 = " + std::to_string(m2) +
                            " must satisfy m2 <= m1 = " + std::to_string(m1));
    }
    return PenaltySpec{m1, m2};
  }

  [[nodiscard]] int p() const noexcept { return m1 - m2; }
};

/// Largest p accepted; the Vandermonde system breaks down beyond it.
inline constexpr int kMaxLocalOrder = 30;
/// From this p on the Vandermonde system is noticeably ill conditioned.
inline constexpr int kIllConditionedOrder = 20;

struct LocalQuadrature {
  Eigen::MatrixXd P;       ///< P(i,j) = node_i^j, node_i = -1 + 2i/p
  Eigen::MatrixXd H;       ///< H(i,j) = int_{-1}^{1} x^{i+j} dx
  Eigen::MatrixXd Wtilde;  ///< P^{-T} H P^{-1}
  bool ill_conditioned = false;
};

/**
 * Moment and interpolation matrices for polynomials of degree p on [-1, 1].
 * With 0-based indices, P(i,j) = (-1 + 2i/p)^j so that P a = g maps monomial
 * coefficients a to values g at the nodes, and H(i,j) = (1 + (-1)^(i+j)) /
 * (i+j+1). Then gᵀ Wtilde g' is the integral over [-1, 1] of the product of
 * the two interpolating polynomials.
 */
inline LocalQuadrature local_quadrature(int p) {
  if (p < 1) throw InvalidArgument("local_quadrature needs p >= 1; p = 0 uses W = diag(h)");
  if (p > kMaxLocalOrder) {
    throw NumericalError("p = " + std::to_string(p) + " exceeds " + std::to_string(kMaxLocalOrder) +
                         ": the nodal Vandermonde system is too ill conditioned");
  }
  const Eigen::Index n = p + 1;
  LocalQuadrature lq;
  lq.P.resize(n, n);
  lq.H.resize(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double node = -1.0 + 2.0 * static_cast<double>(i) / static_cast<double>(p);
    double power = 1.0;
    for (Eigen::Index j = 0; j < n; ++j) {
      lq.P(i, j) = power;
      power *= node;
      const auto e = i + j;
      lq.H(i, j) = (e % 2 == 0) ? 2.0 / static_cast<double>(e + 1) : 0.0;
    }
  }
  const Eigen::MatrixXd p_inv = lq.P.fullPivLu().inverse();
  lq.Wtilde = p_inv.transpose() * lq.H * p_inv;
  lq.Wtilde = 0.5 * (lq.Wtilde + lq.Wtilde.transpose()).eval();
  lq.ill_conditioned = p >= kIllConditionedOrder;
  return lq;
}

/**
 * Evaluation points x' for the penalty: the centre of each interval when
 * p = 0, otherwise p+1 evenly spaced points per interval including both ends,
 * with shared ends listed once. Points are knot + fraction * h, and shared
 * ends are the knots themselves, so no tolerance is involved.
 */
inline std::vector<double> quadrature_points(const BSplineBasis& basis, const PenaltySpec& spec) {
  const auto x = basis.interior_knots();
  const std::size_t intervals = x.size() - 1;
  const int p = spec.p();
  std::vector<double> pts;
  if (p == 0) {
    pts.reserve(intervals);
    for (std::size_t q = 0; q < intervals; ++q) pts.push_back(x[q] + 0.5 * (x[q + 1] - x[q]));
    return pts;
  }
  pts.reserve(intervals * static_cast<std::size_t>(p) + 1);
  for (std::size_t q = 0; q < intervals; ++q) {
    const double h = x[q + 1] - x[q];
    pts.push_back(x[q]);
    for (int s = 1; s < p; ++s) pts.push_back(x[q] + h * static_cast<double>(s) / static_cast<double>(p));
  }
  pts.push_back(x[intervals]);
  return pts;
}

/**
 * The banded weight matrix W. For p = 0 it is diag(h). Otherwise block q
 * (0-based) adds h_q Wtilde / 2 at rows and columns q*p .. q*p + p; adjacent
 * blocks overlap in one shared endpoint.
 */
inline BandedMatrix<double> assemble_W(const BSplineBasis& basis, const PenaltySpec& spec) {
  const auto x = basis.interior_knots();
  const std::size_t intervals = x.size() - 1;
  const int p = spec.p();
  if (p == 0) {
    std::vector<double> h(intervals);
    for (std::size_t q = 0; q < intervals; ++q) h[q] = x[q + 1] - x[q];
    return BandedMatrix<double>::diagonal(h);
  }
  const auto pp = static_cast<std::size_t>(p);
  const LocalQuadrature lq = local_quadrature(p);
  BandedMatrix<double> w(intervals * pp + 1, pp, BandShape::symmetric);
  for (std::size_t q = 0; q < intervals; ++q) {
    const double half_h = 0.5 * (x[q + 1] - x[q]);
    const std::size_t off = q * pp;
    for (std::size_t i = 0; i <= pp; ++i) {
      for (std::size_t j = i; j <= pp; ++j) {
        w.band(off + i, j - i) += half_h * lq.Wtilde(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
      }
    }
  }
  return w;
}

/// S (k x k, bandwidth m1) and its banded square root D with DᵀD = S.
struct PenaltyFactor {
  BandedMatrix<double> S;
  RowSparseMatrix D;
  PenaltySpec spec;
};

namespace detail {

inline void trim_zeros(SparseRow& row) {
  std::size_t lo = 0;
  std::size_t hi = row.values.size();
  while (lo < hi && row.values[lo] == 0.0) ++lo;
  while (hi > lo && row.values[hi - 1] == 0.0) --hi;
  row.values.erase(row.values.begin() + static_cast<std::ptrdiff_t>(hi), row.values.end());
  row.values.erase(row.values.begin(), row.values.begin() + static_cast<std::ptrdiff_t>(lo));
  row.start = row.values.empty() ? 0 : row.start + lo;
}

inline void add_upper(BandedMatrix<double>& s, std::size_t i, std::size_t j, double v) {
  if (i > j) std::swap(i, j);
  if (j - i > s.bandwidth()) throw std::logic_error("penalty contribution outside the expected band");
  s.band(i, j - i) += v;
}

}  // namespace detail

inline PenaltyFactor build_penalty(const BSplineBasis& basis, const PenaltySpec& spec,
                                   CholeskyPath path = CholeskyPath::banded) {
  if (spec.m1 != basis.order()) {
    throw InvalidArgument("penalty spec order m1 = " + std::to_string(spec.m1) +
                          " does not match basis order " + std::to_string(basis.order()));
  }
  if (spec.m2 < 0 || spec.m2 > spec.m1) {
    throw InvalidArgument("penalty order must satisfy 0 <= m2 <= m1");
  }
  const std::vector<double> pts = quadrature_points(basis, spec);
  RowSparseMatrix g = design_matrix(basis, pts, spec.m2);
  for (auto& row : g.rows) detail::trim_zeros(row);

  const BandedMatrix<double> w = assemble_W(basis, spec);
  const std::size_t k = basis.size();
  const std::size_t n = pts.size();
  const std::size_t wb = w.bandwidth();

  // S = Gᵀ W G, summed over the band of W.
  BandedMatrix<double> s(k, std::min(static_cast<std::size_t>(spec.m1), k - 1), BandShape::symmetric);
  for (std::size_t r = 0; r < n; ++r) {
    const auto& gr = g.rows[r];
    for (std::size_t d = 0; d <= wb && r + d < n; ++d) {
      const double wv = w.band(r, d);
      if (wv == 0.0) continue;
      const auto& gt = g.rows[r + d];
      for (std::size_t a = 0; a < gr.values.size(); ++a) {
        const std::size_t i = gr.start + a;
        for (std::size_t c = 0; c < gt.values.size(); ++c) {
          const std::size_t j = gt.start + c;
          if (d == 0 && j < i) continue;
          const double v = wv * gr.values[a] * gt.values[c];
          // Off the diagonal of W, W(r, r+d) and W(r+d, r) both land here
          // when i == j; for i != j the mirror term is picked up by (j, i).
          detail::add_upper(s, i, j, (d > 0 && i == j) ? 2.0 * v : v);
        }
      }
    }
  }

  // D = R G with RᵀR = W.
  const BandedMatrix<double> r = banded_cholesky(w, path);
  RowSparseMatrix dmat;
  dmat.cols = k;
  dmat.rows.reserve(n);
  for (std::size_t row = 0; row < n; ++row) {
    std::size_t lo = k;
    std::size_t hi = 0;
    for (std::size_t d = 0; d <= wb && row + d < n; ++d) {
      const auto& gt = g.rows[row + d];
      if (gt.values.empty()) continue;
      lo = std::min(lo, gt.start);
      hi = std::max(hi, gt.end());
    }
    SparseRow out;
    if (lo < hi) {
      out.start = lo;
      out.values.assign(hi - lo, 0.0);
      for (std::size_t d = 0; d <= wb && row + d < n; ++d) {
        const double rv = r.band(row, d);
        const auto& gt = g.rows[row + d];
        for (std::size_t c = 0; c < gt.values.size(); ++c) out.values[gt.start + c - lo] += rv * gt.values[c];
      }
      detail::trim_zeros(out);
    }
    dmat.rows.push_back(std::move(out));
  }
  return PenaltyFactor{std::move(s), std::move(dmat), spec};
}

/// Number of eigenvalues of S at or below `rel_tol` times the largest one.
inline std::size_t null_space_dimension(const BandedMatrix<double>& s, double rel_tol = 1e-10) {
  const auto n = static_cast<Eigen::Index>(s.size());
  const std::vector<double> dense = s.to_dense();
  const Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> m(
      dense.data(), n, n);
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(m, Eigen::EigenvaluesOnly);
  const Eigen::VectorXd& ev = eig.eigenvalues();
  const double top = std::max(ev.cwiseAbs().maxCoeff(), 0.0);
  std::size_t count = 0;
  for (Eigen::Index i = 0; i < ev.size(); ++i) {
    if (ev(i) <= rel_tol * top) ++count;
  }
  return count;
}

}  // namespace bsmooth
