#pragma once

/**
 * @file penalty_oracle.hpp
 * @brief Brute-force penalty matrix by Gauss-Legendre quadrature.
 *
 * Computes S(i,j) = int_a^b B_i^(m2)(x) B_j^(m2)(x) dx interval by interval.
 * It shares only basis evaluation with build_penalty and none of the
 * P / H / W machinery, so it serves as an independent check.
 */

#include <cmath>
#include <cstddef>
#include <numbers>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "bsmooth/bspline.hpp"
#include "bsmooth/penalty.hpp"

namespace bsmooth {

struct GaussRule {
  std::vector<double> nodes;    ///< on [-1, 1], ascending
  std::vector<double> weights;
};

/// n-point Gauss-Legendre rule by Newton iteration on P_n; exact for
/// polynomials of degree <= 2n - 1.
inline GaussRule gauss_legendre(std::size_t n) {
  if (n == 0) throw InvalidArgument("Gauss-Legendre rule needs at least one node");
  GaussRule rule;
  rule.nodes.resize(n);
  rule.weights.resize(n);
  const auto nd = static_cast<double>(n);
  for (std::size_t i = 0; i < (n + 1) / 2; ++i) {
    double x = std::cos(std::numbers::pi * (static_cast<double>(i) + 0.75) / (nd + 0.5));
    double dp = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      double p0 = 1.0;
      double p1 = x;
      for (std::size_t j = 2; j <= n; ++j) {
        const auto jd = static_cast<double>(j);
        const double p2 = ((2.0 * jd - 1.0) * x * p1 - (jd - 1.0) * p0) / jd;
        p0 = p1;
        p1 = p2;
      }
      dp = nd * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    rule.nodes[i] = -x;
    rule.nodes[n - 1 - i] = x;
    const double w = 2.0 / ((1.0 - x * x) * dp * dp);
    rule.weights[i] = w;
    rule.weights[n - 1 - i] = w;
  }
  return rule;
}

/// Dense S by quadrature with p + 2 nodes per knot interval.
inline Eigen::MatrixXd oracle_S(const BSplineBasis& basis, const PenaltySpec& spec) {
  const auto k = static_cast<Eigen::Index>(basis.size());
  const auto x = basis.interior_knots();
  const GaussRule rule = gauss_legendre(static_cast<std::size_t>(spec.p()) + 2);
  Eigen::MatrixXd s = Eigen::MatrixXd::Zero(k, k);
  for (std::size_t q = 0; q + 1 < x.size(); ++q) {
    const double half_h = 0.5 * (x[q + 1] - x[q]);
    const double mid = 0.5 * (x[q + 1] + x[q]);
    for (std::size_t g = 0; g < rule.nodes.size(); ++g) {
      const SparseRow row = basis.eval(mid + half_h * rule.nodes[g], spec.m2);
      const double w = half_h * rule.weights[g];
      for (std::size_t a = 0; a < row.values.size(); ++a) {
        for (std::size_t c = 0; c < row.values.size(); ++c) {
          s(static_cast<Eigen::Index>(row.start + a), static_cast<Eigen::Index>(row.start + c)) +=
              w * row.values[a] * row.values[c];
        }
      }
    }
  }
  return s;
}

}  // namespace bsmooth
