#pragma once

/**
 * @file fitting.hpp
 * @brief Penalized least squares with several quadratic penalties and
 *        smoothing-parameter selection.
 *
 * Minimizes ||y - X beta||^2 + sum_j lambda_j betaᵀ S_j beta. XᵀX and every
 * S_j share a band, so the normal matrix M = XᵀX + sum_j lambda_j S_j gets a
 * banded Cholesky factor. The effective degrees of freedom
 * tr(X M^{-1} Xᵀ) = tr(M^{-1} XᵀX) need M^{-1} only inside that band, which
 * the selected inverse of the factor supplies in O(q b^2).
 */

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "bsmooth/banded.hpp"
#include "bsmooth/bspline.hpp"
#include "bsmooth/error.hpp"
#include "bsmooth/sparse.hpp"
#include "bsmooth/tensor.hpp"

namespace bsmooth {

/// A penalty given either as S itself (banded) or as a square root D with S = DᵀD.
using PenaltyMatrix = std::variant<BandedMatrix<double>, SparseMatrix>;

struct PenaltyTerm {
  PenaltyMatrix matrix;
  std::optional<double> lambda;  ///< empty: choose automatically
};

struct FitProblem {
  SparseMatrix design;
  Eigen::VectorXd response;
  std::vector<PenaltyTerm> penalties;
};

enum class Criterion { gcv, reml };

inline const char* to_string(Criterion c) noexcept { return c == Criterion::gcv ? "gcv" : "reml"; }

struct FitResult {
  Eigen::VectorXd beta;
  Eigen::VectorXd fitted;
  std::vector<double> lambdas;
  double edf = 0.0;
  double score = std::numeric_limits<double>::quiet_NaN();
  double rss = 0.0;
  Criterion criterion = Criterion::gcv;
};

/// Precomputes everything that does not depend on the smoothing parameters.
class PenalizedRegression {
 public:
  explicit PenalizedRegression(FitProblem problem) : problem_(std::move(problem)) {
    const auto& x = problem_.design;
    n_ = x.rows();
    q_ = x.cols();
    if (n_ == 0) throw InvalidArgument("fit needs at least one observation");
    if (q_ == 0) throw InvalidArgument("fit needs at least one coefficient");
    if (static_cast<std::size_t>(problem_.response.size()) != n_) {
      throw InvalidArgument("response has " + std::to_string(problem_.response.size()) + " entries, design has " +
                            std::to_string(n_) + " rows");
    }
    xtx_ = x.gram();
    xty_ = x.transpose_multiply(problem_.response);
    for (std::size_t j = 0; j < problem_.penalties.size(); ++j) {
      const auto& term = problem_.penalties[j];
      if (term.lambda && !(*term.lambda >= 0.0)) {
        throw InvalidArgument("smoothing parameter " + std::to_string(j) + " must be non-negative");
      }
      Eigen::MatrixXd s;
      if (const auto* banded = std::get_if<BandedMatrix<double>>(&term.matrix)) {
        if (banded->size() != q_) throw InvalidArgument("penalty " + std::to_string(j) + " has the wrong dimension");
        const auto n = static_cast<Eigen::Index>(q_);
        s.resize(n, n);
        for (Eigen::Index r = 0; r < n; ++r) {
          for (Eigen::Index c = 0; c < n; ++c) s(r, c) = (*banded)(static_cast<std::size_t>(r), static_cast<std::size_t>(c));
        }
      } else {
        const auto& root = std::get<SparseMatrix>(term.matrix);
        if (root.cols() != q_) throw InvalidArgument("penalty " + std::to_string(j) + " has the wrong dimension");
        s = root.gram();
      }
      penalty_.push_back(std::move(s));
    }

    bandwidth_ = bandwidth_of(xtx_);
    for (const auto& s : penalty_) bandwidth_ = std::max(bandwidth_, bandwidth_of(s));
    xtx_band_ = to_band(xtx_);
    for (const auto& s : penalty_) penalty_band_.push_back(to_band(s));
  }

  [[nodiscard]] const FitProblem& problem() const noexcept { return problem_; }
  [[nodiscard]] std::size_t observations() const noexcept { return n_; }
  [[nodiscard]] std::size_t coefficients() const noexcept { return q_; }
  [[nodiscard]] std::size_t penalty_count() const noexcept { return penalty_.size(); }
  [[nodiscard]] const Eigen::MatrixXd& penalty(std::size_t j) const { return penalty_.at(j); }
  /// Half-bandwidth shared by XᵀX and every S_j.
  [[nodiscard]] std::size_t bandwidth() const noexcept { return bandwidth_; }

  /// Solves the penalized normal equations at fixed lambdas. `score` is the
  /// chosen criterion, or NaN where it is undefined (edf reaching n for GCV).
  [[nodiscard]] FitResult fit(std::span<const double> lambdas, Criterion criterion = Criterion::gcv) const {
    const Solved s = solve(lambdas);
    FitResult r;
    r.beta = s.beta;
    r.fitted = problem_.design.multiply(s.beta);
    r.rss = (problem_.response - r.fitted).squaredNorm();
    r.lambdas.assign(lambdas.begin(), lambdas.end());
    r.edf = edf(s);
    r.criterion = criterion;
    r.score = criterion == Criterion::gcv ? gcv_from(r.rss, r.edf) : reml_from(s, r.rss, lambdas);
    return r;
  }

  /// n * rss / (n - tr(A))^2. Throws DegenerateFit once tr(A) reaches n.
  [[nodiscard]] double gcv_score(std::span<const double> lambdas) const {
    const FitResult r = fit(lambdas, Criterion::gcv);
    if (std::isnan(r.score)) {
      throw DegenerateFit("effective degrees of freedom " + std::to_string(r.edf) + " reach the sample size " +
                          std::to_string(n_));
    }
    return r.score;
  }

  /**
   * Laplace-approximate restricted likelihood with the scale profiled out,
   * as -2 log L_R up to a constant:
   *   (n - Mp) (1 + log(2 pi Dp / (n - Mp))) + log|M| - log|S_lambda|_+,
   * with Dp = rss + betaᵀ S_lambda beta and Mp the null-space dimension of
   * the total penalty.
   */
  [[nodiscard]] double reml_score(std::span<const double> lambdas) const {
    const FitResult r = fit(lambdas, Criterion::reml);
    if (!std::isfinite(r.score)) throw DegenerateFit("REML score undefined at these smoothing parameters");
    return r.score;
  }

  /// ||y - X beta||^2 + sum_j lambda_j betaᵀ S_j beta.
  [[nodiscard]] double objective(const Eigen::VectorXd& beta, std::span<const double> lambdas) const {
    double v = (problem_.response - problem_.design.multiply(beta)).squaredNorm();
    for (std::size_t j = 0; j < penalty_.size(); ++j) v += lambdas[j] * beta.dot(penalty_[j] * beta);
    return v;
  }

  [[nodiscard]] Eigen::MatrixXd normal_matrix(std::span<const double> lambdas) const {
    check_lambdas(lambdas);
    Eigen::MatrixXd m = xtx_;
    for (std::size_t j = 0; j < penalty_.size(); ++j) {
      if (lambdas[j] != 0.0) m.noalias() += lambdas[j] * penalty_[j];
    }
    return m;
  }

  [[nodiscard]] const Eigen::VectorXd& xty() const noexcept { return xty_; }

 private:
  struct Solved {
    BandedMatrix<double> factor;  ///< R with RᵀR = M
    Eigen::VectorXd beta;
  };

  static std::size_t bandwidth_of(const Eigen::MatrixXd& a) {
    std::size_t b = 0;
    for (Eigen::Index c = 0; c < a.cols(); ++c) {
      for (Eigen::Index r = 0; r < c; ++r) {
        if (a(r, c) != 0.0) {
          b = std::max(b, static_cast<std::size_t>(c - r));
          break;
        }
      }
    }
    return b;
  }

  [[nodiscard]] BandedMatrix<double> to_band(const Eigen::MatrixXd& a) const {
    BandedMatrix<double> out(q_, bandwidth_, BandShape::symmetric);
    for (std::size_t d = 0; d <= bandwidth_; ++d) {
      for (std::size_t i = 0; i + d < q_; ++i) {
        out.band(i, d) = a(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i + d));
      }
    }
    return out;
  }

  void check_lambdas(std::span<const double> lambdas) const {
    if (lambdas.size() != penalty_.size()) {
      throw InvalidArgument("expected " + std::to_string(penalty_.size()) + " smoothing parameters, got " +
                            std::to_string(lambdas.size()));
    }
    for (double l : lambdas) {
      if (!(l >= 0.0)) throw InvalidArgument("smoothing parameters must be non-negative");
    }
  }

  [[nodiscard]] Solved solve(std::span<const double> lambdas) const {
    check_lambdas(lambdas);
    BandedMatrix<double> m = xtx_band_;
    std::vector<double> mv(m.data().begin(), m.data().end());
    for (std::size_t j = 0; j < penalty_band_.size(); ++j) {
      if (lambdas[j] == 0.0) continue;
      const auto sv = penalty_band_[j].data();
      for (std::size_t t = 0; t < mv.size(); ++t) mv[t] += lambdas[j] * sv[t];
    }
    for (std::size_t d = 0; d <= bandwidth_; ++d) {
      for (std::size_t i = 0; i + d < q_; ++i) m.band(i, d) = mv[d * q_ + i];
    }
    Solved s;
    try {
      s.factor = banded_cholesky(m);
    } catch (const NotPositiveDefinite&) {
      throw IdentifiabilityError(
          "penalized normal equations are not positive definite; increase the smoothing parameters or reduce "
          "the basis");
    }
    const std::vector<double> beta =
        banded_solve<double>(s.factor, std::span<const double>(xty_.data(), static_cast<std::size_t>(q_)));
    s.beta = Eigen::Map<const Eigen::VectorXd>(beta.data(), static_cast<Eigen::Index>(q_));
    return s;
  }

  /// tr(M^{-1} XᵀX), reading M^{-1} only inside the shared band.
  [[nodiscard]] double edf(const Solved& s) const {
    const BandedMatrix<double> z = banded_inverse_band(s.factor);
    double t = 0.0;
    for (std::size_t d = 0; d <= bandwidth_; ++d) {
      double part = 0.0;
      for (std::size_t i = 0; i + d < q_; ++i) part += z.band(i, d) * xtx_band_.band(i, d);
      t += d == 0 ? part : 2.0 * part;
    }
    return t;
  }

  [[nodiscard]] double gcv_from(double rss, double edf) const {
    const auto n = static_cast<double>(n_);
    const double denom = n - edf;
    if (!(denom > 1e-8 * n)) return std::numeric_limits<double>::quiet_NaN();
    return n * rss / (denom * denom);
  }

  /// Rank of the total penalty, fixed for all positive lambdas.
  [[nodiscard]] std::size_t penalty_rank() const {
    if (penalty_rank_) return *penalty_rank_;
    std::size_t rank = 0;
    if (!penalty_.empty()) {
      Eigen::MatrixXd total = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(q_), static_cast<Eigen::Index>(q_));
      for (const auto& s : penalty_) {
        const double norm = s.cwiseAbs().maxCoeff();
        if (norm > 0.0) total += s / norm;
      }
      const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(total, Eigen::EigenvaluesOnly);
      const double top = eig.eigenvalues().cwiseAbs().maxCoeff();
      for (Eigen::Index i = 0; i < eig.eigenvalues().size(); ++i) {
        if (eig.eigenvalues()(i) > 1e-9 * top) ++rank;
      }
    }
    penalty_rank_ = rank;
    return rank;
  }

  [[nodiscard]] double reml_from(const Solved& s, double rss, std::span<const double> lambdas) const {
    const auto q = static_cast<Eigen::Index>(q_);
    Eigen::MatrixXd sl = Eigen::MatrixXd::Zero(q, q);
    for (std::size_t j = 0; j < penalty_.size(); ++j) {
      if (lambdas[j] <= 0.0) return std::numeric_limits<double>::quiet_NaN();
      sl.noalias() += lambdas[j] * penalty_[j];
    }
    const std::size_t rank = penalty_rank();
    const double dp = rss + s.beta.dot(sl * s.beta);
    const auto null_dim = static_cast<double>(q_ - rank);
    const double dof = static_cast<double>(n_) - null_dim;
    if (!(dof > 0.0) || !(dp > 0.0)) return std::numeric_limits<double>::quiet_NaN();

    double log_det_m = 0.0;
    for (std::size_t i = 0; i < q_; ++i) log_det_m += 2.0 * std::log(s.factor.band(i, 0));

    double log_det_s = 0.0;
    if (rank > 0) {
      const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(sl, Eigen::EigenvaluesOnly);
      const Eigen::VectorXd& ev = eig.eigenvalues();  // ascending
      for (std::size_t i = 0; i < rank; ++i) {
        const double v = ev(ev.size() - 1 - static_cast<Eigen::Index>(i));
        if (!(v > 0.0)) return std::numeric_limits<double>::quiet_NaN();
        log_det_s += std::log(v);
      }
    }
    return dof * (1.0 + std::log(2.0 * std::numbers::pi * dp / dof)) + log_det_m - log_det_s;
  }

  FitProblem problem_;
  std::size_t n_ = 0;
  std::size_t q_ = 0;
  std::size_t bandwidth_ = 0;
  Eigen::MatrixXd xtx_;
  Eigen::VectorXd xty_;
  std::vector<Eigen::MatrixXd> penalty_;
  BandedMatrix<double> xtx_band_;
  std::vector<BandedMatrix<double>> penalty_band_;
  mutable std::optional<std::size_t> penalty_rank_;
};

/// Fixed smoothing parameters for every penalty (none may be automatic).
inline std::vector<double> fixed_lambdas(const FitProblem& problem) {
  std::vector<double> out;
  for (const auto& t : problem.penalties) {
    if (!t.lambda) throw InvalidArgument("pls_fit needs every smoothing parameter fixed");
    out.push_back(*t.lambda);
  }
  return out;
}

inline FitResult pls_fit(const FitProblem& problem) {
  const PenalizedRegression pr(problem);
  return pr.fit(fixed_lambdas(problem));
}

inline double gcv_score(const FitProblem& problem, std::span<const double> lambdas) {
  return PenalizedRegression(problem).gcv_score(lambdas);
}

struct SelectOptions {
  Criterion criterion = Criterion::gcv;
  double log10_min = -8.0;
  double log10_max = 8.0;
  /// Golden-section stops once the bracket on log10(lambda) is this narrow.
  double bracket_tolerance = 1e-4;
  /// Cycles stop when a full sweep improves the score by less than this, relatively.
  double relative_improvement = 1e-6;
  int max_cycles = 50;
};

/**
 * Coordinate-wise golden-section search on log10(lambda_j) over
 * [log10_min, log10_max] for every automatic penalty, repeated until a sweep
 * stops improving. Probes where the fit fails count as +inf. Deterministic.
 */
inline FitResult select_lambda(const PenalizedRegression& pr, const SelectOptions& options = {}) {
  const auto& terms = pr.problem().penalties;
  std::vector<std::size_t> free;
  std::vector<double> log_lambda(terms.size(), 0.0);
  for (std::size_t j = 0; j < terms.size(); ++j) {
    if (terms[j].lambda) {
      log_lambda[j] = *terms[j].lambda;  // used as-is, not as a log
    } else {
      free.push_back(j);
    }
  }
  auto to_lambdas = [&](const std::vector<double>& x) {
    std::vector<double> l(x.size());
    for (std::size_t j = 0; j < x.size(); ++j) l[j] = terms[j].lambda ? x[j] : std::pow(10.0, x[j]);
    return l;
  };
  if (free.empty()) return pr.fit(to_lambdas(log_lambda), options.criterion);

  std::optional<std::string> last_error;
  bool any_ok = false;
  auto score = [&](const std::vector<double>& x) {
    try {
      const FitResult r = pr.fit(to_lambdas(x), options.criterion);
      if (std::isfinite(r.score)) {
        any_ok = true;
        return r.score;
      }
      last_error = "selection criterion undefined";
    } catch (const NumericalError& e) {
      last_error = e.what();
    }
    return std::numeric_limits<double>::infinity();
  };

  constexpr double golden = 0.6180339887498949;
  double best = score(log_lambda);
  for (int cycle = 0; cycle < options.max_cycles; ++cycle) {
    const double start = best;
    for (std::size_t j : free) {
      std::vector<double> x = log_lambda;
      auto at = [&](double v) {
        x[j] = v;
        return score(x);
      };
      double lo = options.log10_min;
      double hi = options.log10_max;
      double best_v = log_lambda[j];
      double best_f = best;
      auto consider = [&](double v, double f) {
        if (f < best_f) {
          best_f = f;
          best_v = v;
        }
      };
      consider(lo, at(lo));
      consider(hi, at(hi));
      double c = hi - golden * (hi - lo);
      double d = lo + golden * (hi - lo);
      double fc = at(c);
      double fd = at(d);
      consider(c, fc);
      consider(d, fd);
      while (hi - lo > options.bracket_tolerance) {
        if (fc <= fd) {
          hi = d;
          d = c;
          fd = fc;
          c = hi - golden * (hi - lo);
          fc = at(c);
          consider(c, fc);
        } else {
          lo = c;
          c = d;
          fc = fd;
          d = lo + golden * (hi - lo);
          fd = at(d);
          consider(d, fd);
        }
      }
      log_lambda[j] = best_v;
      best = best_f;
    }
    // One free parameter: a second sweep would repeat the first exactly.
    if (free.size() == 1) break;
    if (!(start - best > options.relative_improvement * std::abs(start))) break;
  }
  if (!any_ok) {
    throw IdentifiabilityError("every smoothing-parameter probe failed: " + last_error.value_or("unknown error"));
  }
  return pr.fit(to_lambdas(log_lambda), options.criterion);
}

inline FitResult select_lambda(const FitProblem& problem, const SelectOptions& options = {}) {
  return select_lambda(PenalizedRegression(problem), options);
}

/// Problem for a one-dimensional smooth with a single penalty.
inline FitProblem make_problem(const BSplineBasis& basis, const PenaltyFactor& penalty, std::span<const double> x,
                               std::span<const double> y, std::optional<double> lambda = std::nullopt) {
  if (x.size() != y.size()) throw InvalidArgument("x and y lengths differ");
  FitProblem p;
  p.design = SparseMatrix::from(design_matrix(basis, x));
  p.response = Eigen::Map<const Eigen::VectorXd>(y.data(), static_cast<Eigen::Index>(y.size()));
  p.penalties.push_back(PenaltyTerm{penalty.S, lambda});
  return p;
}

/// Problem for a tensor smooth with one penalty per margin.
inline FitProblem make_problem(const TensorSmooth& smooth, const PointSet& points, std::span<const double> y,
                               std::vector<std::optional<double>> lambdas = {}) {
  if (points.size() != y.size()) throw InvalidArgument("point and response counts differ");
  if (lambdas.empty()) lambdas.assign(smooth.dims(), std::nullopt);
  if (lambdas.size() != smooth.dims()) throw InvalidArgument("need one smoothing parameter per margin");
  FitProblem p;
  p.design = smooth.design(points);
  p.response = Eigen::Map<const Eigen::VectorXd>(y.data(), static_cast<Eigen::Index>(y.size()));
  for (std::size_t j = 0; j < smooth.dims(); ++j) p.penalties.push_back(PenaltyTerm{smooth.penalty_sqrts()[j], lambdas[j]});
  return p;
}

inline Eigen::VectorXd predict(const FitResult& result, const BSplineBasis& basis, std::span<const double> x) {
  if (static_cast<std::size_t>(result.beta.size()) != basis.size()) throw InvalidArgument("coefficient count mismatch");
  return SparseMatrix::from(design_matrix(basis, x)).multiply(result.beta);
}

inline Eigen::VectorXd predict(const FitResult& result, const TensorSmooth& smooth, const PointSet& points) {
  if (static_cast<std::size_t>(result.beta.size()) != smooth.size()) throw InvalidArgument("coefficient count mismatch");
  return smooth.design(points).multiply(result.beta);
}

}  // namespace bsmooth
