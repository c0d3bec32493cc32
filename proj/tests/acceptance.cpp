// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// non-zero if any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <unsupported/Eigen/KroneckerProduct>

#include "bsmooth/fitting.hpp"
#include "bsmooth/penalty.hpp"
#include "bsmooth/penalty_oracle.hpp"
#include "bsmooth/simulate.hpp"
#include "bsmooth/tensor.hpp"
#include "test_support.hpp"

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t) { return std::chrono::duration<double>(Clock::now() - t).count(); }

double max_abs(const Eigen::MatrixXd& m) { return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff(); }

int failures = 0;

void report(int id, bool ok, const std::string& what) {
  std::printf("criterion %d: %s  %s\n", id, ok ? "PASS" : "FAIL", what.c_str());
  std::fflush(stdout);
  if (!ok) ++failures;
}

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0, double d = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c, d);
  return buf;
}

struct SweepCase {
  bsmooth::BSplineBasis basis;
  bsmooth::PenaltySpec spec;
};

std::vector<SweepCase> sweep() {
  std::mt19937_64 rng(20240601);
  std::vector<SweepCase> out;
  for (int m1 = 0; m1 <= 5; ++m1) {
    for (int m2 = 0; m2 <= m1; ++m2) {
      std::uniform_int_distribution<std::size_t> kdist(static_cast<std::size_t>(m1) + 2, 30);
      for (int c = 0; c < 20; ++c) {
        out.push_back({testing_support::random_basis(kdist(rng), m1, rng), bsmooth::PenaltySpec::make(m1, m2)});
      }
    }
  }
  return out;
}

void criteria_1_and_2() {
  const auto start = Clock::now();
  double worst_oracle = 0.0;
  double worst_root = 0.0;
  const auto cases = sweep();
  for (const auto& c : cases) {
    const auto pf = bsmooth::build_penalty(c.basis, c.spec);
    const Eigen::MatrixXd s = testing_support::dense(pf.S);
    const Eigen::MatrixXd oracle = bsmooth::oracle_S(c.basis, c.spec);
    worst_oracle = std::max(worst_oracle, max_abs(s - oracle) / max_abs(oracle));
    const Eigen::MatrixXd d = pf.D.to_dense();
    worst_root = std::max(worst_root, max_abs(d.transpose() * d - s) / max_abs(s));
  }
  const double t = seconds_since(start);
  report(1, worst_oracle <= 1e-10 && t < 30.0,
         fmt("penalty vs Gauss-Legendre oracle: max rel err %.2e over %.0f configurations (%.1f s)", worst_oracle,
             static_cast<double>(cases.size()), t));
  report(2, worst_root <= 1e-10, fmt("D'D vs S: max rel err %.2e on the same sweep", worst_root));
}

void criterion_3() {
  std::mt19937_64 rng(3);
  double worst_null = 0.0;
  double least_top = std::numeric_limits<double>::infinity();
  int checked = 0;
  for (int m2 = 1; m2 <= 3; ++m2) {
    for (int c = 0; c < 20; ++c) {
      const auto basis = testing_support::random_basis(6 + rng() % 20, 3, rng);
      const auto pf = bsmooth::build_penalty(basis, bsmooth::PenaltySpec::make(3, m2));
      const Eigen::MatrixXd s = testing_support::dense(pf.S);
      const double norm = max_abs(s);
      for (int degree = 0; degree < m2; ++degree) {
        const Eigen::VectorXd beta = testing_support::project_monomial(basis, degree);
        worst_null = std::max(worst_null, beta.dot(s * beta) / (norm * beta.squaredNorm()));
        ++checked;
      }
      const Eigen::VectorXd top = testing_support::project_monomial(basis, m2);
      least_top = std::min(least_top, top.dot(s * top) / (norm * top.squaredNorm()));
    }
  }
  report(3, worst_null <= 1e-10 && least_top > 0.0,
         fmt("null space: max b'Sb/(|S| |b|^2) %.2e over %.0f low-degree fits; degree-m2 minimum %.2e", worst_null,
             checked, least_top));
}

void criterion_4() {
  bool ok = true;
  int checked = 0;
  for (const auto& c : sweep()) {
    const auto pf = bsmooth::build_penalty(c.basis, c.spec);
    const auto band = static_cast<std::size_t>(std::min<std::size_t>(static_cast<std::size_t>(c.spec.m1), c.basis.size() - 1));
    const std::size_t s_bands = pf.S.nonzero_diagonals();
    ok = ok && s_bands <= static_cast<std::size_t>(2 * c.spec.m1 + 1) && s_bands == 2 * band + 1;
    const auto w = bsmooth::assemble_W(c.basis, c.spec);
    ok = ok && w.nonzero_diagonals() == static_cast<std::size_t>(2 * c.spec.p() + 1);
    ++checked;
  }
  report(4, ok, fmt("S has 2*min(m1,k-1)+1 <= 2m1+1 nonzero diagonals and W has 2p+1, in all %.0f cases",
                    checked));
}

void criterion_5() {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> nd;
  double worst = 0.0;
  for (int p = 1; p <= 10; ++p) {
    const auto lq = bsmooth::local_quadrature(p);
    const auto gl = bsmooth::gauss_legendre(static_cast<std::size_t>(p) + 1);
    for (int pair = 0; pair < 50; ++pair) {
      const int df = static_cast<int>(rng() % static_cast<unsigned>(p + 1));
      const int dg = static_cast<int>(rng() % static_cast<unsigned>(p + 1));
      Eigen::VectorXd a = Eigen::VectorXd::Zero(p + 1);
      Eigen::VectorXd b = Eigen::VectorXd::Zero(p + 1);
      for (int i = 0; i <= df; ++i) a(i) = nd(rng);
      for (int i = 0; i <= dg; ++i) b(i) = nd(rng);
      auto poly = [](const Eigen::VectorXd& c, double x) {
        double v = 0.0;
        for (Eigen::Index i = c.size(); i-- > 0;) v = v * x + c(i);
        return v;
      };
      Eigen::VectorXd f(p + 1);
      Eigen::VectorXd g(p + 1);
      for (int i = 0; i <= p; ++i) {
        const double node = -1.0 + 2.0 * i / p;
        f(i) = poly(a, node);
        g(i) = poly(b, node);
      }
      double exact = 0.0;
      double ff = 0.0;
      double gg = 0.0;
      for (std::size_t q = 0; q < gl.nodes.size(); ++q) {
        const double fx = poly(a, gl.nodes[q]);
        const double gx = poly(b, gl.nodes[q]);
        exact += gl.weights[q] * fx * gx;
        ff += gl.weights[q] * fx * fx;
        gg += gl.weights[q] * gx * gx;
      }
      const double got = f.dot(lq.Wtilde * g);
      worst = std::max(worst, std::abs(got - exact) / std::sqrt(ff * gg));
    }
  }
  report(5, worst <= 1e-9,
         fmt("g'W~g' vs exact integral for p = 1..10, 50 pairs each: max rel err %.2e (scale |f|_2 |g|_2)", worst));
}

void criterion_6() {
  std::mt19937_64 rng(6);
  double worst = 0.0;
  int checked = 0;
  for (std::size_t d = 2; d <= 3; ++d) {
    for (int trial = 0; trial < 30; ++trial) {
      std::vector<bsmooth::Marginal> ms;
      std::vector<std::size_t> k;
      for (std::size_t j = 0; j < d; ++j) {
        const int m1 = static_cast<int>(rng() % 4);
        const std::size_t kj = static_cast<std::size_t>(m1) + 1 + rng() % (4 - static_cast<std::size_t>(std::min(m1, 3)));
        const int m2 = static_cast<int>(rng() % static_cast<unsigned>(m1 + 1));
        ms.push_back(bsmooth::make_marginal(testing_support::random_basis(std::min<std::size_t>(kj, 4), m1, rng), m2));
        k.push_back(ms.back().basis.size());
      }
      const bsmooth::TensorSmooth s(ms);
      for (std::size_t j = 0; j < d; ++j) {
        Eigen::MatrixXd oracle = Eigen::MatrixXd::Identity(1, 1);
        for (std::size_t i = 0; i < d; ++i) {
          const Eigen::MatrixXd f = i == j ? testing_support::dense(ms[j].penalty.S)
                                           : Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(k[i]),
                                                                       static_cast<Eigen::Index>(k[i]));
          oracle = Eigen::kroneckerProduct(oracle, f).eval();
        }
        const Eigen::MatrixXd dj = s.penalty_sqrts()[j].to_dense();
        const double scale = std::max(1.0, max_abs(oracle));
        worst = std::max(worst, max_abs(dj.transpose() * dj - oracle) / scale);
        ++checked;
      }
    }
  }
  report(6, worst <= 1e-13, fmt("D~j'D~j vs dense Kronecker oracle, d in {2,3}, k_j <= 4: max rel err %.2e over %.0f "
                                "penalties",
                                worst, checked));
}

struct TensorRun {
  bsmooth::TensorSmooth smooth;
  bsmooth::FitResult fit;
  double seconds;
};

TensorRun fit_experiment(const bsmooth::Sample& s, bool reduce) {
  std::vector<double> coords;
  coords.reserve(2 * s.x.size());
  for (std::size_t i = 0; i < s.x.size(); ++i) coords.insert(coords.end(), {s.x[i], s.z[i]});
  const bsmooth::PointSet pts(2, std::move(coords));
  const auto start = Clock::now();
  bsmooth::TensorSmooth smooth({bsmooth::make_marginal(bsmooth::make_basis(25, 3, 0.0, 1.0), 2),
                                bsmooth::make_marginal(bsmooth::make_basis(25, 3, 0.0, 1.0), 2)});
  if (reduce) smooth = smooth.reduce(pts);
  bsmooth::FitResult fit = bsmooth::select_lambda(bsmooth::make_problem(smooth, pts, s.y));
  return {std::move(smooth), std::move(fit), seconds_since(start)};
}

double correlation(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  const Eigen::VectorXd ca = a.array() - a.mean();
  const Eigen::VectorXd cb = b.array() - b.mean();
  return ca.dot(cb) / (ca.norm() * cb.norm());
}

double mse(const Eigen::VectorXd& fitted, const std::vector<double>& truth) {
  const Eigen::Map<const Eigen::VectorXd> f(truth.data(), static_cast<Eigen::Index>(truth.size()));
  return (fitted - f).squaredNorm() / static_cast<double>(truth.size());
}

void criterion_7() {
  const auto start = Clock::now();
  constexpr std::uint64_t kSeed = 1;
  constexpr int kTimingRuns = 3;
  const bsmooth::Sample s = bsmooth::simulate(2000, kSeed);

  double full_time = std::numeric_limits<double>::infinity();
  double reduced_time = std::numeric_limits<double>::infinity();
  TensorRun full = fit_experiment(s, false);
  TensorRun reduced = fit_experiment(s, true);
  full_time = std::min(full_time, full.seconds);
  reduced_time = std::min(reduced_time, reduced.seconds);
  for (int r = 1; r < kTimingRuns; ++r) {
    full_time = std::min(full_time, fit_experiment(s, false).seconds);
    reduced_time = std::min(reduced_time, fit_experiment(s, true).seconds);
  }

  const std::size_t full_count = full.smooth.full_size();
  const std::size_t retained = reduced.smooth.size();
  const double corr = correlation(full.fit.fitted, reduced.fit.fitted);
  const double time_ratio = reduced_time / full_time;

  double mse_full = mse(full.fit.fitted, s.f);
  double mse_reduced = mse(reduced.fit.fitted, s.f);
  double total_full_time = full.seconds;
  double total_reduced_time = reduced.seconds;
  for (std::uint64_t seed = kSeed + 1; seed < kSeed + 10; ++seed) {
    const bsmooth::Sample rep = bsmooth::simulate(2000, seed);
    const TensorRun f = fit_experiment(rep, false);
    const TensorRun r = fit_experiment(rep, true);
    mse_full += mse(f.fit.fitted, rep.f);
    mse_reduced += mse(r.fit.fitted, rep.f);
    total_full_time += f.seconds;
    total_reduced_time += r.seconds;
  }
  const double mse_ratio = mse_reduced / mse_full;
  const double t = seconds_since(start);

  const bool a = full_count == 625;
  const bool b = retained >= 250 && retained <= 550;
  const bool c = corr > 0.99;
  const bool d = time_ratio <= 0.5;
  const bool e = mse_ratio <= 1.1;
  std::printf("  7a full coefficients %zu (want 625)\n", full_count);
  std::printf("  7b retained coefficients %zu (want 250..550)\n", retained);
  std::printf("  7c fitted-value correlation %.6f (want > 0.99)\n", corr);
  std::printf("  7d reduced/full fit time %.3f s / %.3f s = %.3f (want <= 0.5; 10-seed aggregate %.3f)\n",
              reduced_time, full_time, time_ratio, total_reduced_time / total_full_time);
  std::printf("  7e mean MSE reduced/full over 10 seeds %.3e / %.3e = %.3f (want <= 1.1)\n", mse_reduced / 10,
              mse_full / 10, mse_ratio);
  report(7, a && b && c && d && e && t < 300.0,
         fmt("reduced tensor fit of the simulated surface (a-e above, %.0f s)", t));
}

void criterion_8() {
  std::mt19937_64 rng(8);
  double worst_pou = 0.0;
  double worst_fd = 0.0;
  for (int order = 0; order <= 5; ++order) {
    const auto b = testing_support::random_basis(static_cast<std::size_t>(order) + 10, order, rng);
    std::uniform_real_distribution<double> u(b.a(), b.b());
    for (int t = 0; t < 1000; ++t) worst_pou = std::max(worst_pou, std::abs(b.eval(u(rng)).sum() - 1.0));
    if (order == 0) continue;
    const double step = 1e-6;
    for (int deriv = 1; deriv <= order; ++deriv) {
      int checked = 0;
      while (checked < 100) {
        const double x = u(rng);
        bool near_knot = false;
        for (double k : b.knots()) near_knot = near_knot || std::abs(x - k) < 4 * step;
        if (near_knot) continue;
        ++checked;
        const auto dv = b.eval(x, deriv);
        const auto up = b.eval(x + step, deriv - 1);
        const auto dn = b.eval(x - step, deriv - 1);
        double scale = 0.0;
        for (double v : dv.values) scale = std::max(scale, std::abs(v));
        for (std::size_t c = 0; c < dv.values.size(); ++c) {
          const double fd = (up.values[c] - dn.values[c]) / (2 * step);
          worst_fd = std::max(worst_fd, std::abs(dv.values[c] - fd) / scale);
        }
      }
    }
  }

  double worst_chol = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 1 + rng() % 60;
    const std::size_t bw = std::min<std::size_t>(rng() % 8, n - 1);
    const auto a = testing_support::random_spd_banded(n, bw, rng);
    const Eigen::MatrixXd r = testing_support::dense(bsmooth::banded_cholesky(a));
    const Eigen::MatrixXd oracle = testing_support::dense(a).llt().matrixU();
    worst_chol = std::max(worst_chol, max_abs(r - oracle) / max_abs(oracle));
  }
  report(8, worst_pou <= 1e-12 && worst_fd <= 1e-5 && worst_chol <= 1e-10,
         fmt("partition of unity %.2e; derivative vs finite differences %.2e; banded Cholesky vs dense %.2e",
             worst_pou, worst_fd, worst_chol));
}

}  // namespace

int main() {
  criteria_1_and_2();
  criterion_3();
  criterion_4();
  criterion_5();
  criterion_6();
  criterion_7();
  criterion_8();
  std::printf("%s: %d criteria failed\n", failures == 0 ? "ALL PASS" : "FAILURES", failures);
  return failures == 0 ? 0 : 1;
}
