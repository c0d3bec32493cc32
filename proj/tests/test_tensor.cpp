#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <unsupported/Eigen/KroneckerProduct>
#include <gtest/gtest.h>

#include "bsmooth/tensor.hpp"
#include "test_support.hpp"

namespace {

using bsmooth::Marginal;
using bsmooth::PointSet;
using bsmooth::TensorSmooth;

/// I ⊗ ... ⊗ M ⊗ ... ⊗ I with M in slot j.
Eigen::MatrixXd kron_slot(const std::vector<std::size_t>& k, std::size_t j, const Eigen::MatrixXd& m) {
  Eigen::MatrixXd out = Eigen::MatrixXd::Identity(1, 1);
  for (std::size_t i = 0; i < k.size(); ++i) {
    const Eigen::MatrixXd f = i == j ? m : Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(k[i]), static_cast<Eigen::Index>(k[i]));
    out = Eigen::kroneckerProduct(out, f).eval();
  }
  return out;
}

TensorSmooth random_smooth(std::size_t d, std::mt19937_64& rng, std::size_t max_k) {
  std::vector<Marginal> ms;
  for (std::size_t j = 0; j < d; ++j) {
    const int m1 = static_cast<int>(rng() % 3);
    const std::size_t k = static_cast<std::size_t>(m1) + 1 + rng() % (max_k - static_cast<std::size_t>(m1));
    const int m2 = static_cast<int>(rng() % static_cast<unsigned>(m1 + 1));
    ms.push_back(bsmooth::make_marginal(testing_support::random_basis(k, m1, rng), m2));
  }
  return TensorSmooth(std::move(ms));
}

PointSet uniform_points(const TensorSmooth& s, std::size_t n, std::mt19937_64& rng, double frac = 1.0) {
  std::vector<double> c;
  for (std::size_t i = 0; i < n; ++i) {
    for (const auto& m : s.marginals()) {
      std::uniform_real_distribution<double> u(m.basis.a(), m.basis.a() + frac * (m.basis.b() - m.basis.a()));
      c.push_back(u(rng));
    }
  }
  return PointSet(s.dims(), std::move(c));
}

TEST(TensorRow, OneDimensionMatchesMarginal) {
  std::mt19937_64 rng(1);
  const auto basis = testing_support::random_basis(9, 3, rng);
  const TensorSmooth s({bsmooth::make_marginal(basis, 2)});
  std::uniform_real_distribution<double> u(basis.a(), basis.b());
  for (int t = 0; t < 50; ++t) {
    const double x = u(rng);
    const auto r = s.row(std::span<const double>(&x, 1));
    const auto m = basis.eval(x);
    ASSERT_EQ(r.size(), m.values.size());
    for (std::size_t c = 0; c < r.size(); ++c) {
      EXPECT_EQ(r.index[c], m.start + c);
      EXPECT_EQ(r.value[c], m.values[c]);
    }
  }
}

TEST(TensorRow, SumsToOneAndHasCompactSupport) {
  std::mt19937_64 rng(2);
  for (std::size_t d = 1; d <= 3; ++d) {
    const TensorSmooth s = random_smooth(d, rng, 6);
    std::size_t bound = 1;
    for (const auto& m : s.marginals()) bound *= static_cast<std::size_t>(m.basis.order()) + 1;
    const PointSet pts = uniform_points(s, 100, rng);
    for (std::size_t i = 0; i < pts.size(); ++i) {
      const auto r = s.row(pts[i]);
      EXPECT_LE(r.size(), bound);
      EXPECT_NEAR(r.sum(), 1.0, 1e-12);
    }
  }
}

TEST(TensorRow, HatProductAtKnotIntersection) {
  const TensorSmooth s({bsmooth::make_marginal(bsmooth::make_basis(5, 1, 0.0, 1.0), 1),
                        bsmooth::make_marginal(bsmooth::make_basis(4, 1, 0.0, 1.0), 1)});
  const std::vector<double> z{0.5, 1.0 / 3.0};
  const auto r = s.row(z);
  int nonzero = 0;
  for (std::size_t t = 0; t < r.size(); ++t) {
    if (r.value[t] != 0.0) {
      ++nonzero;
      EXPECT_NEAR(r.value[t], 1.0, 1e-15);
      EXPECT_EQ(r.index[t], 2u * 4u + 1u);
    }
  }
  EXPECT_EQ(nonzero, 1);
}

TEST(TensorRow, OutOfRangeNamesDimension) {
  const TensorSmooth s({bsmooth::make_marginal(bsmooth::make_basis(5, 3, 0.0, 1.0), 2),
                        bsmooth::make_marginal(bsmooth::make_basis(5, 3, 0.0, 1.0), 2)});
  const std::vector<double> z{0.5, 1.5};
  try {
    (void)s.row(z);
    FAIL() << "expected an error";
  } catch (const bsmooth::InvalidArgument& e) {
    EXPECT_NE(std::string(e.what()).find("dimension 1"), std::string::npos) << e.what();
  }
  const PointSet pts(2, {0.1, 0.1, 0.2, -0.5});
  try {
    (void)s.design(pts);
    FAIL() << "expected an error";
  } catch (const bsmooth::InvalidArgument& e) {
    EXPECT_NE(std::string(e.what()).find("point 1"), std::string::npos) << e.what();
  }
}

TEST(PenaltySqrts, OneDimensionIsMarginal) {
  const auto m = bsmooth::make_marginal(bsmooth::make_basis(8, 3, 0.0, 2.0), 2);
  const TensorSmooth s({m});
  EXPECT_EQ(s.penalty_sqrts()[0].to_dense(), m.penalty.D.to_dense());
}

TEST(PenaltySqrts, HandKronecker) {
  auto m = bsmooth::make_marginal(bsmooth::make_basis(2, 1, 0.0, 1.0), 1);
  m.penalty.D.cols = 2;
  m.penalty.D.rows = {bsmooth::SparseRow{0, {1.0, -1.0}}};
  const TensorSmooth s({m, m});
  Eigen::MatrixXd expect(2, 4);
  expect << 1, 0, -1, 0, 0, 1, 0, -1;
  EXPECT_EQ(s.penalty_sqrts()[0].to_dense(), expect);
  Eigen::MatrixXd second(2, 4);
  second << 1, -1, 0, 0, 0, 0, 1, -1;
  EXPECT_EQ(s.penalty_sqrts()[1].to_dense(), second);
}

TEST(PenaltySqrts, MatchDenseKroneckerOracle) {
  std::mt19937_64 rng(3);
  for (std::size_t d = 2; d <= 3; ++d) {
    for (int trial = 0; trial < 25; ++trial) {
      const TensorSmooth s = random_smooth(d, rng, 4);
      std::vector<std::size_t> k;
      for (const auto& m : s.marginals()) k.push_back(m.basis.size());
      for (std::size_t j = 0; j < d; ++j) {
        const Eigen::MatrixXd dj = s.penalty_sqrts()[j].to_dense();
        const Eigen::MatrixXd oracle_d = kron_slot(k, j, s.marginals()[j].penalty.D.to_dense());
        EXPECT_EQ(dj, oracle_d);
        const Eigen::MatrixXd sj = testing_support::dense(s.marginals()[j].penalty.S);
        const Eigen::MatrixXd oracle_s = kron_slot(k, j, sj);
        EXPECT_LE((dj.transpose() * dj - oracle_s).cwiseAbs().maxCoeff(), 1e-13 * std::max(1.0, oracle_s.cwiseAbs().maxCoeff()));
      }
    }
  }
}

TEST(Reduce, FullCoverageIsIdentity) {
  std::mt19937_64 rng(4);
  const TensorSmooth s = random_smooth(2, rng, 6);
  const TensorSmooth r = s.reduce(uniform_points(s, 5000, rng));
  EXPECT_FALSE(r.reduced());
  EXPECT_EQ(r.size(), s.full_size());
  for (std::size_t j = 0; j < 2; ++j) EXPECT_EQ(r.penalty_sqrts()[j].to_dense(), s.penalty_sqrts()[j].to_dense());
}

TEST(Reduce, QuadrantDataMatchesBruteForce) {
  std::mt19937_64 rng(5);
  const TensorSmooth s({bsmooth::make_marginal(bsmooth::make_basis(8, 3, 0.0, 1.0), 2),
                        bsmooth::make_marginal(bsmooth::make_basis(7, 2, 0.0, 1.0), 1)});
  const PointSet pts = uniform_points(s, 400, rng, 0.45);
  const TensorSmooth r = s.reduce(pts);
  ASSERT_TRUE(r.reduced());

  // A coefficient survives iff its product basis value is nonzero at some point.
  std::set<std::size_t> expect;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const auto a = s.marginals()[0].basis.eval(pts[i][0]);
    const auto b = s.marginals()[1].basis.eval(pts[i][1]);
    for (std::size_t u = 0; u < a.values.size(); ++u) {
      for (std::size_t v = 0; v < b.values.size(); ++v) {
        if (a.values[u] * b.values[v] != 0.0) expect.insert((a.start + u) * 7 + b.start + v);
      }
    }
  }
  const std::vector<std::size_t> got(r.retained().begin(), r.retained().end());
  EXPECT_EQ(got, std::vector<std::size_t>(expect.begin(), expect.end()));
  // Coefficients supported only in the far corner are gone.
  EXPECT_LT(r.position(s.full_size() - 1), 0);
  EXPECT_GE(r.position(0), 0);

  // The reduced design reproduces the full design's retained columns.
  const Eigen::MatrixXd full = s.design(pts).to_dense();
  const Eigen::MatrixXd red = r.design(pts).to_dense();
  for (std::size_t c = 0; c < r.size(); ++c) {
    EXPECT_EQ(red.col(static_cast<Eigen::Index>(c)), full.col(static_cast<Eigen::Index>(r.retained()[c])));
  }
  EXPECT_NEAR((full.rowwise().sum().array() - 1.0).abs().maxCoeff(), 0.0, 1e-12);
  EXPECT_NEAR((red.rowwise().sum().array() - 1.0).abs().maxCoeff(), 0.0, 1e-12);
}

TEST(Reduce, DropsExactlyRowsTouchingDroppedColumns) {
  std::mt19937_64 rng(6);
  std::normal_distribution<double> nd;
  for (int trial = 0; trial < 40; ++trial) {
    const std::size_t d = 2 + static_cast<std::size_t>(trial % 2);
    const TensorSmooth s = random_smooth(d, rng, 4);
    const TensorSmooth r = s.reduce(uniform_points(s, 1 + rng() % 4, rng, 0.5));
    Eigen::VectorXd beta_red(static_cast<Eigen::Index>(r.size()));
    for (auto& v : beta_red) v = nd(rng);
    Eigen::VectorXd beta_full = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(s.full_size()));
    for (std::size_t c = 0; c < r.size(); ++c) beta_full(static_cast<Eigen::Index>(r.retained()[c])) = beta_red(static_cast<Eigen::Index>(c));

    for (std::size_t j = 0; j < d; ++j) {
      const Eigen::MatrixXd full = s.penalty_sqrts()[j].to_dense();
      double expect = 0.0;
      Eigen::Index kept_rows = 0;
      for (Eigen::Index row = 0; row < full.rows(); ++row) {
        bool clean = true;
        for (Eigen::Index c = 0; c < full.cols(); ++c) {
          if (full(row, c) != 0.0 && r.position(static_cast<std::size_t>(c)) < 0) clean = false;
        }
        if (!clean) continue;
        ++kept_rows;
        const double v = full.row(row).dot(beta_full);
        expect += v * v;
      }
      const Eigen::MatrixXd red = r.penalty_sqrts()[j].to_dense();
      EXPECT_EQ(red.rows(), kept_rows);
      EXPECT_EQ(red.cols(), static_cast<Eigen::Index>(r.size()));
      EXPECT_NEAR((red * beta_red).squaredNorm(), expect, 1e-12 * std::max(1.0, expect));
    }
  }
}

TEST(Reduce, DiffersFromDroppingRowsAndColumnsOfS) {
  // Hats on 4 knots, first-difference-like penalty; data only near the left.
  const TensorSmooth s({bsmooth::make_marginal(bsmooth::make_basis(4, 1, 0.0, 1.0), 1),
                        bsmooth::make_marginal(bsmooth::make_basis(4, 1, 0.0, 1.0), 1)});
  const PointSet pts(2, {0.1, 0.1, 0.2, 0.5, 0.5, 0.2});
  const TensorSmooth r = s.reduce(pts);
  ASSERT_TRUE(r.reduced());
  const Eigen::MatrixXd d0 = s.penalty_sqrts()[0].to_dense();
  const Eigen::MatrixXd s0 = d0.transpose() * d0;
  Eigen::MatrixXd naive(static_cast<Eigen::Index>(r.size()), static_cast<Eigen::Index>(r.size()));
  for (std::size_t a = 0; a < r.size(); ++a) {
    for (std::size_t b = 0; b < r.size(); ++b) {
      naive(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) =
          s0(static_cast<Eigen::Index>(r.retained()[a]), static_cast<Eigen::Index>(r.retained()[b]));
    }
  }
  const Eigen::MatrixXd dr = r.penalty_sqrts()[0].to_dense();
  EXPECT_GT((naive - dr.transpose() * dr).cwiseAbs().maxCoeff(), 1e-6);
}

TEST(Reduce, RepeatedReductionOnlyShrinks) {
  const TensorSmooth s({bsmooth::make_marginal(bsmooth::make_basis(10, 3, 0.0, 1.0), 2),
                        bsmooth::make_marginal(bsmooth::make_basis(10, 3, 0.0, 1.0), 2)});
  const TensorSmooth left = s.reduce(PointSet(2, {0.05, 0.05, 0.1, 0.1}));
  const TensorSmooth both = left.reduce(PointSet(2, {0.05, 0.05}));
  EXPECT_LE(both.size(), left.size());
  for (std::size_t full : both.retained()) EXPECT_GE(left.position(full), 0);
  EXPECT_THROW((void)left.reduce(PointSet(2, {0.95, 0.95})), bsmooth::IdentifiabilityError);
}

TEST(Reduce, Errors) {
  const TensorSmooth s({bsmooth::make_marginal(bsmooth::make_basis(5, 3, 0.0, 1.0), 2)});
  EXPECT_THROW((void)s.reduce(PointSet(1, {})), bsmooth::InvalidArgument);
  EXPECT_THROW((void)s.reduce(PointSet(1, {2.0})), bsmooth::InvalidArgument);
  EXPECT_THROW((void)s.reduce(PointSet(2, {0.5, 0.5})), bsmooth::InvalidArgument);
}

TEST(Reduce, RetainedCsv) {
  const TensorSmooth s({bsmooth::make_marginal(bsmooth::make_basis(2, 1, 0.0, 1.0), 1),
                        bsmooth::make_marginal(bsmooth::make_basis(3, 1, 0.0, 1.0), 1)});
  std::ostringstream os;
  bsmooth::write_retained_csv(os, s);
  EXPECT_EQ(os.str(), "index,i1,i2\n0,0,0\n1,0,1\n2,0,2\n3,1,0\n4,1,1\n5,1,2\n");
}

}  // namespace
