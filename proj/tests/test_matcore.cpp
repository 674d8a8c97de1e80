#include <unsupported/Eigen/MatrixFunctions>

#include <cmath>

#include "test_support.hpp"

using namespace dcl;
using namespace dcl::testing;

TEST(SymMatrix, SymmetricByConstruction) {
  Matrix a(2, 2);
  a << 1, 2, 5, 3;
  const SymMatrix s(a);
  EXPECT_EQ(s(0, 1), 2.0);
  EXPECT_EQ(s(1, 0), 2.0);
  SymMatrix t = SymMatrix::identity(3);
  t.set(2, 0, -1.5);
  EXPECT_EQ(t(0, 2), -1.5);
  EXPECT_THROW(SymMatrix(Matrix::Zero(2, 3)), std::invalid_argument);
}

TEST(Cholesky, Examples) {
  EXPECT_TRUE(cholesky(SymMatrix::identity(3)).isApprox(Matrix::Identity(3, 3)));
  Matrix m(2, 2);
  m << 4, 2, 2, 3;
  const Matrix l = cholesky(SymMatrix(m));
  Matrix expect(2, 2);
  expect << 2, 0, 1, std::sqrt(2.0);
  EXPECT_LE((l - expect).norm(), 1e-12);
  EXPECT_LE((l * l.transpose() - m).norm(), 1e-10 * m.norm());
  Matrix bad(2, 2);
  bad << 1, 2, 2, 1;
  EXPECT_THROW(cholesky(SymMatrix(bad)), NotSpd);
  EXPECT_FALSE(try_cholesky(SymMatrix(bad)).has_value());
}

TEST(Cholesky, NotSpdCarriesMinEigenvalue) {
  Matrix bad(2, 2);
  bad << 1, 2, 2, 1;
  try {
    inv_spd(SymMatrix(bad));
    FAIL();
  } catch (const NotSpd& e) {
    EXPECT_NEAR(e.min_eigenvalue(), -1.0, 1e-12);
  }
}

TEST(Cholesky, RandomReconstruction) {
  Rng rng(1);
  for (int t = 0; t < 20; ++t) {
    const SymMatrix m = random_spd(8, rng);
    const Matrix l = cholesky(m);
    EXPECT_LE((l * l.transpose() - m.mat()).norm(), 1e-10 * m.mat().norm());
    EXPECT_TRUE(l.isLowerTriangular());
  }
}

TEST(InvSpd, Examples) {
  EXPECT_LE((inv_spd(SymMatrix::identity(4)).mat() - Matrix::Identity(4, 4)).norm(), 1e-14);
  Vector d(2);
  d << 2, 0.5;
  Matrix expect = Matrix::Zero(2, 2);
  expect.diagonal() << 0.5, 2;
  EXPECT_LE((inv_spd(SymMatrix::diagonal(d)).mat() - expect).norm(), 1e-14);
  Matrix m(2, 2);
  m << 2, 1, 1, 2;
  Matrix inv(2, 2);
  inv << 2, -1, -1, 2;
  inv /= 3.0;
  EXPECT_LE((inv_spd(SymMatrix(m)).mat() - inv).norm(), 1e-14);
}

TEST(InvSpd, PropertiesOverRandomInputs) {
  Rng rng(2);
  for (int t = 0; t < 50; ++t) {
    const Index p = 2 + static_cast<Index>(rng.below(12));
    const SymMatrix m = random_spd(p, rng);
    const SymMatrix r = inv_spd(m);
    EXPECT_LE((m.mat() * r.mat() - Matrix::Identity(p, p)).norm(), 1e-8 * p);
    EXPECT_LE((inv_spd(r).mat() - m.mat()).norm(), 1e-6 * m.mat().norm());
  }
}

TEST(EigSym, Examples) {
  Vector d(3);
  d << 3, 1, 2;
  const SymEigen e = eig_sym(SymMatrix::diagonal(d));
  EXPECT_DOUBLE_EQ(e.values(0), 3.0);
  EXPECT_DOUBLE_EQ(e.values(1), 2.0);
  EXPECT_DOUBLE_EQ(e.values(2), 1.0);
  Matrix x(2, 2);
  x << 0, 1, 1, 0;
  const SymEigen f = eig_sym(SymMatrix(x));
  EXPECT_NEAR(f.values(0), 1.0, 1e-14);
  EXPECT_NEAR(f.values(1), -1.0, 1e-14);
}

TEST(EigSym, RandomReconstruction) {
  Rng rng(7);
  const SymMatrix m = random_symmetric(5, rng);
  const SymEigen e = eig_sym(m);
  const Matrix& v = e.vectors;
  EXPECT_LE((v * e.values.asDiagonal() * v.transpose() - m.mat()).norm(), 1e-8 * m.mat().norm());
  EXPECT_LE((v.transpose() * v - Matrix::Identity(5, 5)).norm(), 1e-8);
  for (Index k = 1; k < 5; ++k) EXPECT_GE(e.values(k - 1), e.values(k));
}

TEST(PsdProject, Examples) {
  EXPECT_LE((psd_project(SymMatrix::identity(2)).mat() - Matrix::Identity(2, 2)).norm(), 1e-14);
  Vector d(2);
  d << 1, -1;
  Matrix expect = Matrix::Zero(2, 2);
  expect(0, 0) = 1;
  EXPECT_LE((psd_project(SymMatrix::diagonal(d)).mat() - expect).norm(), 1e-14);
  Matrix x(2, 2);
  x << 0, 1, 1, 0;
  EXPECT_LE((psd_project(SymMatrix(x)).mat() - Matrix::Constant(2, 2, 0.5)).norm(), 1e-14);
}

TEST(PsdProject, Properties) {
  Rng rng(3);
  for (int t = 0; t < 30; ++t) {
    const SymMatrix m = random_symmetric(6, rng);
    const SymMatrix p1 = psd_project(m);
    EXPECT_GE(min_eigenvalue(p1), -1e-10);
    EXPECT_LE((psd_project(p1).mat() - p1.mat()).norm(), 1e-10);
    // Optimality: no PSD matrix in a random direction from p1 is closer.
    for (int k = 0; k < 5; ++k) {
      const SymMatrix q = psd_project(random_symmetric(6, rng));
      const Matrix cand = 0.9 * p1.mat() + 0.1 * q.mat();
      EXPECT_LE((p1.mat() - m.mat()).norm(), (cand - m.mat()).norm() + 1e-12);
    }
    const SymMatrix spd = random_spd(6, rng);
    EXPECT_LE((psd_project(spd).mat() - spd.mat()).norm(), 1e-10);
  }
}

TEST(Acyclicity, Examples) {
  const AcyclicityValue z = acyclicity(Matrix::Zero(4, 4));
  EXPECT_EQ(z.h, 0.0);
  EXPECT_EQ(z.grad.norm(), 0.0);
  Matrix b = Matrix::Zero(3, 3);
  b(0, 1) = 0.7;
  EXPECT_NEAR(acyclicity(b).h, 0.0, 1e-12);
  Matrix c(2, 2);
  c << 0, 1, 1, 0;
  EXPECT_NEAR(acyclicity(c).h, 2.0 * std::cosh(1.0) - 2.0, 1e-12);
  EXPECT_NEAR(acyclicity(c).h, 1.08616, 1e-5);
}

TEST(Acyclicity, ZeroExactlyOnDags) {
  Rng rng(4);
  for (int t = 0; t < 50; ++t) {
    const Index p = 2 + static_cast<Index>(rng.below(10));
    Matrix b = random_dag(p, 0.4, rng);
    EXPECT_LE(acyclicity(b).h, 1e-9);
    EXPECT_TRUE(is_acyclic_support(b));
    // Close a cycle along the topological order when there is an edge.
    const auto order = topological_order(b);
    ASSERT_TRUE(order.has_value());
    Index i = -1, j = -1;
    for (Index a = 0; a < p && i < 0; ++a)
      for (Index c = 0; c < p; ++c)
        if (b(a, c) != 0.0) {
          i = a, j = c;
          break;
        }
    if (i < 0) continue;
    b(j, i) = 0.5;
    EXPECT_GT(acyclicity(b).h, 1e-9);
    EXPECT_FALSE(is_acyclic_support(b));
  }
}

TEST(Acyclicity, GradientMatchesFiniteDifferences) {
  Rng rng(5);
  for (int t = 0; t < 20; ++t) {
    const Index p = 3 + static_cast<Index>(rng.below(5));
    Matrix b = 0.5 * random_matrix(p, p, rng);
    const AcyclicityValue v = acyclicity(b);
    for (Index i = 0; i < p; ++i)
      for (Index j = 0; j < p; ++j) {
        Matrix bp = b, bm = b;
        bp(i, j) += 1e-5;
        bm(i, j) -= 1e-5;
        const double fd = (acyclicity_value(bp) - acyclicity_value(bm)) / 2e-5;
        EXPECT_LE(std::abs(fd - v.grad(i, j)), 1e-4 * std::max(1.0, std::abs(fd)));
      }
  }
}

TEST(Acyclicity, PermutationInvariant) {
  Rng rng(6);
  for (int t = 0; t < 20; ++t) {
    const int p = 6;
    const Matrix b = 0.6 * random_matrix(p, p, rng);
    const auto perm = rng.permutation(p);
    Matrix pm = Matrix::Zero(p, p);
    for (int k = 0; k < p; ++k) pm(perm[static_cast<size_t>(k)], k) = 1.0;
    EXPECT_NEAR(acyclicity_value(pm.transpose() * b * pm), acyclicity_value(b), 1e-9);
  }
}

TEST(Expm, AgreesWithIndependentImplementation) {
  Rng rng(8);
  for (double scale : {0.01, 0.3, 1.0, 3.0, 10.0}) {
    for (int t = 0; t < 5; ++t) {
      const Matrix a = scale * random_matrix(7, 7, rng);
      const Matrix ref = a.exp();
      EXPECT_LE((expm(a) - ref).norm(), 1e-11 * std::max(1.0, ref.norm())) << "scale " << scale;
    }
  }
  EXPECT_TRUE(expm(Matrix::Zero(3, 3)).isApprox(Matrix::Identity(3, 3)));
}

TEST(SoftThreshold, Examples) {
  Matrix m(2, 2);
  m << 1, -2, 3, 0.1;
  Matrix expect(2, 2);
  expect << 0.5, -1.5, 2.5, 0;
  EXPECT_LE((soft_threshold(m, 0.5, false) - expect).norm(), 1e-15);
  EXPECT_EQ(soft_threshold(m, 0.0, false), m);
  Matrix d(2, 2);
  d << 5, 0.3, 0.3, 5;
  Matrix de(2, 2);
  de << 5, 0, 0, 5;
  EXPECT_EQ(soft_threshold(d, 0.4, true), de);
}

TEST(SoftThreshold, NonExpansive) {
  Rng rng(9);
  for (int t = 0; t < 100; ++t) {
    const Matrix a = random_matrix(4, 4, rng), b = random_matrix(4, 4, rng);
    const double th = rng.uniform(0.0, 2.0);
    EXPECT_LE((soft_threshold(a, th, false) - soft_threshold(b, th, false)).norm(), (a - b).norm() + 1e-14);
  }
}

TEST(CheckSpd, ConsistentWithMinEigenvalue) {
  Rng rng(10);
  for (int t = 0; t < 30; ++t) {
    const SymMatrix m = random_symmetric(5, rng);
    const SpdCheckResult r = check_spd(m);
    EXPECT_EQ(r.is_spd, r.min_eigenvalue > 0.0);
  }
}

TEST(TopologicalOrder, RespectsEdges) {
  Rng rng(11);
  const Matrix b = random_dag(9, 0.5, rng);
  const auto order = topological_order(b);
  ASSERT_TRUE(order);
  std::vector<Index> pos(9);
  for (size_t k = 0; k < order->size(); ++k) pos[static_cast<size_t>((*order)[k])] = static_cast<Index>(k);
  for (Index i = 0; i < 9; ++i)
    for (Index j = 0; j < 9; ++j)
      if (b(i, j) != 0.0) {
        EXPECT_LT(pos[static_cast<size_t>(i)], pos[static_cast<size_t>(j)]);
      }
}
