#pragma once

#include <gtest/gtest.h>

#include "dcl/matcore.hpp"
#include "dcl/rng.hpp"
#include "dcl/simulator.hpp"

namespace dcl::testing {

inline Matrix random_matrix(Index r, Index c, Rng& rng) {
  Matrix m(r, c);
  for (Index j = 0; j < c; ++j)
    for (Index i = 0; i < r; ++i) m(i, j) = rng.normal();
  return m;
}

inline SymMatrix random_symmetric(Index p, Rng& rng) {
  const Matrix a = random_matrix(p, p, rng);
  return SymMatrix(Matrix(0.5 * (a + a.transpose())));
}

/// A A^T / p + floor I.
inline SymMatrix random_spd(Index p, Rng& rng, double floor = 0.1) {
  const Matrix a = random_matrix(p, p, rng);
  return SymMatrix(Matrix(a * a.transpose() / static_cast<double>(p) + floor * Matrix::Identity(p, p)));
}

/// Strictly upper-triangular weights in a random order.
inline Matrix random_dag(Index p, double density, Rng& rng, double lo = 0.5, double hi = 2.0) {
  const auto order = rng.permutation(static_cast<int>(p));
  Matrix b = Matrix::Zero(p, p);
  for (Index a = 0; a < p; ++a)
    for (Index c = a + 1; c < p; ++c)
      if (rng.bernoulli(density)) {
        const double w = rng.uniform(lo, hi) * (rng.bernoulli(0.5) ? 1.0 : -1.0);
        b(order[static_cast<size_t>(a)], order[static_cast<size_t>(c)]) = w;
      }
  return b;
}

/// Simulator model with small p for property sweeps.
inline GroundTruthModel small_model(int p, std::uint64_t seed, int q_P = 1, double U_d = 1.0, int r_S = 2,
                                    int s_active = 3) {
  SimConfig cfg;
  cfg.p = p;
  cfg.edge_density = 0.3;
  cfg.q_P = q_P;
  cfg.U_d = U_d;
  cfg.r_S = r_S;
  cfg.s_active = std::min(s_active, p);
  cfg.seed = seed;
  Rng rng(seed);
  return sample_model(cfg, rng);
}

inline double rel_err(const Matrix& a, const Matrix& b) {
  const double nb = b.norm();
  return (a - b).norm() / (nb > 0.0 ? nb : 1.0);
}

}  // namespace dcl::testing
