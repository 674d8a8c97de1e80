#pragma once

// Directed-edge recovery scores under a magnitude threshold.

#include <Eigen/Dense>

#include <cmath>

#include "dcl/matcore.hpp"

namespace dcl {

using Support = Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic>;

struct EdgeMetrics {
  int tp = 0;
  int fp = 0;
  int fn = 0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  int shd = 0;
};

/// Entry (i, j) is an edge iff |B_ij| >= tau and B_ij != 0; the diagonal is never an edge.
inline Support directed_support(const Matrix& b, double tau) {
  Support s = Support::Constant(b.rows(), b.cols(), false);
  for (Index j = 0; j < b.cols(); ++j)
    for (Index i = 0; i < b.rows(); ++i)
      s(i, j) = i != j && b(i, j) != 0.0 && std::abs(b(i, j)) >= tau;
  return s;
}

/// Precision/recall/F1 over ordered pairs. SHD over unordered pairs: a pair
/// whose edge is missing, extra, or reversed costs 1.
inline EdgeMetrics score(const Support& est, const Support& truth) {
  if (est.rows() != truth.rows() || est.cols() != truth.cols())
    throw std::invalid_argument("score: support dimensions differ");
  EdgeMetrics m;
  const Index p = est.rows();
  for (Index i = 0; i < p; ++i)
    for (Index j = 0; j < p; ++j) {
      if (i == j) continue;
      if (est(i, j) && truth(i, j)) ++m.tp;
      if (est(i, j) && !truth(i, j)) ++m.fp;
      if (!est(i, j) && truth(i, j)) ++m.fn;
    }
  m.precision = (m.tp + m.fp) > 0 ? double(m.tp) / (m.tp + m.fp) : 0.0;
  m.recall = (m.tp + m.fn) > 0 ? double(m.tp) / (m.tp + m.fn) : 0.0;
  m.f1 = (m.precision + m.recall) > 0.0 ? 2.0 * m.precision * m.recall / (m.precision + m.recall) : 0.0;

  for (Index i = 0; i < p; ++i)
    for (Index j = i + 1; j < p; ++j) {
      // Pair state: 0 none, 1 i->j, 2 j->i, 3 both.
      const int e = (est(i, j) ? 1 : 0) | (est(j, i) ? 2 : 0);
      const int t = (truth(i, j) ? 1 : 0) | (truth(j, i) ? 2 : 0);
      if (e != t) ++m.shd;
    }
  return m;
}

inline EdgeMetrics score(const Matrix& b_est, const Matrix& b_true, double tau) {
  return score(directed_support(b_est, tau), directed_support(b_true, 0.0));
}

}  // namespace dcl
