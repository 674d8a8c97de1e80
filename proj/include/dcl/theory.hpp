#pragma once

// Executable structural results for the D-C-L model, used as test oracles:
// Woodbury/congruence identities, exact locality under disjoint confounder
// supports, the overlap leakage bound, sparsity propagation under
// T-congruence, the moral graph of an unconfounded SEM, and brute-force
// enumeration of sparsest bow-free parameterizations for p <= 3.

#include <algorithm>
#include <cmath>
#include <optional>
#include <vector>

#include "dcl/metrics.hpp"
#include "dcl/simulator.hpp"

namespace dcl {

/// Magnitude above which an entry counts as structurally nonzero.
inline constexpr double kStructuralZero = 1e-10;

inline double rel_frobenius(const Matrix& a, const Matrix& b) {
  const double nb = b.norm();
  return (a - b).norm() / (nb > 0.0 ? nb : 1.0);
}

struct IdentityResiduals {
  double woodbury = 0.0;        // |Omega^{-1} - (S_eps - L_eps)| / |Omega^{-1}|
  double structured = 0.0;      // |S_eps - (WW^T + VV^T)^{-1}| / |S_eps|
  double congruence = 0.0;      // |Theta - (S_x - L_x)| / |Theta|
  double conditional = 0.0;     // |Sigma_cond^{-1} - T S_eps T^T| / |T S_eps T^T|
  double max() const { return std::max({woodbury, structured, congruence, conditional}); }
};

/// Each identity is checked against a direct computation that does not reuse
/// the decomposition being checked.
inline IdentityResiduals dcl_identity_residuals(const GroundTruthModel& m) {
  const PopulationComponents pc = population_components(m);
  IdentityResiduals r;
  const Matrix omega_inv = inv_spd(pc.Omega).mat();
  r.woodbury = rel_frobenius(pc.S_eps.mat() - pc.L_eps.mat(), omega_inv);
  r.structured = rel_frobenius(inv_spd(pc.Gamma_eps).mat(), pc.S_eps.mat());
  r.congruence = rel_frobenius(pc.S_x.mat() - pc.L_x.mat(), pc.Theta.mat());
  // Conditional covariance from the conditional SEM itself: T^{-T} Gamma T^{-1}.
  const Matrix tinv = pc.T.partialPivLu().inverse();
  const SymMatrix sigma_cond(Matrix(tinv.transpose() * pc.Gamma_eps.mat() * tinv));
  const Matrix tst = pc.T * pc.S_eps.mat() * pc.T.transpose();
  r.conditional = rel_frobenius(inv_spd(sigma_cond).mat(), tst);
  return r;
}

inline double dcl_identity_check(const GroundTruthModel& m) { return dcl_identity_residuals(m).max(); }

// ---------------------------------------------------------------------------

/// Off-diagonal entries of S_eps above the structural threshold, per row.
inline std::vector<int> locality_count(const GroundTruthModel& m) {
  const PopulationComponents pc = population_components(m);
  std::vector<int> counts(static_cast<size_t>(m.p), 0);
  for (Index i = 0; i < m.p; ++i)
    for (Index j = 0; j < m.p; ++j)
      if (i != j && std::abs(pc.S_eps(i, j)) > kStructuralZero) ++counts[static_cast<size_t>(i)];
  return counts;
}

struct SupportLayout {
  bool disjoint = true;
  int s = 0;  // largest column support
  int c = 0;  // largest number of supports a row belongs to
  int bound() const { return c * std::max(s - 1, 0); }
};

inline SupportLayout support_layout(const Matrix& v) {
  SupportLayout out;
  std::vector<int> membership(static_cast<size_t>(v.rows()), 0);
  for (Index k = 0; k < v.cols(); ++k) {
    int size = 0;
    for (Index i = 0; i < v.rows(); ++i)
      if (v(i, k) != 0.0) {
        ++size;
        ++membership[static_cast<size_t>(i)];
      }
    out.s = std::max(out.s, size);
  }
  for (int c : membership) {
    out.c = std::max(out.c, c);
    if (c > 1) out.disjoint = false;
  }
  return out;
}

// ---------------------------------------------------------------------------

struct LeakageParams {
  int m = 0;
  double eta = 0.0;
  double tau_min = 0.0;
  double rho = 0.0;
};

struct LeakageResult {
  LeakageParams params;
  std::optional<double> bound;  // defined only when rho < 1
  double actual = 0.0;          // |A^{-1}|_{off,inf}
};

/// Overlap leakage: with A = I + V^T D V, bounds the largest off-diagonal row
/// sum of A^{-1} by rho / (tau_min (1 - rho)), rho = m eta / tau_min.
inline LeakageResult leakage_bound(const Matrix& v, const Vector& d_eps) {
  const Index r = v.cols();
  LeakageResult out;
  const SymMatrix a(Matrix(Matrix::Identity(r, r) + v.transpose() * d_eps.asDiagonal() * v));
  if (r == 0) {
    out.bound = 0.0;
    return out;
  }
  out.params.tau_min = a.diag().minCoeff();
  for (Index j = 0; j < r; ++j) {
    int overlaps = 0;
    for (Index k = 0; k < r; ++k) {
      if (k == j) continue;
      out.params.eta = std::max(out.params.eta, std::abs(a(j, k)));
      bool meet = false;
      for (Index i = 0; i < v.rows() && !meet; ++i) meet = v(i, j) != 0.0 && v(i, k) != 0.0;
      if (meet) ++overlaps;
    }
    out.params.m = std::max(out.params.m, overlaps);
  }
  out.params.rho = out.params.m * out.params.eta / out.params.tau_min;

  const Matrix ainv = inv_spd(a).mat();
  for (Index j = 0; j < r; ++j) out.actual = std::max(out.actual, ainv.row(j).cwiseAbs().sum() - std::abs(ainv(j, j)));

  if (out.params.rho < 1.0) {
    out.bound = out.params.rho / (out.params.tau_min * (1.0 - out.params.rho));
    if (out.actual > *out.bound + 1e-10) throw std::logic_error("leakage_bound: inequality violated");
  }
  return out;
}

// ---------------------------------------------------------------------------

enum class StructureCase { RowSparse, Banded, Block };

struct CongruenceCheck {
  int observed = 0;
  int bound = 0;
  bool holds = true;
};

namespace detail {
inline bool nz(double x) { return std::abs(x) > kStructuralZero; }

inline int max_degree(const Matrix& b) {
  int d = 0;
  for (Index i = 0; i < b.rows(); ++i) {
    int deg = 0;
    for (Index j = 0; j < b.cols(); ++j) deg += (i != j && (nz(b(i, j)) || nz(b(j, i)))) ? 1 : 0;
    d = std::max(d, deg);
  }
  return d;
}

inline int bandwidth(const Matrix& m) {
  int bw = 0;
  for (Index i = 0; i < m.rows(); ++i)
    for (Index j = 0; j < m.cols(); ++j)
      if (nz(m(i, j))) bw = std::max(bw, static_cast<int>(std::abs(i - j)));
  return bw;
}
}  // namespace detail

/// Structure of T M T^T against the bound implied by the structure of M and
/// the DAG, with T = I - B:
///  - RowSparse: max row nnz of T M T^T vs (k + 1)(1 + d)^2, k the max
///    off-diagonal row nnz of M and d the max (in + out) degree of B.
///  - Banded: bandwidth of T M T^T vs b + 2 d_DAG.
///  - Block: for every off-diagonal block (a, b), nnz vs c_a |b| + c_b |a|,
///    c_x the number of nodes of block x with an edge leaving the block.
///    Reported observed/bound are the maxima over blocks.
inline CongruenceCheck congruence_sparsity_bound(const SymMatrix& m_eps, const Matrix& b, StructureCase kind,
                                                 const std::vector<int>& partition = {}) {
  const Index p = b.rows();
  const Matrix t = Matrix::Identity(p, p) - b;
  const Matrix mx = t * m_eps.mat() * t.transpose();
  CongruenceCheck out;
  switch (kind) {
    case StructureCase::RowSparse: {
      int k = 0;
      for (Index i = 0; i < p; ++i) {
        int row = 0, row_x = 0;
        for (Index j = 0; j < p; ++j) {
          if (i != j && detail::nz(m_eps(i, j))) ++row;
          if (detail::nz(mx(i, j))) ++row_x;
        }
        k = std::max(k, row);
        out.observed = std::max(out.observed, row_x);
      }
      const int d = detail::max_degree(b);
      out.bound = (k + 1) * (1 + d) * (1 + d);
      out.holds = out.observed <= out.bound;
      break;
    }
    case StructureCase::Banded: {
      int d_dag = 0;
      for (Index i = 0; i < p; ++i)
        for (Index j = 0; j < p; ++j)
          if (detail::nz(b(i, j))) d_dag = std::max(d_dag, static_cast<int>(std::abs(i - j)));
      out.observed = detail::bandwidth(mx);
      out.bound = detail::bandwidth(m_eps.mat()) + 2 * d_dag;
      out.holds = out.observed <= out.bound;
      break;
    }
    case StructureCase::Block: {
      if (static_cast<Index>(partition.size()) != p)
        throw std::invalid_argument("congruence_sparsity_bound: partition must label every variable");
      const int nblocks = *std::max_element(partition.begin(), partition.end()) + 1;
      std::vector<int> size(static_cast<size_t>(nblocks), 0), leaving(static_cast<size_t>(nblocks), 0);
      for (Index i = 0; i < p; ++i) {
        const int a = partition[static_cast<size_t>(i)];
        ++size[static_cast<size_t>(a)];
        bool out_edge = false;
        for (Index j = 0; j < p; ++j)
          if (detail::nz(b(i, j)) && partition[static_cast<size_t>(j)] != a) out_edge = true;
        if (out_edge) ++leaving[static_cast<size_t>(a)];
      }
      std::vector<int> counts(static_cast<size_t>(nblocks * nblocks), 0);
      for (Index i = 0; i < p; ++i)
        for (Index j = 0; j < p; ++j) {
          const int a = partition[static_cast<size_t>(i)], c = partition[static_cast<size_t>(j)];
          if (a != c && detail::nz(mx(i, j))) ++counts[static_cast<size_t>(a * nblocks + c)];
        }
      for (int a = 0; a < nblocks; ++a)
        for (int c = 0; c < nblocks; ++c) {
          if (a == c) continue;
          const int obs = counts[static_cast<size_t>(a * nblocks + c)];
          const int bnd = leaving[static_cast<size_t>(a)] * size[static_cast<size_t>(c)] +
                          leaving[static_cast<size_t>(c)] * size[static_cast<size_t>(a)];
          out.observed = std::max(out.observed, obs);
          out.bound = std::max(out.bound, bnd);
          out.holds = out.holds && obs <= bnd;
        }
      break;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------

/// Skeleton of B plus an edge between every pair of co-parents; symmetric,
/// diagonal false.
inline Support moralized_support(const Matrix& b) {
  const Index p = b.rows();
  Support s = Support::Constant(p, p, false);
  for (Index i = 0; i < p; ++i)
    for (Index j = 0; j < p; ++j)
      if (i != j && b(i, j) != 0.0) s(i, j) = s(j, i) = true;
  for (Index child = 0; child < p; ++child)
    for (Index a = 0; a < p; ++a)
      for (Index c = a + 1; c < p; ++c)
        if (a != child && c != child && b(a, child) != 0.0 && b(c, child) != 0.0) s(a, c) = s(c, a) = true;
  return s;
}

// ---------------------------------------------------------------------------

struct BowFreeGrid {
  std::vector<double> weights;  // nonzero candidate values for each directed edge
  double match_tol = 1e-3;

  /// k / 20 for k = -40..40, k != 0.
  static BowFreeGrid standard() {
    BowFreeGrid g;
    for (int k = -40; k <= 40; ++k)
      if (k != 0) g.weights.push_back(k / 20.0);
    return g;
  }
};

struct BowFreeCandidate {
  Matrix B;
  SymMatrix Gamma;
  int support_size = 0;  // |B|_0 + number of bidirected pairs
  double residual = 0.0;
};

/// Support size of a mixed graph: directed edges plus unordered bidirected pairs.
inline int admg_support_size(const Matrix& b, const SymMatrix& gamma) {
  int size = 0;
  const Index p = b.rows();
  for (Index i = 0; i < p; ++i)
    for (Index j = 0; j < p; ++j) {
      if (i != j && b(i, j) != 0.0) ++size;
      if (i < j && gamma(i, j) != 0.0) ++size;
    }
  return size;
}

/// All bow-free (B, Gamma) with B on the grid whose implied covariance
/// T^{-T} Gamma T^{-1} matches sigma_cond within match_tol (Frobenius), sorted
/// by support size then residual. For each B, Gamma is the exact residual
/// covariance T^T sigma_cond T with the bow pairs zeroed and, optionally, any
/// further off-diagonal entries zeroed.
inline std::vector<BowFreeCandidate> enumerate_bow_free(const SymMatrix& sigma_cond, const BowFreeGrid& grid) {
  const Index p = sigma_cond.dim();
  if (p < 1 || p > 3) throw std::invalid_argument("enumerate_bow_free: requires 1 <= p <= 3");
  std::vector<std::pair<Index, Index>> pairs;
  for (Index i = 0; i < p; ++i)
    for (Index j = i + 1; j < p; ++j) pairs.emplace_back(i, j);
  const int npairs = static_cast<int>(pairs.size());

  std::vector<BowFreeCandidate> out;
  const auto consider = [&](const Matrix& b) {
    const Matrix t = Matrix::Identity(p, p) - b;
    const Matrix gamma = t.transpose() * sigma_cond.mat() * t;
    const Matrix tinv = t.partialPivLu().inverse();
    for (int mask = 0; mask < (1 << npairs); ++mask) {
      Matrix g = gamma;
      bool valid = true;
      for (int k = 0; k < npairs; ++k) {
        const auto [i, j] = pairs[static_cast<size_t>(k)];
        const bool directed = b(i, j) != 0.0 || b(j, i) != 0.0;
        const bool zero = (mask >> k) & 1;
        if (directed && !zero) valid = false;  // bow
        if (zero) g(i, j) = g(j, i) = 0.0;
      }
      if (!valid) continue;
      const SymMatrix gs(g);
      if (!check_spd(gs).is_spd) continue;
      const double resid = (tinv.transpose() * g * tinv - sigma_cond.mat()).norm();
      if (resid > grid.match_tol) continue;
      out.push_back({b, gs, admg_support_size(b, gs), resid});
    }
  };

  // Directed patterns: each pair is absent, i -> j, or j -> i.
  int patterns = 1;
  for (int k = 0; k < npairs; ++k) patterns *= 3;
  for (int code = 0; code < patterns; ++code) {
    std::vector<std::pair<Index, Index>> edges;
    int c = code;
    for (int k = 0; k < npairs; ++k, c /= 3) {
      const auto [i, j] = pairs[static_cast<size_t>(k)];
      if (c % 3 == 1) edges.emplace_back(i, j);
      if (c % 3 == 2) edges.emplace_back(j, i);
    }
    Matrix pattern = Matrix::Zero(p, p);
    for (auto [i, j] : edges) pattern(i, j) = 1.0;
    if (!is_acyclic_support(pattern)) continue;

    const size_t nw = grid.weights.size();
    std::vector<size_t> idx(edges.size(), 0);
    Matrix b = Matrix::Zero(p, p);
    for (;;) {
      for (size_t e = 0; e < edges.size(); ++e) b(edges[e].first, edges[e].second) = grid.weights[idx[e]];
      consider(b);
      size_t e = 0;
      while (e < idx.size() && ++idx[e] == nw) idx[e++] = 0;
      if (e == idx.size()) break;
    }
  }
  if (out.empty()) throw GridTooCoarse("enumerate_bow_free: no grid point reproduces the covariance");
  std::stable_sort(out.begin(), out.end(), [](const BowFreeCandidate& x, const BowFreeCandidate& y) {
    if (x.support_size != y.support_size) return x.support_size < y.support_size;
    return x.residual < y.residual;
  });
  return out;
}

}  // namespace dcl
