#pragma once

// Ground-truth linear SEMs with mixed latent confounding, and data drawn from them.
//
//   x = B^T x + eps,   eps = W w + V v + U u,   T = I - B
//
// W is diagonal (idiosyncratic scales), V holds column-sparse localized
// loadings, U holds dense pervasive loadings. Edge i -> j is stored at B(i, j).

#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>

#include "dcl/matcore.hpp"
#include "dcl/rng.hpp"

namespace dcl {

struct SimConfig {
  int p = 40;
  double edge_density = 0.08;
  double weight_lo = 0.5;
  double weight_hi = 2.0;
  double idio_variance = 0.36;
  int r_S = 15;  // number of localized confounders (q)
  int s_active = 6;
  double v_loading_sd = 0.3;
  int q_P = 0;
  double U_d = 0.0;
  int n = 600;
  std::uint64_t seed = 0;

  void validate() const {
    if (p < 1) throw std::invalid_argument("SimConfig: p must be positive");
    if (!(edge_density >= 0.0 && edge_density <= 1.0))
      throw std::invalid_argument("SimConfig: edge_density must lie in [0, 1]");
    if (!(weight_lo > 0.0 && weight_hi >= weight_lo))
      throw std::invalid_argument("SimConfig: weight range must satisfy 0 < lo <= hi");
    if (!(idio_variance > 0.0)) throw std::invalid_argument("SimConfig: idio_variance must be positive");
    if (r_S < 0 || q_P < 0 || n < 0) throw std::invalid_argument("SimConfig: counts must be non-negative");
    if (r_S > 0 && (s_active < 1 || s_active > p))
      throw std::invalid_argument("SimConfig: s_active must lie in [1, p]");
    if (!(v_loading_sd >= 0.0) || !(U_d >= 0.0))
      throw std::invalid_argument("SimConfig: loading scales must be non-negative");
  }
};

/// Localized-confounder count for a localized density level: round(L_d * 5p).
inline int localized_count(double L_d, int p) { return static_cast<int>(std::lround(L_d * 5.0 * p)); }

struct GroundTruthModel {
  int p = 0;
  Matrix B;   // p x p
  Vector W;   // p, idiosyncratic standard deviations
  Matrix V;   // p x r_S
  Matrix U;   // p x r_L
  std::uint64_t seed = 0;

  Matrix T() const { return Matrix::Identity(p, p) - B; }
  Index r_S() const { return V.cols(); }
  Index r_L() const { return U.cols(); }
};

struct GridCell {
  int q_P = 0;
  double U_d = 0.0;
  double L_d = 0.0;
  int rep = 0;
};

struct Dataset {
  Matrix X;
  std::optional<GroundTruthModel> model;
  std::optional<GridCell> grid_cell;

  Index n() const { return X.rows(); }
  Index p() const { return X.cols(); }
};

/// Random causal order; each order-respecting pair is an edge with probability
/// edge_density and weight +-Unif(weight_lo, weight_hi).
inline Matrix sample_dag(const SimConfig& cfg, Rng& rng) {
  const int p = cfg.p;
  Matrix b = Matrix::Zero(p, p);
  const std::vector<int> order = rng.permutation(p);
  for (int a = 0; a < p; ++a) {
    for (int c = a + 1; c < p; ++c) {
      if (!rng.bernoulli(cfg.edge_density)) continue;
      const double mag = rng.uniform(cfg.weight_lo, cfg.weight_hi);
      const double sign = rng.bernoulli(0.5) ? 1.0 : -1.0;
      b(order[static_cast<size_t>(a)], order[static_cast<size_t>(c)]) = sign * mag;
    }
  }
  return b;
}

struct Loadings {
  Matrix V;
  Matrix U;
};

inline Loadings sample_loadings(const SimConfig& cfg, Rng& rng) {
  const int p = cfg.p;
  Loadings out{Matrix::Zero(p, cfg.r_S), Matrix::Zero(p, cfg.q_P)};
  for (int k = 0; k < cfg.r_S; ++k) {
    for (int row : rng.sample_without_replacement(p, cfg.s_active)) {
      double val = rng.normal(0.0, cfg.v_loading_sd);
      // An exact zero would drop the row from the support.
      while (val == 0.0 && cfg.v_loading_sd > 0.0) val = rng.normal(0.0, cfg.v_loading_sd);
      out.V(row, k) = val;
    }
  }
  const double u_sd = cfg.U_d / std::sqrt(static_cast<double>(p));
  for (int k = 0; k < cfg.q_P; ++k)
    for (int i = 0; i < p; ++i) out.U(i, k) = rng.normal(0.0, u_sd);
  return out;
}

/// Deletes every directed edge between two variables that share a localized
/// confounder. Pervasive loadings are not considered.
inline Matrix enforce_bow_free_localized(const Matrix& b, const Matrix& v) {
  Matrix out = b;
  const Index p = v.rows();
  for (Index k = 0; k < v.cols(); ++k) {
    for (Index i = 0; i < p; ++i) {
      if (v(i, k) == 0.0) continue;
      for (Index j = i + 1; j < p; ++j) {
        if (v(j, k) == 0.0) continue;
        out(i, j) = 0.0;
        out(j, i) = 0.0;
      }
    }
  }
  return out;
}

inline bool is_bow_free_localized(const Matrix& b, const Matrix& v) {
  const Index p = v.rows();
  for (Index k = 0; k < v.cols(); ++k)
    for (Index i = 0; i < p; ++i)
      for (Index j = 0; j < p; ++j)
        if (i != j && v(i, k) != 0.0 && v(j, k) != 0.0 && b(i, j) != 0.0) return false;
  return true;
}

/// Model draw from `rng`: DAG, then loadings, then localized bow removal.
inline GroundTruthModel sample_model(const SimConfig& cfg, Rng& rng) {
  cfg.validate();
  GroundTruthModel m;
  m.p = cfg.p;
  m.seed = cfg.seed;
  const Matrix b = sample_dag(cfg, rng);
  Loadings ld = sample_loadings(cfg, rng);
  m.B = enforce_bow_free_localized(b, ld.V);
  m.W = Vector::Constant(cfg.p, std::sqrt(cfg.idio_variance));
  m.V = std::move(ld.V);
  m.U = std::move(ld.U);
  return m;
}

/// n rows of x = T^{-T} (W w + V v + U u); per row the draws are w, then v, then u.
inline Dataset generate(const GroundTruthModel& model, int n, Rng& rng) {
  const int p = model.p;
  const Index rs = model.r_S();
  const Index rl = model.r_L();
  Matrix eps(n, p);
  Vector w(p), v(rs), u(rl);
  for (int r = 0; r < n; ++r) {
    for (int i = 0; i < p; ++i) w(i) = rng.normal();
    for (Index k = 0; k < rs; ++k) v(k) = rng.normal();
    for (Index k = 0; k < rl; ++k) u(k) = rng.normal();
    Vector e = model.W.cwiseProduct(w);
    if (rs > 0) e += model.V * v;
    if (rl > 0) e += model.U * u;
    eps.row(r) = e.transpose();
  }
  Dataset ds;
  // Row form: x^T = eps^T T^{-1}, i.e. T^T X^T = E^T.
  if (n > 0) {
    ds.X = model.T().transpose().partialPivLu().solve(eps.transpose()).transpose();
  } else {
    ds.X = Matrix(0, p);
  }
  ds.model = model;
  return ds;
}

/// Model and dataset for `cfg`, using independent child streams of cfg.seed.
inline Dataset simulate(const SimConfig& cfg) {
  Rng model_rng(derive_seed(cfg.seed, {0}));
  Rng data_rng(derive_seed(cfg.seed, {1}));
  GroundTruthModel m = sample_model(cfg, model_rng);
  return generate(m, cfg.n, data_rng);
}

struct PopulationComponents {
  Matrix T;
  SymMatrix Omega, Sigma, Theta;
  SymMatrix D_eps, A, C_eps, S_eps, L_eps, Gamma_eps;
  SymMatrix S_x, L_x, Sigma_cond;
};

inline PopulationComponents population_components(const GroundTruthModel& m) {
  const Index p = m.p;
  PopulationComponents pc;
  pc.T = m.T();
  const Matrix ww = Matrix(m.W.cwiseAbs2().asDiagonal());
  const Matrix vv = m.V * m.V.transpose();
  const Matrix uu = m.U * m.U.transpose();
  pc.Omega = SymMatrix(Matrix(ww + vv + uu));
  pc.Gamma_eps = SymMatrix(Matrix(ww + vv));
  if ((m.W.array() == 0.0).any()) throw NotSpd("population_components: W has a zero entry", 0.0);
  pc.D_eps = SymMatrix::diagonal(m.W.cwiseAbs2().cwiseInverse());
  const Matrix& d = pc.D_eps.mat();

  const Index rs = m.r_S();
  pc.A = SymMatrix(Matrix(Matrix::Identity(rs, rs) + m.V.transpose() * d * m.V));
  if (rs > 0) {
    const Matrix dv = d * m.V;
    pc.C_eps = SymMatrix(Matrix(dv * inv_spd(pc.A).mat() * dv.transpose()));
  } else {
    pc.C_eps = SymMatrix(p);
  }
  pc.S_eps = SymMatrix(Matrix(d - pc.C_eps.mat()));

  const Index rl = m.r_L();
  if (rl > 0) {
    const Matrix su = pc.S_eps.mat() * m.U;
    const SymMatrix inner(Matrix(Matrix::Identity(rl, rl) + m.U.transpose() * su));
    pc.L_eps = SymMatrix(Matrix(su * inv_spd(inner).mat() * su.transpose()));
  } else {
    pc.L_eps = SymMatrix(p);
  }

  const Matrix& t = pc.T;
  pc.S_x = SymMatrix(Matrix(t * pc.S_eps.mat() * t.transpose()));
  pc.L_x = SymMatrix(Matrix(t * pc.L_eps.mat() * t.transpose()));
  const Matrix tinv = t.partialPivLu().inverse();
  pc.Sigma = SymMatrix(Matrix(tinv.transpose() * pc.Omega.mat() * tinv));
  pc.Theta = inv_spd(pc.Sigma);
  pc.Sigma_cond = inv_spd(pc.S_x);
  return pc;
}

}  // namespace dcl
