#pragma once

// Latent-variable graphical lasso: structured-minus-low-rank precision split
//
//   min  -log det(S - L) + tr(Sigma (S - L)) + lambda_s R_loc(S) + lambda_* tr(L)
//   s.t. S > 0, L >= 0, S - L > 0
//
// solved by ADMM on the splitting R = S - L with scaled dual U:
//   R <- prox of -log det R + tr(Sigma R)     (eigendecomposition)
//   S <- masked soft-threshold of R + L + U   (diagonal unpenalized)
//   L <- eigenvalue shrink of S - R - U by lambda_*/rho, clipped at zero
//   U <- U + R - (S - L)
// The penalty parameter rho is rebalanced against the residuals every 10 steps.

#include <cmath>
#include <stdexcept>
#include <vector>

#include "dcl/matcore.hpp"

namespace dcl {

/// Locality class for the structured component. Banded and block classes are
/// hard support masks with an l1 penalty inside the allowed support.
struct LocalityRegularizer {
  enum class Kind { SparseL1, Banded, Block };
  Kind kind = Kind::SparseL1;
  double weight = 0.001;  // lambda_s
  int bandwidth = 0;
  std::vector<int> partition;  // block label per variable

  static LocalityRegularizer sparse(double weight) { return {Kind::SparseL1, weight, 0, {}}; }
  static LocalityRegularizer banded(double weight, int bandwidth) { return {Kind::Banded, weight, bandwidth, {}}; }
  static LocalityRegularizer block(double weight, std::vector<int> labels) {
    return {Kind::Block, weight, 0, std::move(labels)};
  }

  void validate(Index p) const {
    if (!(weight >= 0.0)) throw std::invalid_argument("LocalityRegularizer: weight must be >= 0");
    if (bandwidth < 0) throw std::invalid_argument("LocalityRegularizer: bandwidth must be >= 0");
    if (kind == Kind::Block && static_cast<Index>(partition.size()) != p)
      throw std::invalid_argument("LocalityRegularizer: partition must label every variable once");
  }

  bool allowed(Index i, Index j) const {
    switch (kind) {
      case Kind::SparseL1:
        return true;
      case Kind::Banded:
        return std::abs(i - j) <= bandwidth;
      case Kind::Block:
        return partition[static_cast<size_t>(i)] == partition[static_cast<size_t>(j)];
    }
    return true;
  }

  /// Off-diagonal l1 norm; entries outside the mask are held at zero by the solver.
  double penalty(const SymMatrix& s) const {
    double total = 0.0;
    for (Index j = 0; j < s.dim(); ++j)
      for (Index i = 0; i < s.dim(); ++i)
        if (i != j) total += std::abs(s(i, j));
    return total;
  }
};

struct LvglassoConfig {
  double lambda_s = 0.001;
  double lambda_star = 0.005;
  double rho_admm = 1.0;
  int max_iter = 1000;
  double tol_primal = 1e-5;
  double tol_dual = 1e-5;

  void validate() const {
    if (!(lambda_s >= 0.0) || !(lambda_star >= 0.0))
      throw std::invalid_argument("LvglassoConfig: penalties must be >= 0");
    if (!(rho_admm > 0.0)) throw std::invalid_argument("LvglassoConfig: rho_admm must be > 0");
    if (!(tol_primal > 0.0) || !(tol_dual > 0.0))
      throw std::invalid_argument("LvglassoConfig: tolerances must be > 0");
  }
};

struct PrecisionSplit {
  SymMatrix S_x;
  SymMatrix L_x;
  bool converged = false;
  int iterations = 0;
  double final_gap = 0.0;  // max(primal residual, dual residual) at exit
  int rank_L = 0;
  double objective = 0.0;
  double initial_objective = 0.0;
};

/// Number of eigenvalues above rel_tol * lambda_max.
inline int numerical_rank(const SymMatrix& m, double rel_tol) {
  if (m.dim() == 0) return 0;
  const SymEigen e = eig_sym(m);
  const double top = e.values(0);
  if (!(top > 0.0)) return 0;
  int r = 0;
  for (Index k = 0; k < e.values.size(); ++k)
    if (e.values(k) > rel_tol * top) ++r;
  return r;
}

inline double lvglasso_objective(const SymMatrix& sigma, const SymMatrix& s, const SymMatrix& l,
                                 const LocalityRegularizer& reg, double lambda_star) {
  const SymMatrix r(Matrix(s.mat() - l.mat()));
  return -log_det_spd(r) + sigma.mat().cwiseProduct(r.mat()).sum() + reg.weight * reg.penalty(s) +
         lambda_star * l.mat().trace();
}

/// First-order stationarity residual of the split at (S, L): the subgradient
/// mismatch in S plus the projected-gradient fixed-point gap in L.
inline double lvglasso_stationarity(const SymMatrix& sigma, const SymMatrix& s, const SymMatrix& l,
                                    const LocalityRegularizer& reg, double lambda_star) {
  const Index p = sigma.dim();
  const Matrix g = sigma.mat() - inv_spd(SymMatrix(Matrix(s.mat() - l.mat()))).mat();
  Matrix rs = Matrix::Zero(p, p);
  for (Index j = 0; j < p; ++j)
    for (Index i = 0; i < p; ++i) {
      if (i == j) {
        rs(i, j) = g(i, j);
      } else if (reg.allowed(i, j)) {
        rs(i, j) = s(i, j) != 0.0 ? g(i, j) + reg.weight * (s(i, j) > 0.0 ? 1.0 : -1.0)
                                   : std::max(0.0, std::abs(g(i, j)) - reg.weight);
      }
    }
  const Matrix step = l.mat() - (lambda_star * Matrix::Identity(p, p) - g);
  const double rl = (l.mat() - psd_project(SymMatrix(step)).mat()).norm();
  return std::max(rs.norm(), rl);
}

inline PrecisionSplit lvglasso_fit(const SymMatrix& sigma, const LocalityRegularizer& reg,
                                   const LvglassoConfig& cfg) {
  cfg.validate();
  const Index p = sigma.dim();
  reg.validate(p);
  for (Index i = 0; i < p; ++i)
    if (!(sigma(i, i) > 0.0)) throw DegenerateInput("lvglasso: covariance diagonal must be positive");

  const Matrix& sig = sigma.mat();
  Matrix s = Matrix(sigma.diag().cwiseInverse().asDiagonal());
  Matrix l = Matrix::Zero(p, p);
  Matrix r = s;
  Matrix u = Matrix::Zero(p, p);
  double rho = cfg.rho_admm;

  PrecisionSplit out;
  out.initial_objective = lvglasso_objective(sigma, SymMatrix(s), SymMatrix(l), reg, cfg.lambda_star);

  Matrix mask = Matrix::Ones(p, p);
  for (Index i = 0; i < p; ++i)
    for (Index j = 0; j < p; ++j)
      if (!reg.allowed(i, j)) mask(i, j) = 0.0;

  Matrix sl_prev = s - l;
  double primal = 0.0, dual = 0.0;
  for (int it = 1; it <= cfg.max_iter; ++it) {
    {
      Eigen::SelfAdjointEigenSolver<Matrix> es(Matrix(rho * (s - l - u) - sig));
      const Vector ev = es.eigenvalues();
      const Vector rv = ((ev.array() + (ev.array().square() + 4.0 * rho).sqrt()) / (2.0 * rho)).matrix();
      r = es.eigenvectors() * rv.asDiagonal() * es.eigenvectors().transpose();
      r = 0.5 * (r + r.transpose());
    }
    s = soft_threshold(r + l + u, reg.weight / rho, true).cwiseProduct(mask);
    {
      Eigen::SelfAdjointEigenSolver<Matrix> es(Matrix(s - r - u));
      const Vector lv = (es.eigenvalues().array() - cfg.lambda_star / rho).cwiseMax(0.0).matrix();
      l = es.eigenvectors() * lv.asDiagonal() * es.eigenvectors().transpose();
      l = 0.5 * (l + l.transpose());
    }
    const Matrix sl = s - l;
    u += r - sl;

    primal = (r - sl).norm();
    dual = rho * (sl - sl_prev).norm();
    sl_prev = sl;
    out.iterations = it;
    const double eps_pri = cfg.tol_primal * std::max({1.0, r.norm(), sl.norm()});
    const double eps_dual = cfg.tol_dual * std::max(1.0, rho * u.norm());
    if (primal <= eps_pri && dual <= eps_dual) {
      out.converged = true;
      break;
    }
    if (it % 10 == 0) {
      // Residual balancing on the residuals relative to their tolerances.
      const double pn = primal / eps_pri, dn = dual / eps_dual;
      if (pn > 3.0 * dn) {
        rho *= 2.0;
        u /= 2.0;
      } else if (dn > 3.0 * pn) {
        rho /= 2.0;
        u *= 2.0;
      }
    }
  }
  out.final_gap = std::max(primal, dual);

  // Return the structured iterate when it is feasible; otherwise R + L, which
  // satisfies all three cone constraints because R > 0 and L >= 0.
  SymMatrix s_out(s);
  const SymMatrix l_out(l);
  if (!(check_spd(s_out).is_spd && check_spd(SymMatrix(Matrix(s - l))).is_spd)) s_out = SymMatrix(Matrix(r + l));
  out.S_x = s_out;
  out.L_x = l_out;
  out.rank_L = numerical_rank(l_out, 1e-6);
  out.objective = lvglasso_objective(sigma, out.S_x, out.L_x, reg, cfg.lambda_star);
  return out;
}

}  // namespace dcl
