#pragma once

// Graphical lasso with an off-diagonal l1 penalty:
//
//   min_{S > 0}  -log det S + tr(Sigma S) + lambda * sum_{i != j} |S_ij|
//
// Solved by exact block coordinate descent on the primal, one row/column at a
// time. With row/column j split off, the optimal Schur complement is 1/sigma_jj,
// which leaves a lasso in the off-diagonal column:
//
//   min_theta  1/2 theta^T (sigma_jj * S11^{-1}) theta + sigma_12^T theta + lambda |theta|_1
//
// solved by cyclic coordinate descent. Every block step is an exact minimizer,
// so the objective never increases and the iterate stays positive definite.
// The inverse W = S^{-1} is carried along by rank-one updates and refreshed
// once per sweep.

#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include "dcl/matcore.hpp"

namespace dcl {

struct GlassoConfig {
  double lambda_off = 0.0;
  int max_iter = 500;
  double tol = 1e-6;
  double ridge = 1e-8;

  void validate() const {
    if (!(lambda_off >= 0.0)) throw std::invalid_argument("GlassoConfig: lambda_off must be >= 0");
    if (!(tol > 0.0)) throw std::invalid_argument("GlassoConfig: tol must be > 0");
    if (max_iter < 1) throw std::invalid_argument("GlassoConfig: max_iter must be >= 1");
  }
};

struct GlassoResult {
  SymMatrix precision;
  SymMatrix covariance;  // precision^{-1}
  bool converged = false;
  int iterations = 0;
  double ridge_added = 0.0;
  double kkt_residual = 0.0;
  std::vector<double> objective_trace;  // initial point, then one entry per sweep
};

inline double glasso_objective(const SymMatrix& sigma, const SymMatrix& prec, double lambda) {
  const double off_l1 = prec.mat().cwiseAbs().sum() - prec.mat().diagonal().cwiseAbs().sum();
  return -log_det_spd(prec) + (sigma.mat().cwiseProduct(prec.mat())).sum() + lambda * off_l1;
}

/// Largest violation of the stationarity conditions, with W = prec^{-1}:
/// diagonal W_ii = sigma_ii; off the support |W_ij - sigma_ij| <= lambda;
/// on the support W_ij - sigma_ij = lambda * sign(prec_ij).
inline double glasso_kkt_residual(const SymMatrix& sigma, const SymMatrix& prec, const SymMatrix& cov,
                                  double lambda) {
  double worst = 0.0;
  const Index p = sigma.dim();
  for (Index i = 0; i < p; ++i) {
    worst = std::max(worst, std::abs(cov(i, i) - sigma(i, i)));
    for (Index j = i + 1; j < p; ++j) {
      const double g = cov(i, j) - sigma(i, j);
      const double v = prec(i, j) != 0.0 ? std::abs(g - lambda * (prec(i, j) > 0 ? 1.0 : -1.0))
                                         : std::max(0.0, std::abs(g) - lambda);
      worst = std::max(worst, v);
    }
  }
  return worst;
}

namespace detail {

// Cyclic coordinate descent for 1/2 x^T Q x + c^T x + lambda |x|_1, warm-started at x.
inline void lasso_cd(const Matrix& q, const Vector& c, double lambda, Vector& x) {
  Vector g = q * x + c;
  for (int pass = 0; pass < 10000; ++pass) {
    double max_delta = 0.0;
    for (Index k = 0; k < x.size(); ++k) {
      const double qkk = q(k, k);
      const double z = qkk * x(k) - g(k);
      const double a = std::abs(z) - lambda;
      const double xk = a > 0.0 ? std::copysign(a, z) / qkk : 0.0;
      const double delta = xk - x(k);
      if (delta != 0.0) {
        g += delta * q.col(k);
        x(k) = xk;
        max_delta = std::max(max_delta, std::abs(delta) * std::sqrt(qkk));
      }
    }
    if (max_delta <= 1e-13 * (1.0 + x.cwiseAbs().maxCoeff())) return;
  }
}

}  // namespace detail

inline GlassoResult glasso_fit(const SymMatrix& sigma_in, const GlassoConfig& cfg) {
  cfg.validate();
  const Index p = sigma_in.dim();
  for (Index i = 0; i < p; ++i)
    if (!(sigma_in(i, i) > 0.0)) throw DegenerateInput("glasso: covariance diagonal must be positive");

  GlassoResult res;
  Matrix s = sigma_in.mat();
  // Ridge the diagonal until the input is safely positive definite.
  double lmin = min_eigenvalue(sigma_in);
  if (lmin < 1e-8) {
    double add = cfg.ridge;
    while (min_eigenvalue(SymMatrix(Matrix(s + add * Matrix::Identity(p, p)))) < 1e-8) add *= 10.0;
    s += add * Matrix::Identity(p, p);
    res.ridge_added = add;
  }
  const SymMatrix sigma(s);
  const double lambda = cfg.lambda_off;

  Matrix prec = Matrix(sigma.diag().cwiseInverse().asDiagonal());
  Matrix cov = Matrix(sigma.diag().asDiagonal());
  double obj = glasso_objective(sigma, SymMatrix(prec), lambda);
  res.objective_trace.push_back(obj);

  std::vector<Index> others(static_cast<size_t>(std::max<Index>(p - 1, 0)));
  for (int sweep = 1; sweep <= cfg.max_iter && p > 1; ++sweep) {
    for (Index j = 0; j < p; ++j) {
      for (Index k = 0, t = 0; k < p; ++k)
        if (k != j) others[static_cast<size_t>(t++)] = k;
      const double s22 = s(j, j);
      const Vector w12 = cov(others, j);
      const Matrix s11_inv = cov(others, others) - w12 * w12.transpose() / cov(j, j);
      const Vector s12 = s(others, j);
      Vector theta = prec(others, j);
      detail::lasso_cd(s22 * s11_inv, s12, lambda, theta);

      const Vector s11_inv_theta = s11_inv * theta;
      const double theta22 = 1.0 / s22 + theta.dot(s11_inv_theta);
      prec(others, j) = theta;
      prec(j, others) = theta.transpose();
      prec(j, j) = theta22;
      const Vector w12_new = -s22 * s11_inv_theta;
      cov(others, others) = s11_inv + w12_new * w12_new.transpose() / s22;
      cov(others, j) = w12_new;
      cov(j, others) = w12_new.transpose();
      cov(j, j) = s22;
    }
    const SymMatrix prec_sym(prec);
    cov = inv_spd(prec_sym).mat();
    const double new_obj = glasso_objective(sigma, prec_sym, lambda);
    res.objective_trace.push_back(new_obj);
    res.iterations = sweep;
    const double rel = std::abs(obj - new_obj) / std::max(1.0, std::abs(obj));
    obj = new_obj;
    res.kkt_residual = glasso_kkt_residual(sigma, prec_sym, SymMatrix(cov), lambda);
    if (rel <= cfg.tol && res.kkt_residual <= 1e-9) {
      res.converged = true;
      break;
    }
  }
  if (p <= 1) {
    res.converged = true;
    res.kkt_residual = 0.0;
  }
  res.precision = SymMatrix(prec);
  res.covariance = SymMatrix(cov);
  return res;
}

}  // namespace dcl
