#pragma once

// Correlated-noise DAG learning by alternating a graph step and a noise step on
//
//   F(B, S) = tr(Sigma (I - B) S (I - B)^T) - log det S + lambda_B |B|_1 + lambda_S |S|_off
//
// subject to acyclicity of B. The graph step runs proximal gradient under an
// augmented-Lagrangian schedule on h(B) = tr(exp(B o B)) - p; the noise step is
// a graphical lasso on the residual covariance (I - B)^T Sigma (I - B).
// After alternation the estimate is hard-thresholded and every remaining bow
// (a pair carrying both a directed and a bidirected edge) keeps only its
// stronger channel.

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <vector>

#include "dcl/glasso.hpp"
#include "dcl/matcore.hpp"

namespace dcl {

struct AlSchedule {
  double rho_init = 1.0;
  double rho_mult = 10.0;
  double alpha_init = 0.0;
  double h_tol = 1e-8;
  int max_outer = 20;
  double rho_max = 1e16;
};

struct InnerSolverConfig {
  int max_iter = 500;
  double tol = 1e-6;
};

struct AlternationConfig {
  int max_rounds = 20;
  double tol = 1e-5;
};

struct DecorGlConfig {
  double lambda_B = 0.01;
  double lambda_S = 0.01;
  double tau_B = 0.30;
  double tau_Gamma = 0.30;
  double bow_c = 1.0;
  AlSchedule al;
  InnerSolverConfig inner;
  AlternationConfig alternation;
  // Greedy edge reversals on the thresholded support after alternation.
  bool refine_orientation = false;

  void validate() const {
    if (!(lambda_B >= 0.0) || !(lambda_S >= 0.0)) throw std::invalid_argument("DecorGlConfig: penalties must be >= 0");
    if (!(tau_B >= 0.0) || !(tau_Gamma >= 0.0)) throw std::invalid_argument("DecorGlConfig: thresholds must be >= 0");
    if (!(bow_c > 0.0)) throw std::invalid_argument("DecorGlConfig: bow_c must be > 0");
    if (al.max_outer < 1 || inner.max_iter < 1 || alternation.max_rounds < 1)
      throw std::invalid_argument("DecorGlConfig: iteration limits must be >= 1");
  }
};

// ---------------------------------------------------------------------------
// Graph step

/// tr(Sigma (I - B) S (I - B)^T) and its gradient -2 Sigma (I - B) S.
struct SmoothValue {
  double value = 0.0;
  Matrix grad;
};

inline SmoothValue graph_loss(const SymMatrix& sigma, const SymMatrix& s_eps, const Matrix& b) {
  const Index p = b.rows();
  const Matrix t = Matrix::Identity(p, p) - b;
  const Matrix sig_t = sigma.mat() * t;
  const Matrix sig_t_s = sig_t * s_eps.mat();
  return {sig_t_s.cwiseProduct(t).sum(), Matrix(-2.0 * sig_t_s)};
}

/// Augmented-Lagrangian smooth part f(B) + rho/2 h(B)^2 + alpha h(B).
inline SmoothValue graph_al_smooth(const SymMatrix& sigma, const SymMatrix& s_eps, const Matrix& b,
                                   double rho, double alpha, double* h_out = nullptr) {
  SmoothValue f = graph_loss(sigma, s_eps, b);
  const AcyclicityValue ac = acyclicity(b);
  f.value += 0.5 * rho * ac.h * ac.h + alpha * ac.h;
  f.grad += (rho * ac.h + alpha) * ac.grad;
  if (h_out) *h_out = ac.h;
  return f;
}

struct GraphStepResult {
  Matrix B;
  double h = 0.0;
  bool converged = false;  // h <= h_tol reached
  int outer_iterations = 0;
  std::vector<Matrix> outer_iterates;  // B after each outer round
  std::vector<double> outer_h;
  double rho_final = 0.0;    // penalty used in the last outer round
  double alpha_final = 0.0;  // multiplier after the last dual update
};

namespace detail {

inline double l1_norm(const Matrix& m) { return m.cwiseAbs().sum(); }

// Accelerated proximal gradient (FISTA) on g(B) + lambda |B|_1 with
// diag(B) = 0. Backtracking halves the step until the quadratic upper bound
// holds at the extrapolated point; the momentum restarts whenever the
// objective would increase, so accepted iterates are monotone.
inline Matrix prox_grad_al(const SymMatrix& sigma, const SymMatrix& s_eps, Matrix b, double lambda, double rho,
                           double alpha, const InnerSolverConfig& inner) {
  double step = 1.0;
  double t = 1.0;
  double obj = graph_al_smooth(sigma, s_eps, b, rho, alpha).value + lambda * l1_norm(b);
  Matrix y = b;
  for (int it = 0; it < inner.max_iter; ++it) {
    const SmoothValue vy = graph_al_smooth(sigma, s_eps, y, rho, alpha);
    Matrix next;
    double val = 0.0;
    for (;;) {
      next = soft_threshold(y - step * vy.grad, step * lambda, false);
      next.diagonal().setZero();
      const Matrix d = next - y;
      const double bound = vy.value + vy.grad.cwiseProduct(d).sum() + d.squaredNorm() / (2.0 * step);
      val = graph_al_smooth(sigma, s_eps, next, rho, alpha).value;
      if (val <= bound + 1e-12 * std::abs(vy.value) || step < 1e-300) break;
      step *= 0.5;
    }
    const double new_obj = val + lambda * l1_norm(next);
    if (new_obj > obj) {
      if (t == 1.0) break;  // no descent even from the last accepted point
      t = 1.0;
      y = b;
      continue;
    }
    const double change = obj - new_obj;
    obj = new_obj;
    const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    y = next + ((t - 1.0) / t_next) * (next - b);
    t = t_next;
    b = std::move(next);
    if (change <= inner.tol * std::max(1.0, std::abs(obj))) break;
  }
  return b;
}

}  // namespace detail

inline GraphStepResult graph_step(const SymMatrix& sigma_cond, const SymMatrix& s_eps, const Matrix& b_init,
                                  const DecorGlConfig& cfg) {
  GraphStepResult res;
  Matrix b = b_init;
  b.diagonal().setZero();
  double rho = cfg.al.rho_init;
  double alpha = cfg.al.alpha_init;
  for (int outer = 1; outer <= cfg.al.max_outer; ++outer) {
    b = detail::prox_grad_al(sigma_cond, s_eps, b, cfg.lambda_B, rho, alpha, cfg.inner);
    const double h = acyclicity_value(b);
    res.outer_iterates.push_back(b);
    res.outer_h.push_back(h);
    res.outer_iterations = outer;
    res.h = h;
    alpha += rho * h;
    res.rho_final = rho;
    res.alpha_final = alpha;
    if (h <= cfg.al.h_tol) {
      res.converged = true;
      break;
    }
    rho = std::min(rho * cfg.al.rho_mult, cfg.al.rho_max);
  }
  res.B = std::move(b);
  return res;
}

// ---------------------------------------------------------------------------
// Noise step

inline SymMatrix residual_covariance(const SymMatrix& sigma_cond, const Matrix& b) {
  const Matrix t = Matrix::Identity(b.rows(), b.rows()) - b;
  return SymMatrix(Matrix(t.transpose() * sigma_cond.mat() * t));
}

inline GlassoResult noise_step(const SymMatrix& sigma_cond, const Matrix& b, const DecorGlConfig& cfg) {
  GlassoConfig gc;
  gc.lambda_off = cfg.lambda_S;
  return glasso_fit(residual_covariance(sigma_cond, b), gc);
}

// ---------------------------------------------------------------------------
// Alternation

/// F(B, S) without the acyclicity term.
inline double decor_objective(const SymMatrix& sigma_cond, const Matrix& b, const SymMatrix& s_eps,
                              const DecorGlConfig& cfg) {
  const double off = s_eps.mat().cwiseAbs().sum() - s_eps.mat().diagonal().cwiseAbs().sum();
  return graph_loss(sigma_cond, s_eps, b).value - log_det_spd(s_eps) + cfg.lambda_B * b.cwiseAbs().sum() +
         cfg.lambda_S * off;
}

struct AlternationResult {
  Matrix B;
  SymMatrix S_eps;
  double h_final = 0.0;
  std::vector<double> objective_trace;
  int rounds = 0;
  bool converged = false;
  bool graph_converged = true;  // every accepted graph step met h_tol
  bool noise_converged = true;  // every glasso solve converged
};

namespace detail {

// Proximal gradient for f(B) + lambda |B|_1 with B confined to a fixed DAG
// support, so no acyclicity term is needed.
inline Matrix masked_lasso(const SymMatrix& sigma, const SymMatrix& s_eps, Matrix b, const Matrix& mask,
                           double lambda, double tol) {
  b = b.cwiseProduct(mask);
  double step = 1.0;
  double t = 1.0;
  double obj = graph_loss(sigma, s_eps, b).value + lambda * l1_norm(b);
  Matrix y = b;
  for (int it = 0; it < 5000; ++it) {
    const SmoothValue vy = graph_loss(sigma, s_eps, y);
    Matrix next;
    double val = 0.0;
    for (;;) {
      next = soft_threshold(y - step * vy.grad, step * lambda, false).cwiseProduct(mask);
      const Matrix d = next - y;
      const double bound = vy.value + vy.grad.cwiseProduct(d).sum() + d.squaredNorm() / (2.0 * step);
      val = graph_loss(sigma, s_eps, next).value;
      if (val <= bound + 1e-12 * std::abs(vy.value) || step < 1e-300) break;
      step *= 0.5;
    }
    const double new_obj = val + lambda * l1_norm(next);
    if (new_obj > obj) {
      if (t == 1.0) break;
      t = 1.0;
      y = b;
      continue;
    }
    const double change = obj - new_obj;
    obj = new_obj;
    const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    y = next + ((t - 1.0) / t_next) * (next - b);
    t = t_next;
    b = std::move(next);
    if (change <= tol * std::max(1.0, std::abs(obj))) break;
  }
  return b;
}

struct SupportFit {
  Matrix B;
  SymMatrix S;
  double F = 0.0;
};

// Block-coordinate refit of (B, S) on a fixed support, starting S at the
// diagonal of s_init. Warm-starting from a full S tends to keep the residual
// correlation of the old orientation and stalls.
inline SupportFit support_fit(const SymMatrix& sigma, const Matrix& mask, const Matrix& b_init,
                              const SymMatrix& s_init, const DecorGlConfig& cfg, bool update_noise) {
  SupportFit f{b_init, update_noise ? SymMatrix::diagonal(s_init.diag()) : s_init, 0.0};
  double prev = std::numeric_limits<double>::infinity();
  for (int r = 0; r < cfg.alternation.max_rounds; ++r) {
    f.B = masked_lasso(sigma, f.S, f.B, mask, cfg.lambda_B, 1e-9);
    if (update_noise) f.S = noise_step(sigma, f.B, cfg).precision;
    f.F = decor_objective(sigma, f.B, f.S, cfg);
    if (!update_noise || std::abs(prev - f.F) <= 1e-7 * std::max(1.0, std::abs(f.F))) break;
    prev = f.F;
  }
  return f;
}

// Steepest-descent over single edge reversals of the support {|B| >= tau_B}.
// Orientations inside a Markov equivalence class differ only through the
// penalties, and the graph step's first pass often lands on the wrong member.
// The result replaces the alternation output only if F drops.
inline void refine_orientation(const SymMatrix& sigma, AlternationResult& res, const DecorGlConfig& cfg,
                               bool update_noise) {
  const Index p = sigma.dim();
  Matrix mask = (res.B.cwiseAbs().array() >= cfg.tau_B).cast<double>().matrix();
  mask.diagonal().setZero();
  if (mask.sum() == 0.0) return;
  SupportFit cur = support_fit(sigma, mask, res.B, res.S_eps, cfg, update_noise);
  for (Index pass = 0; pass < 4 * p; ++pass) {
    SupportFit best = cur;
    Matrix best_mask;
    for (Index i = 0; i < p; ++i)
      for (Index j = 0; j < p; ++j) {
        if (mask(i, j) == 0.0) continue;
        Matrix m = mask;
        m(i, j) = 0.0;
        m(j, i) = 1.0;
        if (acyclicity_value(m) > 1e-10) continue;
        Matrix b = cur.B;
        b(i, j) = 0.0;
        SupportFit f = support_fit(sigma, m, b, cur.S, cfg, update_noise);
        if (f.F < best.F - 1e-9 * std::max(1.0, std::abs(best.F))) {
          best = std::move(f);
          best_mask = std::move(m);
        }
      }
    if (best_mask.size() == 0) break;
    cur = std::move(best);
    mask = std::move(best_mask);
  }
  const double old = res.objective_trace.back();
  if (cur.F < old) {
    res.B = std::move(cur.B);
    res.S_eps = std::move(cur.S);
    res.objective_trace.push_back(cur.F);
  }
}

}  // namespace detail

/// Alternates graph and noise steps from B = 0, S = s_init. A graph step that
/// would raise F by more than 1e-8 (relative) is rejected and ends the loop.
/// When `update_noise` is false S stays at s_init (least-squares NOTEARS for S = I).
inline AlternationResult alternate(const SymMatrix& sigma_cond, const SymMatrix& s_init, const DecorGlConfig& cfg,
                                   bool update_noise = true) {
  cfg.validate();
  const Index p = sigma_cond.dim();
  AlternationResult res;
  res.B = Matrix::Zero(p, p);
  res.S_eps = s_init;
  double obj = decor_objective(sigma_cond, res.B, res.S_eps, cfg);
  res.objective_trace.push_back(obj);

  for (int round = 1; round <= cfg.alternation.max_rounds; ++round) {
    GraphStepResult gs = graph_step(sigma_cond, res.S_eps, res.B, cfg);
    const double obj_graph = decor_objective(sigma_cond, gs.B, res.S_eps, cfg);
    if (obj_graph > obj + 1e-8 * std::max(1.0, std::abs(obj))) {
      res.converged = true;
      break;
    }
    res.B = std::move(gs.B);
    res.h_final = gs.h;
    res.graph_converged = res.graph_converged && gs.converged;
    double new_obj = obj_graph;
    if (update_noise) {
      GlassoResult gl = noise_step(sigma_cond, res.B, cfg);
      res.noise_converged = res.noise_converged && gl.converged;
      const double obj_noise = decor_objective(sigma_cond, res.B, gl.precision, cfg);
      if (obj_noise <= obj_graph) {
        res.S_eps = std::move(gl.precision);
        new_obj = obj_noise;
      }
    }
    res.objective_trace.push_back(new_obj);
    res.rounds = round;
    const double rel = std::abs(obj - new_obj) / std::max(1.0, std::abs(obj));
    obj = new_obj;
    if (rel <= cfg.alternation.tol || !update_noise) {
      res.converged = true;
      break;
    }
  }
  if (cfg.refine_orientation) detail::refine_orientation(sigma_cond, res, cfg, update_noise);
  res.h_final = acyclicity_value(res.B);
  return res;
}

// ---------------------------------------------------------------------------
// Post-processing

/// Directed channel wins iff max(|b_ij|, |b_ji|) >= c |g_ij| / sqrt(g_ii g_jj).
inline bool bow_keep_directed(double b_ij, double b_ji, double g_ij, double g_ii, double g_jj, double c) {
  return std::max(std::abs(b_ij), std::abs(b_ji)) >= c * std::abs(g_ij) / std::sqrt(g_ii * g_jj);
}

struct BowResolution {
  Index i = 0;
  Index j = 0;
  bool kept_directed = false;
};

struct AdmgEstimate {
  Matrix B_hat;
  SymMatrix Gamma_hat;
  SymMatrix S_eps_hat;
  double h_final = 0.0;
  std::vector<double> objective_trace;
  std::vector<BowResolution> bow_pairs_resolved;
  int cycles_broken = 0;
  int rounds = 0;
  bool converged = false;
  bool graph_converged = true;
  bool noise_converged = true;
};

namespace detail {

// One directed cycle of the support of b as an edge list, if any.
inline std::optional<std::vector<std::pair<Index, Index>>> find_cycle(const Matrix& b) {
  const Index p = b.rows();
  std::vector<int> state(static_cast<size_t>(p), 0);
  std::vector<Index> parent(static_cast<size_t>(p), -1);
  for (Index root = 0; root < p; ++root) {
    if (state[static_cast<size_t>(root)] != 0) continue;
    std::vector<std::pair<Index, Index>> stack{{root, 0}};
    state[static_cast<size_t>(root)] = 1;
    while (!stack.empty()) {
      auto& [v, next] = stack.back();
      if (next == p) {
        state[static_cast<size_t>(v)] = 2;
        stack.pop_back();
        continue;
      }
      const Index w = next++;
      if (b(v, w) == 0.0) continue;
      if (state[static_cast<size_t>(w)] == 1) {
        std::vector<std::pair<Index, Index>> cyc{{v, w}};
        for (Index x = v; x != w; x = parent[static_cast<size_t>(x)])
          cyc.emplace_back(parent[static_cast<size_t>(x)], x);
        return cyc;
      }
      if (state[static_cast<size_t>(w)] == 0) {
        state[static_cast<size_t>(w)] = 1;
        parent[static_cast<size_t>(w)] = v;
        stack.emplace_back(w, 0);
      }
    }
  }
  return std::nullopt;
}

// Scales off-diagonal entries down until the matrix is safely positive
// definite; the support pattern and the diagonal are unchanged.
inline SymMatrix repair_spd(SymMatrix g) {
  const Vector d = g.diag();
  double scale = 1.0;
  Matrix off = g.mat();
  off.diagonal().setZero();
  Matrix cur = g.mat();
  while (min_eigenvalue(SymMatrix(cur)) <= 1e-8 * d.maxCoeff() && scale > 1e-6) {
    scale *= 0.9;
    cur = scale * off;
    cur.diagonal() = d;
  }
  return SymMatrix(cur);
}

}  // namespace detail

inline AdmgEstimate reconcile_bows(const Matrix& b_t, const SymMatrix& s_eps_t, const DecorGlConfig& cfg) {
  const Index p = b_t.rows();
  AdmgEstimate est;
  est.S_eps_hat = s_eps_t;

  Matrix b = b_t;
  b.diagonal().setZero();
  for (Index j = 0; j < p; ++j)
    for (Index i = 0; i < p; ++i)
      if (std::abs(b(i, j)) < cfg.tau_B) b(i, j) = 0.0;

  // A pair with both directions surviving keeps the larger magnitude (ties keep i -> j for i < j).
  for (Index i = 0; i < p; ++i)
    for (Index j = i + 1; j < p; ++j)
      if (b(i, j) != 0.0 && b(j, i) != 0.0) {
        if (std::abs(b(i, j)) >= std::abs(b(j, i)))
          b(j, i) = 0.0;
        else
          b(i, j) = 0.0;
      }

  // Longer cycles that survived thresholding lose their weakest edge.
  while (auto cyc = detail::find_cycle(b)) {
    auto weakest = *std::min_element(cyc->begin(), cyc->end(), [&](const auto& x, const auto& y) {
      return std::abs(b(x.first, x.second)) < std::abs(b(y.first, y.second));
    });
    b(weakest.first, weakest.second) = 0.0;
    ++est.cycles_broken;
  }

  const SymMatrix gamma_full = inv_spd(s_eps_t);
  Matrix g = gamma_full.mat();
  for (Index i = 0; i < p; ++i)
    for (Index j = 0; j < p; ++j)
      if (i != j && std::abs(g(i, j)) < cfg.tau_Gamma) g(i, j) = 0.0;

  for (Index i = 0; i < p; ++i) {
    for (Index j = i + 1; j < p; ++j) {
      const bool directed = b(i, j) != 0.0 || b(j, i) != 0.0;
      if (!directed || g(i, j) == 0.0) continue;
      const bool keep = bow_keep_directed(b(i, j), b(j, i), g(i, j), g(i, i), g(j, j), cfg.bow_c);
      if (keep) {
        g(i, j) = 0.0;
        g(j, i) = 0.0;
      } else {
        b(i, j) = 0.0;
        b(j, i) = 0.0;
      }
      est.bow_pairs_resolved.push_back({i, j, keep});
    }
  }

  est.Gamma_hat = detail::repair_spd(SymMatrix(g));
  est.h_final = acyclicity_value(b);
  est.B_hat = std::move(b);
  return est;
}

inline AdmgEstimate finish_estimate(const AlternationResult& alt, const DecorGlConfig& cfg) {
  AdmgEstimate est = reconcile_bows(alt.B, alt.S_eps, cfg);
  est.objective_trace = alt.objective_trace;
  est.rounds = alt.rounds;
  est.converged = alt.converged;
  est.graph_converged = alt.graph_converged;
  est.noise_converged = alt.noise_converged;
  return est;
}

/// Standalone correlated-noise learner on a covariance matrix; S starts at
/// the diagonal of the inverse covariance.
inline AdmgEstimate decor_gl_fit(const SymMatrix& sigma, const DecorGlConfig& cfg) {
  const SymMatrix s0 = SymMatrix::diagonal(inv_spd(sigma).diag());
  return finish_estimate(alternate(sigma, s0, cfg), cfg);
}

/// Least-squares NOTEARS: the graph step with S pinned to the identity.
inline AdmgEstimate notears_fit(const SymMatrix& sigma, const DecorGlConfig& cfg) {
  return finish_estimate(alternate(sigma, SymMatrix::identity(sigma.dim()), cfg, false), cfg);
}

}  // namespace dcl
