#pragma once

// Three-stage deconfounding pipeline:
//   I   structured-minus-low-rank split of the sample precision (lvglasso)
//   II  conditional covariance as the inverse of the structured part
//   III correlated-noise DAG learning on that covariance, then bow reconciliation

#include <chrono>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "dcl/decorgl.hpp"
#include "dcl/lvglasso.hpp"
#include "dcl/simulator.hpp"

namespace dcl {

struct PipelineConfig {
  LvglassoConfig lvglasso;
  DecorGlConfig decor;  // lambda_B defaults to 0.01 for pipeline use
  bool standardize_input = true;
};

struct StageTimings {
  double stage1_ms = 0.0;
  double stage2_ms = 0.0;
  double stage3_ms = 0.0;
};

struct PipelineReport {
  PrecisionSplit split;
  SymMatrix sigma_cond_hat;
  AdmgEstimate estimate;
  StageTimings stage_timings_ms;
  double condition_number_Sx = 0.0;
  bool ridge_applied = false;
  std::vector<std::string> warnings;
};

/// n^{-1} X^T X after centering; columns are also scaled to unit variance when
/// `standardize` is set.
inline SymMatrix sample_covariance(const Matrix& x, bool standardize) {
  const Index n = x.rows();
  if (n < 1) throw DegenerateInput("sample_covariance: no samples");
  Matrix xc = x.rowwise() - x.colwise().mean();
  if (standardize) {
    for (Index j = 0; j < xc.cols(); ++j) {
      const double sd = std::sqrt(xc.col(j).squaredNorm() / static_cast<double>(n));
      if (!(sd > 0.0)) throw DegenerateInput("sample_covariance: column " + std::to_string(j) + " is constant");
      xc.col(j) /= sd;
    }
  }
  return SymMatrix(Matrix(xc.transpose() * xc / static_cast<double>(n)));
}

namespace detail {
inline double ms_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
}
}  // namespace detail

/// Stages I-III on an already formed covariance matrix.
inline PipelineReport run_pipeline_covariance(const SymMatrix& sigma_hat, const PipelineConfig& cfg) {
  PipelineReport rep;
  auto t0 = std::chrono::steady_clock::now();
  rep.split = lvglasso_fit(sigma_hat, LocalityRegularizer::sparse(cfg.lvglasso.lambda_s), cfg.lvglasso);
  if (!rep.split.converged) rep.warnings.push_back("stage I: lvglasso did not converge");
  rep.stage_timings_ms.stage1_ms = detail::ms_since(t0);

  t0 = std::chrono::steady_clock::now();
  SymMatrix s_x = rep.split.S_x;
  const double lmin = min_eigenvalue(s_x);
  const double lmax = max_eigenvalue(s_x);
  if (!(lmin > 0.0)) throw NotSpd("pipeline: structured precision is not positive definite", lmin);
  rep.condition_number_Sx = lmax / lmin;
  if (rep.condition_number_Sx > 1e8) {
    rep.warnings.push_back("stage II: condition number of S_x above 1e8, ridge 1e-6 applied");
    s_x = SymMatrix(Matrix(s_x.mat() + 1e-6 * Matrix::Identity(s_x.dim(), s_x.dim())));
    rep.ridge_applied = true;
  }
  rep.sigma_cond_hat = inv_spd(s_x);
  rep.stage_timings_ms.stage2_ms = detail::ms_since(t0);

  t0 = std::chrono::steady_clock::now();
  const SymMatrix s0 = SymMatrix::diagonal(rep.split.S_x.diag());
  const AlternationResult alt = alternate(rep.sigma_cond_hat, s0, cfg.decor);
  rep.estimate = finish_estimate(alt, cfg.decor);
  if (!alt.graph_converged) rep.warnings.push_back("stage III: acyclicity tolerance not reached");
  if (!alt.noise_converged) rep.warnings.push_back("stage III: a graphical lasso solve did not converge");
  rep.stage_timings_ms.stage3_ms = detail::ms_since(t0);
  return rep;
}

inline void check_dataset(const Dataset& data) {
  if (data.n() < 2 || data.p() < 2) throw DegenerateInput("pipeline: need n >= 2 and p >= 2");
  if (!data.X.allFinite()) throw DegenerateInput("pipeline: data contain non-finite values");
}

inline PipelineReport run_pipeline(const Dataset& data, const PipelineConfig& cfg) {
  check_dataset(data);
  return run_pipeline_covariance(sample_covariance(data.X, cfg.standardize_input), cfg);
}

// ---------------------------------------------------------------------------

struct InversionBound {
  double delta = 0.0;   // |S_hat - S|_2
  double bound = 0.0;   // |S^{-1}|_2^2 delta / (1 - |S^{-1}|_2 delta)
  double actual = 0.0;  // |S_hat^{-1} - S^{-1}|_2
};

/// Perturbation bound for inverting a perturbed SPD matrix. Throws
/// PreconditionViolated when delta >= lambda_min(S_true).
inline InversionBound inversion_stability(const SymMatrix& s_hat, const SymMatrix& s_true) {
  InversionBound out;
  out.delta = spectral_norm_sym(s_hat.mat() - s_true.mat());
  const double lmin = min_eigenvalue(s_true);
  if (!(out.delta < lmin)) throw PreconditionViolated("inversion_stability: |S_hat - S|_2 >= lambda_min(S)");
  const double inv_norm = 1.0 / lmin;
  out.bound = inv_norm * inv_norm * out.delta / (1.0 - inv_norm * out.delta);
  out.actual = spectral_norm_sym(inv_spd(s_hat).mat() - inv_spd(s_true).mat());
  if (out.actual > out.bound + 1e-10) throw std::logic_error("inversion_stability: bound violated");
  return out;
}

// ---------------------------------------------------------------------------
// Method dispatch used by the CLI and the experiment harness.

enum class Method { DclDecor, DecorGl, Notears };

inline const char* method_name(Method m) {
  switch (m) {
    case Method::DclDecor:
      return "dcl_decor";
    case Method::DecorGl:
      return "decor_gl";
    case Method::Notears:
      return "notears";
  }
  return "?";
}

inline std::optional<Method> parse_method(const std::string& s) {
  if (s == "dcl_decor") return Method::DclDecor;
  if (s == "decor_gl") return Method::DecorGl;
  if (s == "notears") return Method::Notears;
  return std::nullopt;
}

struct MethodConfigs {
  PipelineConfig dcl;
  DecorGlConfig decor_gl;
  DecorGlConfig notears;

  // One lambda_B for all three methods. At 0.01 the stage III fit is under-
  // penalized at n = 400; 0.10 was chosen on held-out seeds, not the grid seeds.
  MethodConfigs() {
    dcl.decor.lambda_B = 0.10;
    decor_gl.lambda_B = 0.10;
    notears.lambda_B = 0.10;
  }
};

struct MethodFit {
  AdmgEstimate estimate;
  std::optional<PipelineReport> pipeline;  // dcl_decor only
  bool converged = true;
};

inline MethodFit fit_method(Method method, const Dataset& data, const MethodConfigs& cfg) {
  check_dataset(data);
  MethodFit out;
  switch (method) {
    case Method::DclDecor: {
      PipelineReport rep = run_pipeline(data, cfg.dcl);
      out.estimate = rep.estimate;
      out.converged = rep.split.converged && rep.estimate.graph_converged && rep.estimate.noise_converged;
      out.pipeline = std::move(rep);
      break;
    }
    case Method::DecorGl:
      out.estimate = decor_gl_fit(sample_covariance(data.X, cfg.dcl.standardize_input), cfg.decor_gl);
      out.converged = out.estimate.graph_converged && out.estimate.noise_converged;
      break;
    case Method::Notears:
      out.estimate = notears_fit(sample_covariance(data.X, cfg.dcl.standardize_input), cfg.notears);
      out.converged = out.estimate.graph_converged;
      break;
  }
  return out;
}

}  // namespace dcl
