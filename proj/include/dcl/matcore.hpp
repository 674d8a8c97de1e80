#pragma once

// Dense symmetric / SPD kernels shared by every solver in the library.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <optional>
#include <vector>

#include "dcl/errors.hpp"

namespace dcl {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

/// Square symmetric matrix. Symmetry is exact: construction copies the upper
/// triangle onto the lower one and `set` writes both mirrored entries.
class SymMatrix {
 public:
  SymMatrix() = default;
  explicit SymMatrix(Index dim) : m_(Matrix::Zero(dim, dim)) {}
  explicit SymMatrix(const Matrix& m) {
    if (m.rows() != m.cols()) throw std::invalid_argument("SymMatrix: matrix is not square");
    m_ = m.selfadjointView<Eigen::Upper>();
  }

  static SymMatrix identity(Index dim) { return SymMatrix(Matrix::Identity(dim, dim)); }
  static SymMatrix diagonal(const Vector& d) { return SymMatrix(Matrix(d.asDiagonal())); }

  Index dim() const { return m_.rows(); }
  double operator()(Index i, Index j) const { return m_(i, j); }
  void set(Index i, Index j, double v) {
    m_(i, j) = v;
    m_(j, i) = v;
  }
  const Matrix& mat() const { return m_; }
  Vector diag() const { return m_.diagonal(); }

 private:
  Matrix m_;
};

struct SpdCheckResult {
  bool is_spd = false;
  double min_eigenvalue = 0.0;
};

struct SymEigen {
  Vector values;   // descending
  Matrix vectors;  // columns match `values`
};

inline constexpr double kCholeskyPivotTol = 1e-12;

/// Lower Cholesky factor, or nullopt when some pivot is <= 1e-12.
inline std::optional<Matrix> try_cholesky(const SymMatrix& m) {
  const Index n = m.dim();
  Matrix l = Matrix::Zero(n, n);
  for (Index j = 0; j < n; ++j) {
    double d = m(j, j) - l.row(j).head(j).squaredNorm();
    if (!(d > kCholeskyPivotTol)) return std::nullopt;
    const double ljj = std::sqrt(d);
    l(j, j) = ljj;
    for (Index i = j + 1; i < n; ++i) {
      l(i, j) = (m(i, j) - l.row(i).head(j).dot(l.row(j).head(j))) / ljj;
    }
  }
  return l;
}

inline SymEigen eig_sym(const SymMatrix& m) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(m.mat());
  const Index n = m.dim();
  SymEigen out{Vector(n), Matrix(n, n)};
  // Eigen returns ascending order.
  for (Index k = 0; k < n; ++k) {
    out.values(k) = es.eigenvalues()(n - 1 - k);
    out.vectors.col(k) = es.eigenvectors().col(n - 1 - k);
  }
  return out;
}

inline double min_eigenvalue(const SymMatrix& m) {
  if (m.dim() == 0) return 0.0;
  return Eigen::SelfAdjointEigenSolver<Matrix>(m.mat(), Eigen::EigenvaluesOnly).eigenvalues()(0);
}

inline double max_eigenvalue(const SymMatrix& m) {
  if (m.dim() == 0) return 0.0;
  const auto ev = Eigen::SelfAdjointEigenSolver<Matrix>(m.mat(), Eigen::EigenvaluesOnly).eigenvalues();
  return ev(ev.size() - 1);
}

inline SpdCheckResult check_spd(const SymMatrix& m) {
  const double lmin = min_eigenvalue(m);
  return {lmin > 0.0, lmin};
}

inline Matrix cholesky(const SymMatrix& m) {
  auto l = try_cholesky(m);
  if (!l) throw NotSpd("cholesky: matrix is not numerically SPD", min_eigenvalue(m));
  return *std::move(l);
}

/// Inverse of an SPD matrix through its Cholesky factor.
inline SymMatrix inv_spd(const SymMatrix& m) {
  const Matrix l = cholesky(m);
  const Index n = m.dim();
  Matrix linv = l.triangularView<Eigen::Lower>().solve(Matrix::Identity(n, n));
  return SymMatrix(Matrix(linv.transpose() * linv));
}

/// log det of an SPD matrix; throws NotSpd otherwise.
inline double log_det_spd(const SymMatrix& m) {
  const Matrix l = cholesky(m);
  return 2.0 * l.diagonal().array().log().sum();
}

/// Frobenius-nearest PSD matrix: negative eigenvalues clipped to zero.
inline SymMatrix psd_project(const SymMatrix& m) {
  if (m.dim() == 0) return m;
  Eigen::SelfAdjointEigenSolver<Matrix> es(m.mat());
  const Vector clipped = es.eigenvalues().cwiseMax(0.0);
  return SymMatrix(Matrix(es.eigenvectors() * clipped.asDiagonal() * es.eigenvectors().transpose()));
}

/// Elementwise x -> sign(x) * max(|x| - t, 0). With `off_diagonal_only` the
/// diagonal is passed through untouched.
inline Matrix soft_threshold(const Matrix& m, double t, bool off_diagonal_only) {
  Matrix out = m;
  for (Index j = 0; j < m.cols(); ++j) {
    for (Index i = 0; i < m.rows(); ++i) {
      if (off_diagonal_only && i == j) continue;
      const double x = m(i, j);
      const double a = std::abs(x) - t;
      out(i, j) = a > 0.0 ? std::copysign(a, x) : 0.0;
    }
  }
  return out;
}

/// Matrix exponential by scaling and squaring with the degree-13 Pade
/// approximant. The scaling exponent is s = max(0, ceil(log2(|A|_1 / theta13)))
/// with theta13 = 5.371920351148152, after which the approximant is squared s times.
inline Matrix expm(const Matrix& a) {
  static constexpr double b[] = {64764752532480000.0, 32382376266240000.0, 7771770303897600.0,
                                 1187353796428800.0,  129060195264000.0,   10559470521600.0,
                                 670442572800.0,      33522128640.0,       1323241920.0,
                                 40840800.0,          960960.0,            16380.0,
                                 182.0,               1.0};
  static constexpr double theta13 = 5.371920351148152;

  const Index n = a.rows();
  if (n == 0) return a;
  const double norm1 = a.cwiseAbs().colwise().sum().maxCoeff();
  if (norm1 == 0.0) return Matrix::Identity(n, n);  // the LU solve below is not exact here
  int s = 0;
  if (norm1 > theta13) s = std::max(0, static_cast<int>(std::ceil(std::log2(norm1 / theta13))));
  const Matrix as = a / std::ldexp(1.0, s);

  const Matrix id = Matrix::Identity(n, n);
  const Matrix a2 = as * as;
  const Matrix a4 = a2 * a2;
  const Matrix a6 = a4 * a2;
  const Matrix u_inner = a6 * (b[13] * a6 + b[11] * a4 + b[9] * a2) + b[7] * a6 + b[5] * a4 + b[3] * a2 + b[1] * id;
  const Matrix u = as * u_inner;
  const Matrix v = a6 * (b[12] * a6 + b[10] * a4 + b[8] * a2) + b[6] * a6 + b[4] * a4 + b[2] * a2 + b[0] * id;

  Matrix r = (v - u).partialPivLu().solve(v + u);
  for (int k = 0; k < s; ++k) r = r * r;
  return r;
}

struct AcyclicityValue {
  double h = 0.0;
  Matrix grad;
};

/// h(B) = tr(exp(B o B)) - p and its gradient exp(B o B)^T o 2B.
inline AcyclicityValue acyclicity(const Matrix& b) {
  const Matrix e = expm(b.cwiseProduct(b));
  // h >= 0 in exact arithmetic; drop negative roundoff.
  return {std::max(0.0, e.trace() - static_cast<double>(b.rows())), Matrix(e.transpose().cwiseProduct(2.0 * b))};
}

inline double acyclicity_value(const Matrix& b) {
  return std::max(0.0, expm(b.cwiseProduct(b)).trace() - static_cast<double>(b.rows()));
}

/// Kahn topological sort of the support {(i,j): |b_ij| > tol}, edge i -> j.
/// Returns nullopt when the support has a directed cycle.
inline std::optional<std::vector<Index>> topological_order(const Matrix& b, double tol = 0.0) {
  const Index p = b.rows();
  std::vector<int> indeg(static_cast<size_t>(p), 0);
  for (Index i = 0; i < p; ++i)
    for (Index j = 0; j < p; ++j)
      if (std::abs(b(i, j)) > tol) ++indeg[static_cast<size_t>(j)];
  std::vector<Index> order;
  std::vector<Index> ready;
  for (Index j = p - 1; j >= 0; --j)
    if (indeg[static_cast<size_t>(j)] == 0) ready.push_back(j);
  while (!ready.empty()) {
    const Index i = ready.back();
    ready.pop_back();
    order.push_back(i);
    for (Index j = p - 1; j >= 0; --j) {
      if (std::abs(b(i, j)) > tol && --indeg[static_cast<size_t>(j)] == 0) ready.push_back(j);
    }
  }
  if (static_cast<Index>(order.size()) != p) return std::nullopt;
  return order;
}

inline bool is_acyclic_support(const Matrix& b, double tol = 0.0) {
  return topological_order(b, tol).has_value();
}

/// Spectral norm of a symmetric matrix.
inline double spectral_norm_sym(const Matrix& m) {
  if (m.rows() == 0) return 0.0;
  const auto ev = Eigen::SelfAdjointEigenSolver<Matrix>(m, Eigen::EigenvaluesOnly).eigenvalues();
  return std::max(std::abs(ev(0)), std::abs(ev(ev.size() - 1)));
}

}  // namespace dcl
