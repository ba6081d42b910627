#pragma once

#include <algorithm>
#include <functional>
#include <memory>
#include <numeric>
#include <utility>
#include <vector>

#include "istopt/matrix_kernels.hpp"

namespace istopt {

// The manifold {X in R^{n x p} : X^T A X = J} for symmetric invertible A and
// symmetric J with J^2 = I. Points, tangent vectors and the two canonical
// metric families live here.

enum class MetricKind { Canonical1, Canonical2, GeneralLyapunov };

/// Maps an ambient point X to a symmetric positive-definite n x n metric
/// matrix. Only used by the GeneralLyapunov metric.
using MetricCallback = std::function<Matrix(const Matrix&)>;

struct ManifoldSpec {
  int n = 0;
  int p = 0;
  Matrix A;  // n x n symmetric invertible
  Matrix J;  // p x p symmetric, J^2 = I
  MetricKind metric = MetricKind::Canonical1;
  double rho = 1.0;
  MetricCallback metric_fn;  // GeneralLyapunov only

  // Derived data, filled by make_spec.
  Matrix Ainv;
  Vector A_eigenvalues;
  Matrix A_eigenvectors;
  int p_plus = 0;
  int p_minus = 0;
};

using SpecPtr = std::shared_ptr<const ManifoldSpec>;

inline SpecPtr make_spec(int n, int p, const Matrix& A, const Matrix& J,
                         MetricKind metric = MetricKind::Canonical1, double rho = 1.0,
                         MetricCallback metric_fn = {}) {
  if (n < 1 || p < 1 || p > n) {
    throw std::invalid_argument("make_spec: need 1 <= p <= n");
  }
  if (A.rows() != n || A.cols() != n) throw std::invalid_argument("make_spec: A must be n x n");
  if (J.rows() != p || J.cols() != p) throw std::invalid_argument("make_spec: J must be p x p");
  if (!is_symmetric(A)) throw std::invalid_argument("make_spec: A is not symmetric");
  if (!is_symmetric(J)) throw std::invalid_argument("make_spec: J is not symmetric");
  if (!(rho > 0.0)) throw std::invalid_argument("make_spec: rho must be positive");
  if (metric == MetricKind::GeneralLyapunov && !metric_fn) {
    throw std::invalid_argument("make_spec: GeneralLyapunov metric requires a callback");
  }

  auto spec = std::make_shared<ManifoldSpec>();
  spec->n = n;
  spec->p = p;
  spec->A = sym(A);
  spec->J = sym(J);
  spec->metric = metric;
  spec->rho = rho;
  spec->metric_fn = std::move(metric_fn);

  if ((spec->J * spec->J - Matrix::Identity(p, p)).norm() > 1e-12) {
    throw std::invalid_argument("make_spec: J^2 != I");
  }

  const SymEigResult aeig = sym_eig(spec->A);
  const double amax = aeig.eigenvalues.cwiseAbs().maxCoeff();
  int a_pos = 0, a_neg = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double w = aeig.eigenvalues(i);
    if (std::abs(w) < 1e-12 * amax) {
      throw std::domain_error("make_spec: A is numerically singular (eigenvalue " +
                              std::to_string(w) + ")");
    }
    (w > 0.0 ? a_pos : a_neg) += 1;
  }
  spec->A_eigenvalues = aeig.eigenvalues;
  spec->A_eigenvectors = aeig.eigenvectors;
  spec->Ainv =
      sym(aeig.eigenvectors * aeig.eigenvalues.cwiseInverse().asDiagonal() *
          aeig.eigenvectors.transpose());

  const SymEigResult jeig = sym_eig(spec->J);
  for (Eigen::Index i = 0; i < p; ++i) {
    (jeig.eigenvalues(i) > 0.0 ? spec->p_plus : spec->p_minus) += 1;
  }
  if (spec->p_plus > a_pos || spec->p_minus > a_neg) {
    throw std::invalid_argument(
        "make_spec: inertia of J exceeds inertia of A (p+ = " + std::to_string(spec->p_plus) +
        ", p- = " + std::to_string(spec->p_minus) + ")");
  }
  return spec;
}

/// ||X^T A X - J||_F.
inline double feasibility_residual(const ManifoldSpec& spec, const Matrix& x) {
  if (x.rows() != spec.n || x.cols() != spec.p) {
    throw std::invalid_argument("feasibility_residual: X must be n x p");
  }
  detail::require_finite(x, "feasibility_residual");
  return (x.transpose() * spec.A * x - spec.J).norm();
}

/// A feasible point together with the cached matrices every operation reuses:
/// M_X = (X^T X)^{-1}, Pi_X = I - X M_X X^T, S_X = A - A X J X^T A and
/// Q_X = I - X J X^T A. Immutable once built.
struct PointWorkspace {
  SpecPtr spec;
  Matrix X;    // n x p
  Matrix AX;   // A X
  Matrix MX;   // p x p
  Matrix PiX;  // n x n projector onto range(X)^perp
  Matrix SX;   // n x n, S_X X = 0
  Matrix QX;   // n x n idempotent
};

using WorkspacePtr = std::shared_ptr<const PointWorkspace>;

inline WorkspacePtr make_workspace(SpecPtr spec, const Matrix& x, double feas_tol = 1e-8) {
  const double res = feasibility_residual(*spec, x);
  if (!(res <= feas_tol)) {
    throw std::domain_error("make_workspace: infeasible point, ||X^T A X - J||_F = " +
                            std::to_string(res));
  }
  auto w = std::make_shared<PointWorkspace>();
  const int n = spec->n;
  w->X = x;
  w->AX = spec->A * x;
  w->MX = sym((x.transpose() * x).ldlt().solve(Matrix::Identity(spec->p, spec->p)));
  w->PiX = sym(Matrix::Identity(n, n) - x * w->MX * x.transpose());
  w->SX = sym(spec->A - w->AX * spec->J * w->AX.transpose());
  w->QX = Matrix::Identity(n, n) - x * spec->J * w->AX.transpose();
  w->spec = std::move(spec);
  return w;
}

struct TangentVector {
  Matrix xi;  // n x p with sym(X^T A xi) = 0
  WorkspacePtr anchor;
};

/// Assembles the metric matrix G_X at an arbitrary point of the ambient open
/// set (X full rank with X^T A X invertible). Used by the Lyapunov projection
/// path and by finite-difference oracles; production code applies the metric
/// through the factored forms instead.
inline Matrix metric_matrix_at(const ManifoldSpec& spec, const Matrix& x) {
  if (x.rows() != spec.n || x.cols() != spec.p) {
    throw std::invalid_argument("metric_matrix_at: X must be n x p");
  }
  // Ambient-domain test: det(X^T X) != 0 and det(X^T A X) != 0.
  {
    Eigen::JacobiSVD<Matrix> svd(x);
    const auto& sv = svd.singularValues();
    if (sv(0) <= 0.0 || sv(sv.size() - 1) < 1e-12 * sv(0)) {
      throw std::domain_error("metric_matrix_at: X is rank deficient");
    }
    const SymEigResult xax = sym_eig(sym(x.transpose() * spec.A * x));
    const double mx = xax.eigenvalues.cwiseAbs().maxCoeff();
    const double mn = xax.eigenvalues.cwiseAbs().minCoeff();
    if (mx <= 0.0 || mn < 1e-12 * mx) {
      throw std::domain_error("metric_matrix_at: X^T A X is numerically singular");
    }
  }
  switch (spec.metric) {
    case MetricKind::Canonical1: {
      const Matrix ax = spec.A * x;
      const Matrix s = sym(spec.A - ax * spec.J * ax.transpose());
      return sym(ax * ax.transpose() / spec.rho + s * s);
    }
    case MetricKind::Canonical2: {
      const Matrix ax = spec.A * x;
      const Matrix m = sym((x.transpose() * x).ldlt().solve(Matrix::Identity(spec.p, spec.p)));
      return sym(ax * ax.transpose() / spec.rho + Matrix::Identity(spec.n, spec.n) -
                 x * m * x.transpose());
    }
    case MetricKind::GeneralLyapunov:
      return sym(spec.metric_fn(x));
  }
  throw std::logic_error("metric_matrix_at: unknown metric");
}

/// G_X v through the factored forms G^(1) = rho^{-1} AXX^TA + S_X^2 and
/// G^(2) = rho^{-1} AXX^TA + Pi_X. Accepts an n-vector or n x k matrix.
inline Matrix metric_apply(const PointWorkspace& w, const Matrix& v) {
  if (v.rows() != w.spec->n) throw std::invalid_argument("metric_apply: shape mismatch");
  switch (w.spec->metric) {
    case MetricKind::Canonical1:
      return w.AX * (w.AX.transpose() * v) / w.spec->rho + w.SX * (w.SX * v);
    case MetricKind::Canonical2:
      return w.AX * (w.AX.transpose() * v) / w.spec->rho + w.PiX * v;
    case MetricKind::GeneralLyapunov:
      return w.spec->metric_fn(w.X) * v;
  }
  throw std::logic_error("metric_apply: unknown metric");
}

/// G_X^{-1} v via the closed-form inverses G^(1)^{-1} = rho XX^T +
/// A^{-1} Pi_X A^{-1} and G^(2)^{-1} = rho XX^T + A^{-1} S_X^2 A^{-1}.
inline Matrix metric_inverse_apply(const PointWorkspace& w, const Matrix& v) {
  if (v.rows() != w.spec->n) throw std::invalid_argument("metric_inverse_apply: shape mismatch");
  const double rho = w.spec->rho;
  switch (w.spec->metric) {
    case MetricKind::Canonical1:
      return rho * (w.X * (w.X.transpose() * v)) + w.spec->Ainv * (w.PiX * (w.spec->Ainv * v));
    case MetricKind::Canonical2:
      return rho * (w.X * (w.X.transpose() * v)) +
             w.spec->Ainv * (w.SX * (w.SX * (w.spec->Ainv * v)));
    case MetricKind::GeneralLyapunov:
      throw std::domain_error("metric_inverse_apply: no closed-form inverse for general metric");
  }
  throw std::logic_error("metric_inverse_apply: unknown metric");
}

/// tr(a^T G_X b).
inline double inner(const PointWorkspace& w, const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw std::invalid_argument("inner: shape mismatch");
  }
  return (a.cwiseProduct(metric_apply(w, b))).sum();
}

inline double inner(const TangentVector& a, const TangentVector& b) {
  if (a.anchor.get() != b.anchor.get()) {
    throw std::invalid_argument("inner: tangent vectors anchored at different points");
  }
  return inner(*a.anchor, a.xi, b.xi);
}

inline double norm(const TangentVector& a) { return std::sqrt(inner(a, a)); }

/// Orthogonal projection onto the tangent space, identical for both canonical
/// metrics: P(Y) = Y - X J sym(X^T A Y).
inline TangentVector project_closed_form(const WorkspacePtr& w, const Matrix& y) {
  if (y.rows() != w->spec->n || y.cols() != w->spec->p) {
    throw std::invalid_argument("project_closed_form: Y must be n x p");
  }
  Matrix xi = y - w->X * (w->spec->J * sym(w->AX.transpose() * y));
  return {std::move(xi), w};
}

/// Projection through the general-metric route: factor G_X, form
/// K = X^T A G_X^{-1} A X and solve the Lyapunov equation
/// K U + U K = 2 sym(X^T A Y); the projection is Y - G_X^{-1} A X U.
/// `metric_fn` overrides the workspace metric when provided.
inline TangentVector project_lyapunov(const WorkspacePtr& w, const Matrix& y,
                                      const MetricCallback& metric_fn = {}) {
  if (y.rows() != w->spec->n || y.cols() != w->spec->p) {
    throw std::invalid_argument("project_lyapunov: Y must be n x p");
  }
  const Matrix g = metric_fn ? sym(metric_fn(w->X)) : metric_matrix_at(*w->spec, w->X);
  Eigen::LLT<Matrix> llt(g);
  if (llt.info() != Eigen::Success) {
    throw std::domain_error("project_lyapunov: metric matrix is not positive definite");
  }
  const Matrix t = llt.solve(w->AX);                     // G^{-1} A X
  const Matrix k = sym(w->AX.transpose() * t);           // X^T A G^{-1} A X
  const Matrix u = solve_lyapunov(k, 2.0 * sym(w->AX.transpose() * y));
  Matrix xi = y - t * u;
  return {std::move(xi), w};
}

/// Retraction from the tangent space back onto the manifold, built from two
/// matrix exponentials:
///   R_X(xi) = [X xi] exp([[J X^T A xi, -J xi^T A xi], [I, J X^T A xi]])
///             [I; 0] exp(-J X^T A xi).
inline WorkspacePtr retract(const WorkspacePtr& w, const Matrix& xi) {
  const int p = w->spec->p;
  if (xi.rows() != w->spec->n || xi.cols() != p) {
    throw std::invalid_argument("retract: xi must be n x p");
  }
  const Matrix omega = w->spec->J * (w->AX.transpose() * xi);  // J X^T A xi
  const Matrix axi = w->spec->A * xi;
  const Matrix nu = w->spec->J * (xi.transpose() * axi);  // J xi^T A xi

  Matrix block(2 * p, 2 * p);
  block.topLeftCorner(p, p) = omega;
  block.topRightCorner(p, p) = -nu;
  block.bottomLeftCorner(p, p) = Matrix::Identity(p, p);
  block.bottomRightCorner(p, p) = omega;

  Matrix xxi(w->spec->n, 2 * p);
  xxi.leftCols(p) = w->X;
  xxi.rightCols(p) = xi;

  const Matrix y = (xxi * mat_exp(block).leftCols(p)) * mat_exp(-omega);
  return make_workspace(w->spec, y);
}

inline WorkspacePtr retract(const TangentVector& xi) { return retract(xi.anchor, xi.xi); }

/// Random tangent vector of unit norm under the workspace metric.
inline TangentVector random_tangent(const WorkspacePtr& w, std::uint64_t seed) {
  const Matrix z = random_normal(w->spec->n, w->spec->p, seed);
  TangentVector t = project_closed_form(w, z);
  const double nrm = norm(t);
  if (!(nrm > 0.0)) throw std::runtime_error("random_tangent: degenerate sample");
  t.xi /= nrm;
  return t;
}

/// Random feasible point: scaled eigenvectors of A matching the inertia of J,
/// rotated into J's eigenbasis, then moved by a tangent step of length 1/2 so
/// the point does not sit in the eigenbasis of A.
inline WorkspacePtr random_point(const SpecPtr& spec, std::uint64_t seed) {
  const int n = spec->n;
  const int p = spec->p;
  std::mt19937_64 gen(seed);

  // Eigenbasis of J with the +1 directions first: J = Vr J0 Vr^T.
  const SymEigResult jeig = sym_eig(spec->J);
  Matrix vr(p, p);
  int col = 0;
  for (Eigen::Index i = 0; i < p; ++i) {
    if (jeig.eigenvalues(i) > 0.0) vr.col(col++) = jeig.eigenvectors.col(i);
  }
  for (Eigen::Index i = 0; i < p; ++i) {
    if (jeig.eigenvalues(i) < 0.0) vr.col(col++) = jeig.eigenvectors.col(i);
  }

  std::vector<int> pos, neg;
  for (int i = 0; i < n; ++i) {
    (spec->A_eigenvalues(i) > 0.0 ? pos : neg).push_back(i);
  }
  std::shuffle(pos.begin(), pos.end(), gen);
  std::shuffle(neg.begin(), neg.end(), gen);

  Matrix y(n, p);
  for (int i = 0; i < spec->p_plus; ++i) {
    const int k = pos[static_cast<std::size_t>(i)];
    y.col(i) = spec->A_eigenvectors.col(k) / std::sqrt(spec->A_eigenvalues(k));
  }
  for (int i = 0; i < spec->p_minus; ++i) {
    const int k = neg[static_cast<std::size_t>(i)];
    y.col(spec->p_plus + i) = spec->A_eigenvectors.col(k) / std::sqrt(-spec->A_eigenvalues(k));
  }

  WorkspacePtr w0 = make_workspace(spec, y * vr.transpose());
  const TangentVector step = random_tangent(w0, seed ^ 0x9e3779b97f4a7c15ull);
  return retract(w0, 0.5 * step.xi);
}

}  // namespace istopt
