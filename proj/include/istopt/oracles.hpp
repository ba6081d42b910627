#pragma once

#include "istopt/second_order.hpp"

namespace istopt {

// Brute-force and finite-difference counterparts of the analytic formulas.
// Everything here trades speed for independence from the production paths.

struct NullComplement {
  Matrix Xperp;  // n x (n-p), orthonormal columns, X^T Xperp = 0
};

/// Orthonormal basis of range(X)^perp from the trailing left singular
/// vectors of X.
inline NullComplement null_complement(const PointWorkspace& w) {
  const int n = w.spec->n;
  const int p = w.spec->p;
  Eigen::JacobiSVD<Matrix> svd(w.X, Eigen::ComputeFullU);
  return {svd.matrixU().rightCols(n - p)};
}

/// Residual of X J X^T A + A^{-1} Xperp (Xperp^T A^{-1} Xperp)^{-1} Xperp^T = I.
/// Throws when the middle factor is numerically singular (possible for
/// indefinite A and unlucky X); callers resample.
inline double check_identity_residual(const PointWorkspace& w, const NullComplement& nc) {
  const int n = w.spec->n;
  const Matrix& xp = nc.Xperp;
  const Matrix mid = sym(xp.transpose() * (w.spec->Ainv * xp));
  const SymEigResult es = sym_eig(mid);
  const double mx = es.eigenvalues.cwiseAbs().maxCoeff();
  const double mn = es.eigenvalues.cwiseAbs().minCoeff();
  if (mx <= 0.0 || mn < 1e-12 * mx) {
    throw std::domain_error("check_identity_residual: Xperp^T A^{-1} Xperp is singular");
  }
  const Matrix mid_inv = es.eigenvectors * es.eigenvalues.cwiseInverse().asDiagonal() *
                         es.eigenvectors.transpose();
  const Matrix lhs = w.X * w.spec->J * w.AX.transpose() +
                     w.spec->Ainv * xp * mid_inv * xp.transpose();
  return (lhs - Matrix::Identity(n, n)).norm();
}

/// G^(1)^{-1} in the complement form rho XX^T +
/// A^{-1} Xperp (Xperp^T Xperp)^{-1} Xperp^T A^{-1}.
inline Matrix inverse1_via_complement(const PointWorkspace& w, const NullComplement& nc) {
  const Matrix& xp = nc.Xperp;
  const Matrix mid = sym(xp.transpose() * xp).ldlt().solve(
      Matrix::Identity(xp.cols(), xp.cols()));
  return w.spec->rho * w.X * w.X.transpose() +
         w.spec->Ainv * xp * mid * xp.transpose() * w.spec->Ainv;
}

/// G^(2)^{-1} in the complement form rho XX^T + A^{-1} Xperp K^{-1}
/// Xperp^T Xperp K^{-1} Xperp^T A^{-1} with K = Xperp^T A^{-1} Xperp.
inline Matrix inverse2_via_complement(const PointWorkspace& w, const NullComplement& nc) {
  const Matrix& xp = nc.Xperp;
  const Matrix k = sym(xp.transpose() * (w.spec->Ainv * xp));
  const SymEigResult es = sym_eig(k);
  const double mx = es.eigenvalues.cwiseAbs().maxCoeff();
  if (mx <= 0.0 || es.eigenvalues.cwiseAbs().minCoeff() < 1e-12 * mx) {
    throw std::domain_error("inverse2_via_complement: Xperp^T A^{-1} Xperp is singular");
  }
  const Matrix kinv = es.eigenvectors * es.eigenvalues.cwiseInverse().asDiagonal() *
                      es.eigenvectors.transpose();
  return w.spec->rho * w.X * w.X.transpose() +
         w.spec->Ainv * xp * kinv * (xp.transpose() * xp) * kinv * xp.transpose() * w.spec->Ainv;
}

/// Central finite difference of the metric field, evaluating the defining
/// formulas at the perturbed (generally infeasible) ambient points.
inline Matrix fd_dmetric(const PointWorkspace& w, const Matrix& zeta, double h) {
  if (!(h > 0.0)) throw std::invalid_argument("fd_dmetric: h must be positive");
  Matrix gp, gm;
  try {
    gp = metric_matrix_at(*w.spec, w.X + h * zeta);
    gm = metric_matrix_at(*w.spec, w.X - h * zeta);
  } catch (const std::domain_error&) {
    throw std::domain_error("fd_dmetric: step too large, X +/- h zeta left the ambient domain");
  }
  return (gp - gm) / (2.0 * h);
}

/// Adjoint reconstructed from first principles: assemble
/// Theta(H)_{ab} = tr(H DG[e_ab]) over all n*p coordinate directions and
/// solve G u = Theta with an independent factorization of the assembled G.
inline Matrix fd_adjoint_assembly(const PointWorkspace& w, const Matrix& h) {
  if (!is_symmetric(h, 1e-10)) {
    throw std::invalid_argument("fd_adjoint_assembly: H must be symmetric");
  }
  const int n = w.spec->n;
  const int p = w.spec->p;
  Matrix theta(n, p);
  Matrix e = Matrix::Zero(n, p);
  for (int a = 0; a < n; ++a) {
    for (int b = 0; b < p; ++b) {
      e(a, b) = 1.0;
      theta(a, b) = h.cwiseProduct(dmetric(w, e)).sum();
      e(a, b) = 0.0;
    }
  }
  const Matrix g = metric_matrix_at(*w.spec, w.X);
  Eigen::LLT<Matrix> llt(g);
  if (llt.info() != Eigen::Success) {
    throw std::domain_error("fd_adjoint_assembly: assembled metric is not positive definite");
  }
  return llt.solve(theta);
}

/// Reference Hessian: finite-difference metric derivatives, the assembled
/// adjoint, the Koszul Christoffel function and the Lyapunov-equation
/// projection, combined exactly as the connection prescribes. Every linear
/// solve goes through an LLT of the assembled metric rather than the
/// closed-form inverse.
inline TangentVector oracle_hessian(const WorkspacePtr& w, const EuclideanDerivatives& derivs,
                                    const TangentVector& xi, double h = 1e-5) {
  const Matrix g_mat = metric_matrix_at(*w->spec, w->X);
  Eigen::LLT<Matrix> llt(g_mat);
  if (llt.info() != Eigen::Success) {
    throw std::domain_error("oracle_hessian: assembled metric is not positive definite");
  }
  const Matrix t = llt.solve(w->AX);
  const Matrix k = sym(w->AX.transpose() * t);
  const auto project = [&](const Matrix& y) -> Matrix {
    const Matrix u = solve_lyapunov(k, 2.0 * sym(w->AX.transpose() * y));
    return y - t * u;
  };

  const Matrix u = llt.solve(derivs.egrad);
  const Matrix grad = project(u);  // gradient through the Lyapunov route

  const Matrix dg_xi = fd_dmetric(*w, xi.xi, h);
  const Matrix dg_g = fd_dmetric(*w, grad, h);
  const Matrix gamma = 0.5 * llt.solve(dg_xi * grad + dg_g * xi.xi) -
                       0.5 * fd_adjoint_assembly(*w, sym(xi.xi * grad.transpose()));

  const Matrix wsym = sym(w->AX.transpose() * u);
  const Matrix dv = -llt.solve(dg_xi * u) + llt.solve(derivs.ehess_of(xi.xi)) -
                    xi.xi * (w->spec->J * wsym) -
                    w->X * (w->spec->J * sym(xi.xi.transpose() * (w->spec->A * u)));
  return {project(dv + gamma), w};
}

struct GeneralizedEigResult {
  Vector eigenvalues;  // ascending
  Matrix eigenvectors;
};

/// Dense solver for M v = lambda A v with M symmetric positive-definite and
/// A symmetric invertible, via the reversed pencil A v = mu M v.
inline GeneralizedEigResult dense_generalized_eig(const Matrix& m, const Matrix& a) {
  detail::require_square(m, "dense_generalized_eig");
  detail::require_square(a, "dense_generalized_eig");
  if (m.rows() != a.rows()) {
    throw std::invalid_argument("dense_generalized_eig: size mismatch");
  }
  if (!is_symmetric(m) || !is_symmetric(a)) {
    throw std::invalid_argument("dense_generalized_eig: matrices must be symmetric");
  }
  Eigen::GeneralizedSelfAdjointEigenSolver<Matrix> es(sym(a), sym(m));
  if (es.info() != Eigen::Success) {
    throw std::runtime_error("dense_generalized_eig: solver breakdown");
  }
  const Eigen::Index n = m.rows();
  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  Vector lambda(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double mu = es.eigenvalues()(i);
    if (mu == 0.0) throw std::runtime_error("dense_generalized_eig: zero reversed eigenvalue");
    lambda(i) = 1.0 / mu;
  }
  std::sort(order.begin(), order.end(), [&](int i, int j) { return lambda(i) < lambda(j); });
  GeneralizedEigResult out;
  out.eigenvalues.resize(n);
  out.eigenvectors.resize(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    out.eigenvalues(i) = lambda(order[static_cast<std::size_t>(i)]);
    out.eigenvectors.col(i) = es.eigenvectors().col(order[static_cast<std::size_t>(i)]);
  }
  return out;
}

}  // namespace istopt
