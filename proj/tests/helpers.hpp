#pragma once

#include "istopt/manifold.hpp"
#include "istopt/second_order.hpp"

namespace istopt_test {

using namespace istopt;

// n = 10, p = 4 geometry with A eigenvalues +/-1..+/-5 and J = diag(1,1,-1,-1).
inline SpecPtr test_spec(MetricKind metric, double rho, std::uint64_t seed = 42,
                         MetricCallback fn = {}) {
  const int n = 10, p = 4;
  const Matrix q = random_orthogonal(n, seed);
  Vector d(n);
  d << 1, 2, 3, 4, 5, -1, -2, -3, -4, -5;
  const Matrix a = sym(q * d.asDiagonal() * q.transpose());
  Matrix j = Matrix::Zero(p, p);
  j.diagonal() << 1, 1, -1, -1;
  return make_spec(n, p, a, j, metric, rho, std::move(fn));
}

inline SpecPtr stiefel_spec(MetricKind metric, double rho) {
  return make_spec(6, 3, Matrix::Identity(6, 6), Matrix::Identity(3, 3), metric, rho);
}

// Ambient derivatives of f(X) = tr(X^T M X).
inline EuclideanDerivatives trace_derivs(const Matrix& m, const Matrix& x) {
  return {Matrix(2.0 * m * x), [m](const Matrix& v) { return Matrix(2.0 * m * v); }};
}

// Metric-orthonormal basis of the tangent space, built by projecting the
// coordinate directions and Gram-Schmidt under the Riemannian inner product.
inline std::vector<Matrix> tangent_basis(const WorkspacePtr& w) {
  std::vector<Matrix> basis;
  const int n = w->spec->n, p = w->spec->p;
  Matrix e = Matrix::Zero(n, p);
  for (int a = 0; a < n; ++a) {
    for (int b = 0; b < p; ++b) {
      e(a, b) = 1.0;
      Matrix v = project_closed_form(w, e).xi;
      e(a, b) = 0.0;
      for (const Matrix& q : basis) v -= inner(*w, q, v) * q;
      const double nrm = std::sqrt(inner(*w, v, v));
      if (nrm > 1e-8) basis.push_back(v / nrm);
    }
  }
  return basis;
}

}  // namespace istopt_test
