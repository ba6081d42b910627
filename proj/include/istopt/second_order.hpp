#pragma once

#include "istopt/manifold.hpp"

namespace istopt {

// Second-order geometry for the two canonical metrics: derivatives of the
// metric field, their adjoints, the Christoffel function obtained from
// Koszul's formula, and the resulting Riemannian gradient and Hessian.

namespace detail {

inline void require_canonical(const ManifoldSpec& spec, const char* who) {
  if (spec.metric == MetricKind::GeneralLyapunov) {
    throw std::domain_error(std::string(who) +
                            ": second-order formulas exist only for the canonical metrics");
  }
}

}  // namespace detail

/// Directional derivative of the metric field, DG(X)[zeta], as a symmetric
/// n x n matrix. Valid for any ambient direction zeta.
inline Matrix dmetric(const PointWorkspace& w, const Matrix& zeta) {
  detail::require_canonical(*w.spec, "dmetric");
  if (zeta.rows() != w.spec->n || zeta.cols() != w.spec->p) {
    throw std::invalid_argument("dmetric: zeta must be n x p");
  }
  const Matrix& a = w.spec->A;
  const double rho = w.spec->rho;
  const Matrix t1 = (2.0 / rho) * a * sym(w.X * zeta.transpose()) * a;
  if (w.spec->metric == MetricKind::Canonical1) {
    const Matrix t2 = a * sym(w.X * (w.spec->J * zeta.transpose())) * a * w.SX;
    return sym(t1 - 4.0 * sym(t2));
  }
  const Matrix t2 = sym(w.X * (w.MX * zeta.transpose()));
  const Matrix t3 = w.X * (w.MX * sym(zeta.transpose() * w.X) * w.MX) * w.X.transpose();
  return sym(t1 - 2.0 * t2 + 2.0 * t3);
}

/// Adjoint DG(X)^*[H] of the metric derivative with respect to the Riemannian
/// inner product, for symmetric H.
inline Matrix dmetric_adjoint(const PointWorkspace& w, const Matrix& h) {
  detail::require_canonical(*w.spec, "dmetric_adjoint");
  if (h.rows() != w.spec->n || h.cols() != w.spec->n) {
    throw std::invalid_argument("dmetric_adjoint: H must be n x n");
  }
  if (!is_symmetric(h, 1e-10)) {
    throw std::invalid_argument("dmetric_adjoint: H must be symmetric");
  }
  const Matrix& a = w.spec->A;
  const double rho = w.spec->rho;
  Matrix arg;
  if (w.spec->metric == MetricKind::Canonical1) {
    arg = (2.0 / rho) * a * (h * w.AX) - 4.0 * sym(a * (w.SX * (h * a))) * (w.X * w.spec->J);
  } else {
    arg = (2.0 / rho) * a * (h * w.AX) - 2.0 * h * (w.X * w.MX) +
          2.0 * w.X * (w.MX * (w.X.transpose() * (h * w.X)) * w.MX);
  }
  return metric_inverse_apply(w, arg);
}

/// Christoffel function on the ambient open set from Koszul's formula:
/// Gamma(xi, eta) = (G^{-1}(DG[xi] eta + DG[eta] xi) - DG^*[sym(xi eta^T)])/2.
inline Matrix christoffel_ambient(const PointWorkspace& w, const Matrix& xi, const Matrix& eta) {
  const Matrix mixed = dmetric(w, xi) * eta + dmetric(w, eta) * xi;
  return 0.5 * (metric_inverse_apply(w, mixed) - dmetric_adjoint(w, sym(xi * eta.transpose())));
}

/// Ingredients of the on-manifold Christoffel expressions for tangent inputs.
struct ChristoffelTerms {
  Matrix Bprime;    // sym(X xi^T) A eta + sym(X eta^T) A xi - sym(xi eta^T) A X
  Matrix B;         // xi X^T A eta + eta X^T A xi
  Matrix C;         // metric-1 correction term
  Matrix D;         // metric-2 correction, computed in the O(n p^2) form
  Matrix E;         // p x p metric-2 term
  Matrix symPi;     // sym(xi^T Pi_X eta)
  Matrix OmegaXi;   // X^T A xi, skew for tangent xi
  Matrix OmegaEta;  // X^T A eta
};

inline ChristoffelTerms christoffel_terms(const PointWorkspace& w, const TangentVector& xi,
                                          const TangentVector& eta) {
  if (xi.anchor.get() != eta.anchor.get() || xi.anchor.get() != &w) {
    throw std::invalid_argument("christoffel_terms: tangent vectors not anchored at this point");
  }
  const Matrix& a = w.spec->A;
  const Matrix& j = w.spec->J;
  const Matrix& x = w.X;
  const Matrix& u = xi.xi;
  const Matrix& v = eta.xi;

  ChristoffelTerms t;
  t.OmegaXi = w.AX.transpose() * u;
  t.OmegaEta = w.AX.transpose() * v;
  t.B = u * t.OmegaEta + v * t.OmegaXi;

  const Matrix au = a * u;
  const Matrix av = a * v;
  t.Bprime = sym(x * u.transpose()) * av + sym(x * v.transpose()) * au -
             sym(u * v.transpose()) * w.AX;

  t.C = sym(a * sym(x * (j * u.transpose())) * a * w.SX) * v +
        sym(a * sym(x * (j * v.transpose())) * a * w.SX) * u -
        sym(a * (w.SX * (sym(u * v.transpose()) * a))) * (x * j);

  const Matrix mxv = w.MX * (x.transpose() * v);
  const Matrix mxu = w.MX * (x.transpose() * u);
  t.D = x * (w.MX * sym(u.transpose() * v)) + u * skew(mxv) + v * skew(mxu);

  t.E = sym(u.transpose() * x) * (w.MX * (x.transpose() * v)) +
        sym(v.transpose() * x) * (w.MX * (x.transpose() * u)) -
        x.transpose() * sym(u * v.transpose()) * (x * w.MX);

  t.symPi = sym(u.transpose() * (w.PiX * v));
  return t;
}

/// On-manifold Christoffel function before the simplification lemma,
/// Gamma^(1) = G^{-1}(rho^{-1} A B' - 2C) and
/// Gamma^(2) = G^{-1}(rho^{-1} A B' - D + X M_X E). Kept as a cross-check
/// against both the ambient Koszul path and the projected fast path.
inline Matrix christoffel_reference(const PointWorkspace& w, const TangentVector& xi,
                                    const TangentVector& eta) {
  detail::require_canonical(*w.spec, "christoffel_reference");
  const ChristoffelTerms t = christoffel_terms(w, xi, eta);
  const Matrix ab = w.spec->A * t.Bprime / w.spec->rho;
  if (w.spec->metric == MetricKind::Canonical1) {
    return metric_inverse_apply(w, ab - 2.0 * t.C);
  }
  return metric_inverse_apply(w, ab - t.D + w.X * (w.MX * t.E));
}

/// Tangent projection of the Christoffel function, using the simplified
/// expressions valid for tangent inputs at a feasible point.
inline TangentVector christoffel_projected(const WorkspacePtr& w, const TangentVector& xi,
                                           const TangentVector& eta) {
  detail::require_canonical(*w->spec, "christoffel_projected");
  const ChristoffelTerms t = christoffel_terms(*w, xi, eta);
  const double rho = w->spec->rho;
  const Matrix symOmega = sym(t.OmegaXi * t.OmegaEta);
  Matrix main, rest;
  if (w->spec->metric == MetricKind::Canonical1) {
    main = w->spec->Ainv * (w->PiX * (t.B / rho - 2.0 * (w->spec->Ainv * t.C)));
    rest = 2.0 * (w->X * (-rho * (w->X.transpose() * t.C) + symOmega));
  } else {
    main = w->spec->Ainv *
           (w->SX * ((w->SX * t.B) / rho - t.D + w->AX * (w->spec->J * t.symPi)));
    rest = w->X * (-rho * t.symPi + 2.0 * symOmega);
  }
  TangentVector out = project_closed_form(w, rest);
  out.xi += main;
  return out;
}

/// Ambient derivatives of the smooth extension of the objective.
struct EuclideanDerivatives {
  Matrix egrad;                                   // n x p
  std::function<Matrix(const Matrix&)> ehess_of;  // tangent direction -> n x p
};

/// Riemannian gradient: G^{-1} egrad projected onto the tangent space. For
/// the canonical metrics X^T A G^{-1} K = rho J X^T K collapses the
/// projection; the general metric goes through the Lyapunov equation.
inline TangentVector riemannian_gradient(const WorkspacePtr& w, const Matrix& egrad) {
  if (egrad.rows() != w->spec->n || egrad.cols() != w->spec->p) {
    throw std::invalid_argument("riemannian_gradient: egrad must be n x p");
  }
  if (w->spec->metric == MetricKind::GeneralLyapunov) {
    const Matrix g = sym(w->spec->metric_fn(w->X));
    Eigen::LLT<Matrix> llt(g);
    if (llt.info() != Eigen::Success) {
      throw std::domain_error("riemannian_gradient: metric matrix is not positive definite");
    }
    const Matrix u = llt.solve(egrad);
    const Matrix t = llt.solve(w->AX);
    const Matrix k = sym(w->AX.transpose() * t);
    const Matrix uf = solve_lyapunov(k, 2.0 * sym(w->AX.transpose() * u));
    return {u - t * uf, w};
  }
  const Matrix u = metric_inverse_apply(*w, egrad);
  const Matrix wsym = w->spec->rho * sym(w->spec->J * (w->X.transpose() * egrad));
  return {u - w->X * (w->spec->J * wsym), w};
}

/// Hessian of the objective as a linear operator on the tangent space at one
/// point. Precomputes everything that does not depend on the direction so
/// that repeated applies inside an inner CG solve stay cheap.
class HessianOperator {
 public:
  HessianOperator(WorkspacePtr w, EuclideanDerivatives derivs)
      : w_(std::move(w)), derivs_(std::move(derivs)) {
    detail::require_canonical(*w_->spec, "HessianOperator");
    ginv_egrad_ = metric_inverse_apply(*w_, derivs_.egrad);
    // sym(X^T A G^{-1} egrad) = rho sym(J X^T egrad)
    wsym_ = w_->spec->rho * sym(w_->spec->J * (w_->X.transpose() * derivs_.egrad));
    grad_ = TangentVector{ginv_egrad_ - w_->X * (w_->spec->J * wsym_), w_};
    omega_g_ = w_->AX.transpose() * grad_.xi;
    const Matrix& a = w_->spec->A;
    if (w_->spec->metric == MetricKind::Canonical1) {
      kg_ = sym(a * sym(w_->X * (w_->spec->J * grad_.xi.transpose())) * a * w_->SX);
    } else {
      mx_xt_g_ = w_->MX * (w_->X.transpose() * grad_.xi);
      pix_g_ = w_->PiX * grad_.xi;
    }
  }

  const TangentVector& gradient() const { return grad_; }
  const WorkspacePtr& point() const { return w_; }

  TangentVector apply(const TangentVector& xi) const {
    if (xi.anchor.get() != w_.get()) {
      throw std::invalid_argument("HessianOperator::apply: direction anchored elsewhere");
    }
    return apply(xi.xi);
  }

  TangentVector apply(const Matrix& xi) const {
    const Matrix& a = w_->spec->A;
    const Matrix& j = w_->spec->J;
    const Matrix& x = w_->X;
    const Matrix& g = grad_.xi;
    const double rho = w_->spec->rho;

    const Matrix omega_xi = w_->AX.transpose() * xi;
    const Matrix b = xi * omega_g_ + g * omega_xi;
    const Matrix sym_omega = sym(omega_xi * omega_g_);
    const Matrix dg_term = metric_inverse_apply(*w_, dmetric(*w_, xi) * ginv_egrad_);
    const Matrix eh_term = metric_inverse_apply(*w_, derivs_.ehess_of(xi));
    const Matrix drift = xi * (j * wsym_);

    Matrix main, rest;
    if (w_->spec->metric == MetricKind::Canonical1) {
      const Matrix kxi = sym(a * sym(x * (j * xi.transpose())) * a * w_->SX);
      const Matrix c = kxi * g + kg_ * xi - sym(a * (w_->SX * (sym(xi * g.transpose()) * a))) * (x * j);
      main = w_->spec->Ainv * (w_->PiX * (b / rho - 2.0 * (w_->spec->Ainv * c)));
      rest = 2.0 * (x * (-rho * (x.transpose() * c) + sym_omega)) - dg_term + eh_term - drift;
    } else {
      const Matrix sym_pi = sym(xi.transpose() * pix_g_);
      const Matrix d = x * (w_->MX * sym(xi.transpose() * g)) + xi * skew(mx_xt_g_) +
                       g * skew(w_->MX * (x.transpose() * xi));
      main = w_->spec->Ainv *
             (w_->SX * ((w_->SX * b) / rho - d + w_->AX * (j * sym_pi)));
      rest = x * (-rho * sym_pi + 2.0 * sym_omega) - dg_term + eh_term - drift;
    }
    TangentVector out = project_closed_form(w_, rest);
    out.xi += main;
    return out;
  }

 private:
  WorkspacePtr w_;
  EuclideanDerivatives derivs_;
  TangentVector grad_;
  Matrix ginv_egrad_;  // G^{-1} egrad
  Matrix wsym_;        // p x p, sym(X^T A G^{-1} egrad)
  Matrix omega_g_;     // X^T A grad
  Matrix kg_;          // metric 1: sym(A sym(X J grad^T) A S_X)
  Matrix mx_xt_g_;     // metric 2: M_X X^T grad
  Matrix pix_g_;       // metric 2: Pi_X grad
};

inline TangentVector riemannian_hessian_apply(const WorkspacePtr& w,
                                              const EuclideanDerivatives& derivs,
                                              const TangentVector& xi) {
  return HessianOperator(w, derivs).apply(xi);
}

/// Hessian through the generic assembly
///   P(-G^{-1} DG[xi] G^{-1} egrad + G^{-1} ehess(xi)
///     - xi J sym(X^T A G^{-1} egrad) + Gamma(xi, grad f)),
/// kept alongside the per-metric closed forms as an equality check.
inline TangentVector riemannian_hessian_assembled(const WorkspacePtr& w,
                                                  const EuclideanDerivatives& derivs,
                                                  const TangentVector& xi) {
  detail::require_canonical(*w->spec, "riemannian_hessian_assembled");
  const TangentVector g = riemannian_gradient(w, derivs.egrad);
  const Matrix u = metric_inverse_apply(*w, derivs.egrad);
  const Matrix raw = -metric_inverse_apply(*w, dmetric(*w, xi.xi) * u) +
                     metric_inverse_apply(*w, derivs.ehess_of(xi.xi)) -
                     xi.xi * (w->spec->J * sym(w->AX.transpose() * u)) +
                     christoffel_ambient(*w, xi.xi, g.xi);
  return project_closed_form(w, raw);
}

}  // namespace istopt
