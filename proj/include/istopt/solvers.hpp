#pragma once

#include <chrono>
#include <optional>

#include "istopt/second_order.hpp"

namespace istopt {

/// Objective with its ambient derivatives. The same extension is evaluated at
/// arbitrary ambient points by the finite-difference consistency check.
struct Problem {
  SpecPtr spec;
  std::function<double(const Matrix&)> objective;
  std::function<Matrix(const Matrix&)> egrad;
  std::function<Matrix(const Matrix&, const Matrix&)> ehess;  // (X, xi) -> n x p
};

/// One-shot sanity check that egrad differentiates the objective: central
/// finite difference along a random ambient direction, 1e-6 relative.
inline void check_problem(const Problem& prob, const PointWorkspace& w,
                          std::uint64_t seed = 0x5eedu) {
  Matrix z = random_normal(w.spec->n, w.spec->p, seed);
  z /= z.norm();
  const double h = 1e-5;
  const double fd =
      (prob.objective(w.X + h * z) - prob.objective(w.X - h * z)) / (2.0 * h);
  const double ip = prob.egrad(w.X).cwiseProduct(z).sum();
  if (std::abs(fd - ip) > 1e-6 * std::max(1.0, std::abs(fd))) {
    throw std::invalid_argument("check_problem: egrad is inconsistent with the objective (fd " +
                                std::to_string(fd) + " vs " + std::to_string(ip) + ")");
  }
}

enum class Method { SD, NLCG, Newton, Hybrid };
enum class SolverStatus { Converged, MaxIter, InnerFailure };
enum class IterPhase { SD, CG, Newton };

inline const char* phase_name(IterPhase p) {
  switch (p) {
    case IterPhase::SD: return "sd";
    case IterPhase::CG: return "cg";
    case IterPhase::Newton: return "newton";
  }
  return "?";
}

struct LineSearchParams {
  double initial_step = 1.0;
  double contraction = 0.5;
  double sufficient_decrease = 1e-4;
};

struct SolverConfig {
  Method method = Method::Hybrid;
  double outer_tol = 1e-10;   // gradient-norm threshold
  int max_outer = 500;
  double inner_tol = 1e-10;   // Newton-equation residual threshold
  int max_inner = 0;          // <= 0 selects 2 (np - p(p+1)/2)
  double switch_tol = 1e-6;   // hybrid CG -> Newton switch
  LineSearchParams linesearch;
};

inline int default_max_inner(const ManifoldSpec& spec) {
  const int dim = spec.n * spec.p - spec.p * (spec.p + 1) / 2;
  return 2 * dim;
}

inline void validate(const SolverConfig& cfg) {
  if (!(cfg.outer_tol > 0.0) || !(cfg.inner_tol > 0.0)) {
    throw std::invalid_argument("SolverConfig: tolerances must be positive");
  }
  if (!(cfg.switch_tol >= 0.0)) {
    throw std::invalid_argument("SolverConfig: switch_tol must be nonnegative");
  }
  if (cfg.max_outer < 0) throw std::invalid_argument("SolverConfig: max_outer must be >= 0");
  const auto& ls = cfg.linesearch;
  if (!(ls.initial_step > 0.0) || !(ls.contraction > 0.0 && ls.contraction < 1.0) ||
      !(ls.sufficient_decrease > 0.0 && ls.sufficient_decrease < 1.0)) {
    throw std::invalid_argument("SolverConfig: bad line-search parameters");
  }
}

struct IterationRecord {
  int iter = 0;
  IterPhase phase = IterPhase::SD;
  double f = 0.0;
  double gradnorm = 0.0;   // under the chosen metric
  double step = 0.0;       // step length into this iterate
  int inner_iters = 0;     // inner-CG count of the step into this iterate
  double time_ms = 0.0;    // wall clock spent on the step into this iterate
};

struct SolverTrace {
  std::vector<IterationRecord> rows;
  SolverStatus status = SolverStatus::MaxIter;
  WorkspacePtr final_point;
  int switch_iter = -1;            // hybrid: iterate index where Newton took over
  int safeguard_count = 0;         // inner-CG negative-curvature truncations
  double max_feasibility = 0.0;    // worst ||X^T A X - J||_F over all iterates
};

struct LineSearchResult {
  double step = 0.0;
  WorkspacePtr next;
  double f_next = 0.0;
};

/// Backtracking Armijo search along a descent direction; f0 and slope are the
/// objective value and <grad f, d> at the current point. Returns nothing when
/// 50 halvings fail to produce sufficient decrease.
inline std::optional<LineSearchResult> armijo_linesearch(const Problem& prob,
                                                         const WorkspacePtr& w,
                                                         const TangentVector& direction,
                                                         const LineSearchParams& ls, double f0,
                                                         double slope) {
  if (!(slope < 0.0)) {
    throw std::invalid_argument("armijo_linesearch: not a descent direction (slope = " +
                                std::to_string(slope) + ")");
  }
  double t = ls.initial_step;
  for (int k = 0; k <= 50; ++k) {
    WorkspacePtr next;
    try {
      next = retract(w, t * direction.xi);
    } catch (const std::exception&) {
      t *= ls.contraction;  // overflow or infeasible evaluation: shrink
      continue;
    }
    const double fn = prob.objective(next->X);
    if (fn <= f0 + ls.sufficient_decrease * t * slope) {
      return LineSearchResult{t, next, fn};
    }
    t *= ls.contraction;
  }
  return std::nullopt;
}

inline std::optional<LineSearchResult> armijo_linesearch(const Problem& prob,
                                                         const WorkspacePtr& w,
                                                         const TangentVector& direction,
                                                         const LineSearchParams& ls) {
  const double f0 = prob.objective(w->X);
  const TangentVector g = riemannian_gradient(w, prob.egrad(w->X));
  return armijo_linesearch(prob, w, direction, ls, f0, inner(g, direction));
}

struct NewtonDirection {
  TangentVector xi;
  int inner_iters = 0;
  double residual = 0.0;  // ||Hess[xi] + grad||_X, re-verified after the loop
  bool safeguard = false; // negative curvature truncated the iteration
};

/// Linear conjugate gradient in the tangent space for
/// Hess[xi] = -grad, all inner products under the Riemannian metric.
/// Negative curvature truncates: the current iterate is returned, or -grad
/// when it occurs on the first pass.
template <typename HessApply>
inline NewtonDirection tangent_cg(const WorkspacePtr& w, HessApply&& hess, const Matrix& grad,
                                  double inner_tol, int max_inner) {
  NewtonDirection out;
  Matrix xi = Matrix::Zero(grad.rows(), grad.cols());
  Matrix r = grad;  // residual Hess[xi] + grad at xi = 0
  Matrix d = -r;
  double rr = inner(*w, r, r);

  for (int l = 0; l < max_inner && std::sqrt(rr) >= inner_tol; ++l) {
    const Matrix hd = hess(d);
    const double curvature = inner(*w, d, hd);
    if (!(curvature > 0.0)) {
      out.safeguard = true;
      if (l == 0) xi = -grad;
      break;
    }
    const double t = rr / curvature;
    xi += t * d;
    r += t * hd;
    ++out.inner_iters;
    const double rr_next = inner(*w, r, r);
    d = -r + (rr_next / rr) * d;
    rr = rr_next;
  }

  out.xi = project_closed_form(w, xi);
  const Matrix check = hess(out.xi.xi) + grad;
  out.residual = std::sqrt(inner(*w, check, check));
  return out;
}

/// Solves Newton's equation at the workspace point using the Hessian
/// operator built from the supplied ambient derivatives.
inline NewtonDirection newton_direction(const Problem&, const WorkspacePtr& w,
                                        const EuclideanDerivatives& derivs,
                                        const SolverConfig& cfg) {
  const HessianOperator hop(w, derivs);
  const int max_inner = cfg.max_inner > 0 ? cfg.max_inner : default_max_inner(*w->spec);
  return tangent_cg(
      w, [&](const Matrix& v) { return hop.apply(v).xi; }, hop.gradient().xi, cfg.inner_tol,
      max_inner);
}

namespace detail_solver {

using Clock = std::chrono::steady_clock;

inline double ms_since(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

/// Shared driver for steepest descent (cg_directions = false) and nonlinear
/// CG with Hestenes-Stiefel beta, projection as the transport surrogate and
/// restart to -grad whenever the update is not a descent direction.
inline SolverTrace first_order_run(const Problem& prob, const WorkspacePtr& x0,
                                   const SolverConfig& cfg, bool cg_directions, double stop_tol,
                                   IterPhase phase) {
  SolverTrace trace;
  auto t0 = Clock::now();

  WorkspacePtr w = x0;
  double f = prob.objective(w->X);
  TangentVector g = riemannian_gradient(w, prob.egrad(w->X));
  double gn = norm(g);
  trace.rows.push_back({0, phase, f, gn, 0.0, 0, ms_since(t0)});
  trace.max_feasibility = feasibility_residual(*w->spec, w->X);

  TangentVector prev_g, prev_d;
  bool have_prev = false;

  for (int k = 1;; ++k) {
    if (gn < stop_tol) {
      trace.status = SolverStatus::Converged;
      break;
    }
    if (k > cfg.max_outer) {
      trace.status = SolverStatus::MaxIter;
      break;
    }
    t0 = Clock::now();

    TangentVector d{-g.xi, w};
    if (cg_directions && have_prev) {
      const TangentVector tg = project_closed_form(w, prev_g.xi);
      const TangentVector td = project_closed_form(w, prev_d.xi);
      const Matrix y = g.xi - tg.xi;
      const double denom = inner(*w, td.xi, y);
      if (std::abs(denom) > 1e-300) {
        const double beta = inner(*w, g.xi, y) / denom;
        d.xi = -g.xi + beta * td.xi;
        if (inner(*w, d.xi, g.xi) >= 0.0) d.xi = -g.xi;  // restart keeps descent
      }
    }
    const double slope = inner(*w, d.xi, g.xi);

    const auto ls = armijo_linesearch(prob, w, d, cfg.linesearch, f, slope);
    if (!ls) {
      trace.status = SolverStatus::InnerFailure;
      break;
    }
    prev_g = g;
    prev_d = d;
    have_prev = true;

    w = ls->next;
    f = ls->f_next;
    g = riemannian_gradient(w, prob.egrad(w->X));
    gn = norm(g);
    trace.rows.push_back({k, phase, f, gn, ls->step, 0, ms_since(t0)});
    trace.max_feasibility =
        std::max(trace.max_feasibility, feasibility_residual(*w->spec, w->X));
  }

  trace.final_point = w;
  return trace;
}

/// Newton iteration with unit steps, continuing an existing trace. When the
/// trace is empty an initial row is recorded first.
inline void newton_continue(const Problem& prob, SolverTrace& trace, const SolverConfig& cfg) {
  auto t0 = Clock::now();
  WorkspacePtr w = trace.final_point;

  auto make_hessian = [&](const WorkspacePtr& at) {
    EuclideanDerivatives derivs{prob.egrad(at->X),
                                [&prob, at](const Matrix& v) { return prob.ehess(at->X, v); }};
    return HessianOperator(at, std::move(derivs));
  };

  HessianOperator hop = make_hessian(w);
  double gn = norm(hop.gradient());
  if (trace.rows.empty()) {
    trace.rows.push_back({0, IterPhase::Newton, prob.objective(w->X), gn, 0.0, 0, ms_since(t0)});
    trace.max_feasibility = feasibility_residual(*w->spec, w->X);
  }
  const int max_inner = cfg.max_inner > 0 ? cfg.max_inner : default_max_inner(*w->spec);

  while (true) {
    if (gn < cfg.outer_tol) {
      trace.status = SolverStatus::Converged;
      break;
    }
    const int k = trace.rows.back().iter;
    if (k >= cfg.max_outer) {
      trace.status = SolverStatus::MaxIter;
      break;
    }
    t0 = Clock::now();

    const NewtonDirection nd = tangent_cg(
        w, [&](const Matrix& v) { return hop.apply(v).xi; }, hop.gradient().xi, cfg.inner_tol,
        max_inner);
    if (nd.safeguard) ++trace.safeguard_count;
    if (!nd.safeguard && nd.residual >= cfg.inner_tol) {
      trace.status = SolverStatus::InnerFailure;
      break;
    }

    w = retract(w, nd.xi.xi);
    hop = make_hessian(w);
    gn = norm(hop.gradient());
    trace.rows.push_back(
        {k + 1, IterPhase::Newton, prob.objective(w->X), gn, 1.0, nd.inner_iters, ms_since(t0)});
    trace.max_feasibility =
        std::max(trace.max_feasibility, feasibility_residual(*w->spec, w->X));
  }
  trace.final_point = w;
}

}  // namespace detail_solver

inline SolverTrace steepest_descent(const Problem& prob, const WorkspacePtr& x0,
                                    const SolverConfig& cfg) {
  validate(cfg);
  check_problem(prob, *x0);
  return detail_solver::first_order_run(prob, x0, cfg, false, cfg.outer_tol, IterPhase::SD);
}

inline SolverTrace nonlinear_cg(const Problem& prob, const WorkspacePtr& x0,
                                const SolverConfig& cfg) {
  validate(cfg);
  check_problem(prob, *x0);
  return detail_solver::first_order_run(prob, x0, cfg, true, cfg.outer_tol, IterPhase::CG);
}

inline SolverTrace newton_method(const Problem& prob, const WorkspacePtr& x0,
                                 const SolverConfig& cfg) {
  validate(cfg);
  check_problem(prob, *x0);
  SolverTrace trace;
  trace.final_point = x0;
  detail_solver::newton_continue(prob, trace, cfg);
  return trace;
}

/// Nonlinear CG until the gradient norm falls below switch_tol, then Newton.
inline SolverTrace hybrid(const Problem& prob, const WorkspacePtr& x0, const SolverConfig& cfg) {
  validate(cfg);
  check_problem(prob, *x0);
  const double cg_stop = std::max(cfg.switch_tol, cfg.outer_tol);
  SolverTrace trace =
      detail_solver::first_order_run(prob, x0, cfg, true, cg_stop, IterPhase::CG);
  if (trace.status != SolverStatus::Converged) return trace;  // never reached the switch

  trace.switch_iter = trace.rows.back().iter;
  if (trace.rows.back().gradnorm < cfg.outer_tol) return trace;  // already done
  if (trace.switch_iter == 0) trace.rows.back().phase = IterPhase::Newton;

  detail_solver::newton_continue(prob, trace, cfg);
  return trace;
}

}  // namespace istopt
