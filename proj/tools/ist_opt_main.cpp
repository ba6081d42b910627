// ist-opt: benchmark harness for Riemannian optimization on the indefinite
// Stiefel manifold. Subcommands:
//   run    - one (metric, rho, method) configuration, CSV convergence log
//   sweep  - the full 2-metric x {0.5,1,2}-rho x {sd,cg,hybrid} grid
//   plot   - render CSV logs from a directory into one SVG
//   verify - analytic formulas against their brute-force oracles
//
// Exit codes: 0 converged/ok, 2 iteration cap hit, 3 inner failure,
// 64 bad usage. IST_OPT_SEED overrides --seed when set.

#include <CLI11.hpp>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <iostream>

#include "istopt/experiments.hpp"
#include "istopt/oracles.hpp"

using namespace istopt;
namespace fs = std::filesystem;

namespace {

void apply_seed_env(ExperimentConfig& cfg) {
  if (const char* env = std::getenv("IST_OPT_SEED")) {
    cfg.seed = std::strtoull(env, nullptr, 10);
  }
}

int status_code(SolverStatus status) {
  switch (status) {
    case SolverStatus::Converged: return 0;
    case SolverStatus::MaxIter: return 2;
    case SolverStatus::InnerFailure: return 3;
  }
  return 1;
}

void add_common_options(CLI::App* cmd, ExperimentConfig& cfg) {
  cmd->add_option("--n", cfg.n, "ambient dimension")->capture_default_str();
  cmd->add_option("--p", cfg.p, "frame size")->capture_default_str();
  cmd->add_option("--pplus", cfg.p_plus, "number of +1 directions in J")
      ->capture_default_str();
  cmd->add_option("--seed", cfg.seed, "random seed")->capture_default_str();
  cmd->add_option("--outer-tol", cfg.outer_tol, "gradient-norm stopping threshold")
      ->capture_default_str();
  cmd->add_option("--inner-tol", cfg.inner_tol, "Newton-equation residual threshold")
      ->capture_default_str();
  cmd->add_option("--switch-tol", cfg.switch_tol, "hybrid CG-to-Newton switch threshold")
      ->capture_default_str();
  cmd->add_option("--max-outer", cfg.max_outer, "outer iteration cap")->capture_default_str();
  cmd->add_option("--max-inner", cfg.max_inner,
                  "inner CG iteration cap (0 = twice the tangent dimension)")
      ->capture_default_str();
  cmd->add_option("--out", cfg.out_dir, "output directory")->capture_default_str();
  cmd->add_flag("--timing", cfg.timing,
                "write measured wall-clock times into the CSV (not reproducible)");
  cmd->set_config("--config", "", "flat key=value config file; flags override file values");
}

int do_run(ExperimentConfig cfg) {
  cfg.p_minus = cfg.p - cfg.p_plus;
  apply_seed_env(cfg);
  validate(cfg);
  const RunResult result = run_experiment(cfg);
  const auto& last = result.record.rows.back();
  const auto [stat_res, stat_sym] =
      stationarity_check(result.bench.problem, result.trace.final_point->X);
  std::cout << run_name(cfg) << ": status="
            << (result.trace.status == SolverStatus::Converged    ? "converged"
                : result.trace.status == SolverStatus::MaxIter    ? "max-iter"
                                                                  : "inner-failure")
            << " iters=" << last.iter << " f=" << last.f << " gradnorm=" << last.gradnorm
            << "\n  stationarity residual=" << stat_res << " symdefect=" << stat_sym
            << "\n  csv: " << result.csv_path << "\n";
  return status_code(result.trace.status);
}

int do_sweep(ExperimentConfig cfg) {
  cfg.p_minus = cfg.p - cfg.p_plus;
  apply_seed_env(cfg);
  validate(cfg);
  const std::vector<RunResult> results = run_sweep(cfg);
  int code = 0;
  std::cout << "run                     status      iters   final gradnorm\n";
  for (const RunResult& r : results) {
    const auto& last = r.record.rows.back();
    const char* status = r.trace.status == SolverStatus::Converged    ? "converged"
                         : r.trace.status == SolverStatus::MaxIter    ? "max-iter"
                                                                      : "inner-failure";
    std::printf("%-23s %-11s %5d   %.3e\n", run_name(r.cfg).c_str(), status, last.iter,
                last.gradnorm);
    if (r.trace.status == SolverStatus::InnerFailure) code = std::max(code, 3);
    if (r.cfg.method == "hybrid" && r.trace.status != SolverStatus::Converged) {
      code = std::max(code, 2);
    }
  }
  std::cout << "logs and plots in " << cfg.out_dir << "\n";
  return code;
}

int do_plot(const std::string& in_dir, const std::string& out_file) {
  std::vector<std::string> paths;
  for (const auto& entry : fs::directory_iterator(in_dir)) {
    if (entry.path().extension() == ".csv") paths.push_back(entry.path().string());
  }
  std::sort(paths.begin(), paths.end());
  if (paths.empty()) {
    throw std::invalid_argument("plot: no CSV files in " + in_dir);
  }
  std::vector<ConvergenceRecord> records;
  records.reserve(paths.size());
  for (const std::string& p : paths) records.push_back(read_csv(p));
  emit_plot(records, out_file);
  std::cout << "wrote " << out_file << " (" << records.size() << " curves)\n";
  return 0;
}

struct VerifyRow {
  std::string name;
  bool ok;
  double value;
};

int do_verify(std::uint64_t seed) {
  if (const char* env = std::getenv("IST_OPT_SEED")) seed = std::strtoull(env, nullptr, 10);
  std::vector<VerifyRow> rows;
  const auto check = [&rows](const std::string& name, double value, double tol) {
    rows.push_back({name, value <= tol, value});
  };

  for (const char* metric : {"g1", "g2"}) {
    ExperimentConfig cfg;
    cfg.metric = metric;
    cfg.seed = seed;
    const BenchmarkProblem bench = build_benchmark(cfg);
    const SpecPtr spec = bench.spec;
    const WorkspacePtr w = bench.x0;
    const std::string tag = std::string(metric) + ": ";

    {  // closed-form inverse against the assembled matrix
      double worst = 0.0;
      for (std::uint64_t k = 0; k < 20; ++k) {
        const Matrix v = random_normal(10, 4, 100 + k);
        worst = std::max(worst,
                         (metric_apply(*w, metric_inverse_apply(*w, v)) - v).norm() / v.norm());
      }
      check(tag + "inverse composes to identity", worst, 1e-10);
    }
    {  // complement-form inverse and the resolution of identity
      const NullComplement nc = null_complement(*w);
      check(tag + "resolution-of-identity residual", check_identity_residual(*w, nc), 1e-9);
      const Matrix g = metric_matrix_at(*spec, w->X);
      const Matrix via = spec->metric == MetricKind::Canonical1
                             ? inverse1_via_complement(*w, nc)
                             : inverse2_via_complement(*w, nc);
      check(tag + "complement-form inverse", (via * g - Matrix::Identity(10, 10)).norm(), 1e-9);
    }
    {  // Lyapunov projection vs closed form
      double worst = 0.0;
      for (std::uint64_t k = 0; k < 20; ++k) {
        const Matrix y = random_normal(10, 4, 300 + k);
        worst = std::max(worst, (project_lyapunov(w, y).xi - project_closed_form(w, y).xi)
                                    .norm());
      }
      check(tag + "Lyapunov projection vs closed form", worst, 1e-10);
    }
    {  // metric derivative vs finite differences, plus Richardson order
      const Matrix zeta = random_normal(10, 4, 7);
      const Matrix analytic = dmetric(*w, zeta);
      check(tag + "DG vs finite difference",
            (analytic - fd_dmetric(*w, zeta, 1e-5)).norm() / analytic.norm(), 1e-6);
      const double e1 = (fd_dmetric(*w, zeta, 2e-4) - analytic).norm();
      const double e2 = (fd_dmetric(*w, zeta, 1e-4) - analytic).norm();
      check(tag + "FD second-order ratio", e2 / e1, 0.4);
    }
    {  // adjoint pairing and basis assembly
      const Matrix h = sym(random_normal(10, 10, 9));
      const Matrix adj = dmetric_adjoint(*w, h);
      const Matrix z = random_normal(10, 4, 10);
      check(tag + "adjoint pairing identity",
            std::abs(inner(*w, adj, z) - h.cwiseProduct(dmetric(*w, z)).sum()), 1e-9);
      check(tag + "adjoint vs basis assembly", (adj - fd_adjoint_assembly(*w, h)).norm(),
            1e-8);
    }
    {  // Christoffel symmetry and projected fast path
      const TangentVector xi = random_tangent(w, 11);
      const TangentVector eta = random_tangent(w, 12);
      const Matrix gxe = christoffel_ambient(*w, xi.xi, eta.xi);
      check(tag + "Christoffel symmetry",
            (gxe - christoffel_ambient(*w, eta.xi, xi.xi)).norm(), 1e-10);
      check(tag + "projected Christoffel vs Koszul",
            (christoffel_projected(w, xi, eta).xi - project_closed_form(w, gxe).xi).norm(),
            1e-9);
    }
    {  // Hessian against the oracle
      const EuclideanDerivatives derivs{
          bench.problem.egrad(w->X),
          [&bench, w](const Matrix& v) { return bench.problem.ehess(w->X, v); }};
      const TangentVector xi = random_tangent(w, 13);
      const TangentVector fast = riemannian_hessian_apply(w, derivs, xi);
      check(tag + "Hessian vs FD/Koszul oracle",
            (fast.xi - oracle_hessian(w, derivs, xi).xi).norm() /
                std::max(1.0, fast.xi.norm()),
            1e-6);
    }
    if (spec->metric == MetricKind::Canonical1) {  // generalized eigensolver residual
      const GeneralizedEigResult eig = dense_generalized_eig(bench.M, spec->A);
      double worst = 0.0;
      for (int i = 0; i < 10; ++i) {
        const Vector v = eig.eigenvectors.col(i);
        worst = std::max(worst, (bench.M * v - eig.eigenvalues(i) * spec->A * v).norm());
      }
      check("generalized eigenpairs residual", worst, 1e-10);
    }
  }

  bool all_ok = true;
  for (const VerifyRow& row : rows) {
    std::printf("[%s] %-45s %.3e\n", row.ok ? " ok " : "FAIL", row.name.c_str(), row.value);
    all_ok = all_ok && row.ok;
  }
  std::printf("%zu checks, %s\n", rows.size(), all_ok ? "all passed" : "FAILURES present");
  return all_ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Riemannian optimization on the indefinite Stiefel manifold"};
  app.require_subcommand(1);

  ExperimentConfig run_cfg;
  CLI::App* run = app.add_subcommand("run", "run one benchmark configuration");
  run->add_option("--metric", run_cfg.metric, "Riemannian metric (g1 or g2)")
      ->capture_default_str();
  run->add_option("--rho", run_cfg.rho, "metric parameter rho > 0")->capture_default_str();
  run->add_option("--method", run_cfg.method, "sd | cg | hybrid | newton")
      ->capture_default_str();
  add_common_options(run, run_cfg);

  ExperimentConfig sweep_cfg;
  sweep_cfg.max_outer = 2000;
  sweep_cfg.out_dir = "sweep_out";
  CLI::App* sweep = app.add_subcommand("sweep", "run the full benchmark grid");
  add_common_options(sweep, sweep_cfg);

  std::string plot_in, plot_out;
  CLI::App* plot = app.add_subcommand("plot", "render CSV logs into an SVG");
  plot->add_option("--in", plot_in, "directory containing CSV logs")->required();
  plot->add_option("--out", plot_out, "output SVG path")->required();

  std::uint64_t verify_seed = 42;
  CLI::App* verify = app.add_subcommand("verify", "run the oracle verification suite");
  verify->add_option("--seed", verify_seed, "random seed")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 64;
  }

  try {
    if (run->parsed()) return do_run(run_cfg);
    if (sweep->parsed()) return do_sweep(sweep_cfg);
    if (plot->parsed()) return do_plot(plot_in, plot_out);
    if (verify->parsed()) return do_verify(verify_seed);
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 64;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 64;
}
