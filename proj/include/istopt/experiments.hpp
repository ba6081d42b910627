#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "istopt/solvers.hpp"

namespace istopt {

// Benchmark harness: the generalized-eigenvalue trace objective, the random
// test problem, CSV convergence logs and SVG convergence plots.

struct ExperimentConfig {
  int n = 10;
  int p = 4;
  int p_plus = 2;
  int p_minus = 2;
  std::uint64_t seed = 42;
  std::string metric = "g1";      // g1 | g2
  double rho = 1.0;
  std::string method = "hybrid";  // sd | cg | hybrid | newton
  double outer_tol = 1e-10;
  double inner_tol = 1e-10;
  double switch_tol = 1e-6;
  int max_outer = 500;
  int max_inner = 0;
  std::string out_dir = ".";
  bool timing = false;  // write measured wall clock into the CSV (breaks reproducibility)
};

inline void validate(const ExperimentConfig& cfg) {
  if (cfg.p_plus + cfg.p_minus != cfg.p) {
    throw std::invalid_argument("ExperimentConfig: p_plus + p_minus must equal p");
  }
  if (cfg.p < 1 || cfg.p > cfg.n) throw std::invalid_argument("ExperimentConfig: need 1 <= p <= n");
  if (cfg.p_plus < 0 || cfg.p_minus < 0) {
    throw std::invalid_argument("ExperimentConfig: negative inertia counts");
  }
  if (cfg.metric != "g1" && cfg.metric != "g2") {
    throw std::invalid_argument("ExperimentConfig: metric must be g1 or g2");
  }
  if (cfg.method != "sd" && cfg.method != "cg" && cfg.method != "hybrid" &&
      cfg.method != "newton") {
    throw std::invalid_argument("ExperimentConfig: method must be sd, cg, hybrid or newton");
  }
  if (!(cfg.rho > 0.0)) throw std::invalid_argument("ExperimentConfig: rho must be positive");
  if (!(cfg.outer_tol > 0.0) || !(cfg.inner_tol > 0.0) || !(cfg.switch_tol > 0.0)) {
    throw std::invalid_argument("ExperimentConfig: tolerances must be positive");
  }
  if (cfg.max_outer < 0) throw std::invalid_argument("ExperimentConfig: max_outer must be >= 0");
}

/// f(X) = tr(X^T M X) with egrad = 2 M X and ehess[xi] = 2 M xi.
inline Problem trace_objective(SpecPtr spec, const Matrix& m) {
  if (m.rows() != spec->n || m.cols() != spec->n) {
    throw std::invalid_argument("trace_objective: M must be n x n");
  }
  if (!is_symmetric(m)) throw std::invalid_argument("trace_objective: M must be symmetric");
  const Matrix ms = sym(m);
  Problem prob;
  prob.spec = std::move(spec);
  prob.objective = [ms](const Matrix& x) { return (x.transpose() * ms * x).trace(); };
  prob.egrad = [ms](const Matrix& x) { return Matrix(2.0 * ms * x); };
  prob.ehess = [ms](const Matrix&, const Matrix& xi) { return Matrix(2.0 * ms * xi); };
  return prob;
}

/// Eigenvalues 1..ceil(n/2), -1..-floor(n/2); for n = 10 this is
/// {1,...,5,-1,...,-5}.
inline Vector benchmark_spectrum(int n) {
  Vector d(n);
  const int npos = (n + 1) / 2;
  for (int i = 0; i < npos; ++i) d(i) = i + 1;
  for (int i = npos; i < n; ++i) d(i) = -(i - npos + 1);
  return d;
}

struct BenchmarkProblem {
  SpecPtr spec;
  Matrix M;  // SPD objective matrix
  WorkspacePtr x0;
  Problem problem;
};

/// A = P diag(spectrum) P^T with P random orthogonal, J = diag(I_{p+}, -I_{p-}),
/// M random SPD, x0 a random feasible point. Deterministic per seed.
inline BenchmarkProblem build_benchmark(const ExperimentConfig& cfg) {
  validate(cfg);
  const Matrix p_orth = random_orthogonal(cfg.n, cfg.seed);
  const Matrix a = sym(p_orth * benchmark_spectrum(cfg.n).asDiagonal() * p_orth.transpose());
  Matrix j = Matrix::Zero(cfg.p, cfg.p);
  for (int i = 0; i < cfg.p; ++i) j(i, i) = i < cfg.p_plus ? 1.0 : -1.0;

  const MetricKind kind =
      cfg.metric == "g1" ? MetricKind::Canonical1 : MetricKind::Canonical2;
  BenchmarkProblem bench;
  bench.spec = make_spec(cfg.n, cfg.p, a, j, kind, cfg.rho);
  bench.M = random_spd(cfg.n, cfg.seed + 1);
  bench.x0 = random_point(bench.spec, cfg.seed + 2);
  bench.problem = trace_objective(bench.spec, bench.M);
  return bench;
}

/// First-order stationarity diagnostics for the trace objective:
/// residual = ||M X - A X J X^T M X||_F and symdefect = ||skew(J X^T M X)||_F.
inline std::pair<double, double> stationarity_check(const Problem& prob, const Matrix& x) {
  const Matrix mx = 0.5 * prob.egrad(x);  // M X
  const Matrix jxmx = prob.spec->J * (x.transpose() * mx);
  const double residual = (mx - prob.spec->A * x * jxmx).norm();
  const double symdefect = skew(jxmx).norm();
  return {residual, symdefect};
}

struct ConvergenceRow {
  int iter = 0;
  std::string phase;
  double f = 0.0;
  double gradnorm = 0.0;
  double step = 0.0;
  int inner_iters = 0;
  double time_ms = 0.0;
};

struct ConvergenceRecord {
  std::string name;
  std::vector<ConvergenceRow> rows;
};

inline ConvergenceRecord to_record(const SolverTrace& trace, const std::string& name,
                                   bool timing) {
  ConvergenceRecord rec;
  rec.name = name;
  rec.rows.reserve(trace.rows.size());
  for (const IterationRecord& r : trace.rows) {
    rec.rows.push_back({r.iter, phase_name(r.phase), r.f, r.gradnorm, r.step, r.inner_iters,
                        timing ? r.time_ms : 0.0});
  }
  return rec;
}

namespace detail_csv {

inline std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace detail_csv

inline void write_csv(const ConvergenceRecord& rec, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("write_csv: cannot open " + path);
  out << "iter,phase,f,gradnorm,step,inner_iters,time_ms\n";
  for (const ConvergenceRow& r : rec.rows) {
    out << r.iter << ',' << r.phase << ',' << detail_csv::fmt(r.f) << ','
        << detail_csv::fmt(r.gradnorm) << ',' << detail_csv::fmt(r.step) << ',' << r.inner_iters
        << ',' << detail_csv::fmt(r.time_ms) << '\n';
  }
  if (!out) throw std::runtime_error("write_csv: error writing " + path);
}

inline ConvergenceRecord read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("read_csv: cannot open " + path);
  ConvergenceRecord rec;
  rec.name = std::filesystem::path(path).stem().string();
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("read_csv: empty file " + path);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    ConvergenceRow row;
    std::getline(ss, cell, ',');
    row.iter = std::stoi(cell);
    std::getline(ss, row.phase, ',');
    std::getline(ss, cell, ',');
    row.f = std::stod(cell);
    std::getline(ss, cell, ',');
    row.gradnorm = std::stod(cell);
    std::getline(ss, cell, ',');
    row.step = std::stod(cell);
    std::getline(ss, cell, ',');
    row.inner_iters = std::stoi(cell);
    std::getline(ss, cell, ',');
    row.time_ms = std::stod(cell);
    rec.rows.push_back(std::move(row));
  }
  return rec;
}

/// Convergence plot: log10 of the gradient norm against the iterate index,
/// one polyline per record. Self-contained SVG, no plotting dependency.
inline void emit_plot(const std::vector<ConvergenceRecord>& records, const std::string& path) {
  if (records.empty()) throw std::invalid_argument("emit_plot: no records");
  for (const auto& r : records) {
    if (r.rows.empty()) throw std::invalid_argument("emit_plot: record '" + r.name + "' is empty");
  }

  const double width = 860, height = 540;
  const double ml = 70, mr = 170, mt = 30, mb = 55;
  const double pw = width - ml - mr, ph = height - mt - mb;

  int xmax = 1;
  double ymin = 1e300, ymax = -1e300;
  for (const auto& r : records) {
    for (const auto& row : r.rows) {
      xmax = std::max(xmax, row.iter);
      const double y = std::log10(std::max(row.gradnorm, 1e-16));
      ymin = std::min(ymin, y);
      ymax = std::max(ymax, y);
    }
  }
  ymin = std::floor(ymin) - 0.5;
  ymax = std::ceil(ymax) + 0.5;

  const auto px = [&](double it) { return ml + pw * it / xmax; };
  const auto py = [&](double y) { return mt + ph * (ymax - y) / (ymax - ymin); };

  static const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                                  "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f"};
  const int ncolors = 8;

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
      << height << "\" viewBox=\"0 0 " << width << " " << height << "\">\n";
  svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";

  // axes
  svg << "<line x1=\"" << ml << "\" y1=\"" << mt << "\" x2=\"" << ml << "\" y2=\"" << mt + ph
      << "\" stroke=\"black\"/>\n";
  svg << "<line x1=\"" << ml << "\" y1=\"" << mt + ph << "\" x2=\"" << ml + pw << "\" y2=\""
      << mt + ph << "\" stroke=\"black\"/>\n";

  const int ystep = std::max(1, static_cast<int>(std::ceil((ymax - ymin) / 8.0)));
  for (int yt = static_cast<int>(std::ceil(ymin)); yt <= static_cast<int>(std::floor(ymax));
       yt += ystep) {
    svg << "<line x1=\"" << ml - 4 << "\" y1=\"" << py(yt) << "\" x2=\"" << ml << "\" y2=\""
        << py(yt) << "\" stroke=\"black\"/>\n";
    svg << "<text x=\"" << ml - 8 << "\" y=\"" << py(yt) + 4
        << "\" font-size=\"11\" text-anchor=\"end\">" << yt << "</text>\n";
  }
  const int xstep = std::max(1, xmax / 8);
  for (int xt = 0; xt <= xmax; xt += xstep) {
    svg << "<line x1=\"" << px(xt) << "\" y1=\"" << mt + ph << "\" x2=\"" << px(xt) << "\" y2=\""
        << mt + ph + 4 << "\" stroke=\"black\"/>\n";
    svg << "<text x=\"" << px(xt) << "\" y=\"" << mt + ph + 18
        << "\" font-size=\"11\" text-anchor=\"middle\">" << xt << "</text>\n";
  }
  svg << "<text x=\"" << ml + pw / 2 << "\" y=\"" << height - 12
      << "\" font-size=\"12\" text-anchor=\"middle\">iteration</text>\n";
  svg << "<text x=\"16\" y=\"" << mt + ph / 2
      << "\" font-size=\"12\" text-anchor=\"middle\" transform=\"rotate(-90 16 " << mt + ph / 2
      << ")\">log10 gradient norm</text>\n";

  for (std::size_t i = 0; i < records.size(); ++i) {
    const char* color = palette[i % ncolors];
    svg << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
    bool first = true;
    for (const auto& row : records[i].rows) {
      const double y = std::log10(std::max(row.gradnorm, 1e-16));
      if (!first) svg << ' ';
      svg << px(row.iter) << ',' << py(y);
      first = false;
    }
    svg << "\"/>\n";
    const double ly = mt + 16 + 18 * static_cast<double>(i);
    svg << "<line x1=\"" << ml + pw + 12 << "\" y1=\"" << ly - 4 << "\" x2=\"" << ml + pw + 34
        << "\" y2=\"" << ly - 4 << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
    svg << "<text x=\"" << ml + pw + 40 << "\" y=\"" << ly
        << "\" font-size=\"11\">" << records[i].name << "</text>\n";
  }
  svg << "</svg>\n";

  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("emit_plot: cannot open " + path);
  out << svg.str();
  if (!out) throw std::runtime_error("emit_plot: error writing " + path);
}

inline std::string run_name(const ExperimentConfig& cfg) {
  return cfg.metric + "_rho" + detail_csv::fmt(cfg.rho) + "_" + cfg.method;
}

struct RunResult {
  ExperimentConfig cfg;
  BenchmarkProblem bench;
  SolverTrace trace;
  ConvergenceRecord record;
  std::string csv_path;
};

/// Builds the benchmark for the configuration, runs the requested method and
/// writes the convergence CSV under out_dir.
inline RunResult run_experiment(const ExperimentConfig& cfg) {
  RunResult result;
  result.cfg = cfg;
  result.bench = build_benchmark(cfg);

  SolverConfig scfg;
  scfg.outer_tol = cfg.outer_tol;
  scfg.inner_tol = cfg.inner_tol;
  scfg.switch_tol = cfg.switch_tol;
  scfg.max_outer = cfg.max_outer;
  scfg.max_inner = cfg.max_inner;

  const Problem& prob = result.bench.problem;
  const WorkspacePtr& x0 = result.bench.x0;
  if (cfg.method == "sd") {
    result.trace = steepest_descent(prob, x0, scfg);
  } else if (cfg.method == "cg") {
    result.trace = nonlinear_cg(prob, x0, scfg);
  } else if (cfg.method == "newton") {
    result.trace = newton_method(prob, x0, scfg);
  } else {
    result.trace = hybrid(prob, x0, scfg);
  }

  result.record = to_record(result.trace, run_name(cfg), cfg.timing);
  std::filesystem::create_directories(cfg.out_dir);
  result.csv_path = (std::filesystem::path(cfg.out_dir) / (run_name(cfg) + ".csv")).string();
  write_csv(result.record, result.csv_path);
  return result;
}

/// The full benchmark grid: both metrics, rho in {0.5, 1, 2}, methods
/// sd / cg / hybrid. Writes one CSV per run and one comparison SVG per
/// (metric, rho) cell.
inline std::vector<RunResult> run_sweep(const ExperimentConfig& base) {
  std::vector<RunResult> results;
  for (const char* metric : {"g1", "g2"}) {
    for (double rho : {0.5, 1.0, 2.0}) {
      std::vector<ConvergenceRecord> cell;
      for (const char* method : {"sd", "cg", "hybrid"}) {
        ExperimentConfig cfg = base;
        cfg.metric = metric;
        cfg.rho = rho;
        cfg.method = method;
        results.push_back(run_experiment(cfg));
        cell.push_back(results.back().record);
      }
      const std::string svg_path =
          (std::filesystem::path(base.out_dir) /
           (std::string(metric) + "_rho" + detail_csv::fmt(rho) + ".svg"))
              .string();
      emit_plot(cell, svg_path);
    }
  }
  return results;
}

}  // namespace istopt
