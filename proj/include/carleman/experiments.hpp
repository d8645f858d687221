// Copyright 2026 The Carleman-KPP Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Experiment drivers shared by the CLI and the acceptance suite: run
// configuration, problem preparation with resonance retries, simulations,
// sweeps, figure scenarios, error budgets and resource estimates.

#pragma once

#include <cstdlib>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "carleman/bounds.hpp"
#include "carleman/chebyshev.hpp"
#include "carleman/embedding.hpp"
#include "carleman/io.hpp"
#include "carleman/pde.hpp"
#include "carleman/solvers.hpp"
#include "carleman/spectrum.hpp"

namespace carleman {

enum class SolverKind { kEuler, kTaylor, kMatexp, kCollocation };

inline SolverKind parse_solver(const std::string& s) {
  if (s == "euler") return SolverKind::kEuler;
  if (s == "taylor") return SolverKind::kTaylor;
  if (s == "matexp") return SolverKind::kMatexp;
  if (s == "collocation") return SolverKind::kCollocation;
  throw PreconditionError("unknown solver '" + s + "' (euler|taylor|matexp|collocation)");
}

inline std::string solver_name(SolverKind k) {
  switch (k) {
    case SolverKind::kEuler: return "euler";
    case SolverKind::kTaylor: return "taylor";
    case SolverKind::kMatexp: return "matexp";
    case SolverKind::kCollocation: return "collocation";
  }
  return "?";
}

enum class GammaPolicy { kNone, kAuto, kFixed };

struct RunConfig {
  FisherKppProblem problem;
  std::size_t n = 8;
  std::size_t N = 3;
  SolverKind solver = SolverKind::kMatexp;
  std::size_t m_steps = 5000;  // Euler / Taylor steps
  std::size_t K = 3;           // Taylor order
  std::size_t r = 16;          // collocation order
  std::size_t windows = 0;     // collocation windows, 0 = ceil(||A|| T / 2)
  double eps = 1e-10;          // Chebyshev tolerance
  std::size_t samples = 64;    // output intervals on [0, T]
  GammaPolicy gamma_policy = GammaPolicy::kNone;
  double gamma = 1.0;
  std::size_t lu_threshold = 128;
  std::size_t max_retries = 3;
  std::filesystem::path output_dir = "out";
  unsigned seed = 0;

  void validate() const {
    problem.validate();
    if (n < 1) throw PreconditionError("config: n must be >= 1");
    if (N < 1) throw PreconditionError("config: N must be >= 1");
    if (m_steps < 1 || K < 1 || r < 1 || samples < 1)
      throw PreconditionError("config: m_steps, K, r and samples must be >= 1");
    if (!(eps > 0.0 && eps < 1.0)) throw PreconditionError("config: eps must lie in (0, 1)");
    if (gamma_policy == GammaPolicy::kFixed && !(gamma > 0.0 && std::isfinite(gamma)))
      throw PreconditionError("config: gamma must be > 0");
  }
};

/// Default output directory: $CARLEMAN_OUT_DIR, else ./out.
inline std::filesystem::path default_output_dir() {
  if (const char* e = std::getenv("CARLEMAN_OUT_DIR"); e && *e) return e;
  return "out";
}

namespace detail {

inline double to_double(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const double x = std::stod(v, &pos);
    if (pos != v.size() || !std::isfinite(x)) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw PreconditionError("config: '" + key + "' is not a finite number: " + v);
  }
}

inline std::size_t to_count(const std::string& key, const std::string& v) {
  const double x = to_double(key, v);
  if (x < 0.0 || x != std::floor(x)) throw PreconditionError("config: '" + key + "' must be a non-negative integer");
  return static_cast<std::size_t>(x);
}

}  // namespace detail

/// Applies "section.key" entries (see parse_config). Unknown keys are errors.
inline RunConfig apply_config(RunConfig c, const std::map<std::string, std::string>& kv) {
  for (const auto& [key, v] : kv) {
    if (key == "problem.D") c.problem.D = detail::to_double(key, v);
    else if (key == "problem.a") c.problem.a = detail::to_double(key, v);
    else if (key == "problem.b") c.problem.b = detail::to_double(key, v);
    else if (key == "problem.T") c.problem.T = detail::to_double(key, v);
    else if (key == "problem.profile") c.problem.profile = parse_profile(v);
    else if (key == "problem.amplitude") c.problem.amplitude = detail::to_double(key, v);
    else if (key == "grid.n") c.n = detail::to_count(key, v);
    else if (key == "carleman.N") c.N = detail::to_count(key, v);
    else if (key == "carleman.gamma") {
      if (v == "none") c.gamma_policy = GammaPolicy::kNone;
      else if (v == "auto") c.gamma_policy = GammaPolicy::kAuto;
      else c.gamma_policy = GammaPolicy::kFixed, c.gamma = detail::to_double(key, v);
    } else if (key == "carleman.lu_threshold") c.lu_threshold = detail::to_count(key, v);
    else if (key == "carleman.max_retries") c.max_retries = detail::to_count(key, v);
    else if (key == "solver.method") c.solver = parse_solver(v);
    else if (key == "solver.m_steps") c.m_steps = detail::to_count(key, v);
    else if (key == "solver.K") c.K = detail::to_count(key, v);
    else if (key == "solver.r") c.r = detail::to_count(key, v);
    else if (key == "solver.windows") c.windows = detail::to_count(key, v);
    else if (key == "solver.eps") c.eps = detail::to_double(key, v);
    else if (key == "solver.samples") c.samples = detail::to_count(key, v);
    else if (key == "output.dir") c.output_dir = v;
    else if (key == "run.seed") c.seed = static_cast<unsigned>(detail::to_count(key, v));
    else throw PreconditionError("config: unknown key '" + key + "'");
  }
  return c;
}

// ---------------------------------------------------------------------------
// preparation

struct PreparedProblem {
  std::size_t n = 0;          // grid size actually used
  std::size_t retries = 0;
  QuadraticOde ode;           // unscaled
  RescaleInfo scale;          // gamma = 1 when no rescaling
  QuadraticOde scaled;        // the ODE the Carleman system is built from
  CarlemanSystem system;
  NoResonanceReport resonance;
  std::optional<Diagonalization> diag;
  std::vector<std::string> warnings;
};

/// Discretizes, rescales and embeds; with `diagonalize`, also builds V and
/// V^{-1}, retrying with n+1 grid points on a resonance failure.
inline PreparedProblem prepare(const RunConfig& c, bool diagonalize) {
  c.validate();
  std::size_t n = c.n;
  for (std::size_t attempt = 0;; ++attempt, ++n) {
    PreparedProblem p;
    p.n = n;
    p.retries = attempt;
    p.ode = discretize(c.problem, n);
    if (c.gamma_policy == GammaPolicy::kNone) {
      p.scaled = p.ode;
    } else {
      auto rs = c.gamma_policy == GammaPolicy::kAuto ? rescale(p.ode) : rescale(p.ode, c.gamma);
      p.scaled = std::move(rs.ode);
      p.scale = rs.info;
      if (!rs.info.warning.empty()) p.warnings.push_back(rs.info.warning);
    }
    p.system = build_carleman(p.scaled, c.N, 1.0);
    p.resonance = check_no_resonance(p.ode.lambda_F1, c.N);
    if (!p.resonance.near_misses.empty())
      p.warnings.push_back(std::to_string(p.resonance.near_misses.size()) +
                           " near-resonant combinations (gap < 1e-6 max|lambda|); expect a large kappa");
    try {
      if (diagonalize) {
        if (!p.resonance.holds) throw ResonanceError("no-resonance condition fails at n = " + std::to_string(n));
        DiagonalizeOptions opt;
        opt.lu_threshold = c.lu_threshold;
        p.diag = iterative_diagonalize(p.system, p.scaled, opt);
      }
      if (attempt > 0)
        p.warnings.push_back("resonance at n = " + std::to_string(c.n) + "; grid enlarged to n = " +
                             std::to_string(n));
      return p;
    } catch (const ResonanceError& e) {
      if (attempt >= c.max_retries)
        throw ResonanceError(std::string(e.what()) + "; gave up after " + std::to_string(attempt) + " retries");
    }
  }
}

// ---------------------------------------------------------------------------
// simulation

struct SimulationResult {
  PreparedProblem prep;
  Trajectory reference;      // u, unscaled
  Trajectory carleman;       // full y, in the scaled variables
  Vector error;              // ||u_ref(t) - γ y_1(t)|| per sample
  double max_error = 0.0;
  MeasurementReport measurement;
  std::optional<HistoryStats> history;
  std::vector<std::string> warnings;
};

/// Max over samples of ||u_ref(t) - γ y_1(t)||; the trajectories must share
/// sample times.
inline Vector error_series(const Trajectory& reference, const Trajectory& carl, double gamma) {
  if (reference.times.size() != carl.times.size())
    throw DimensionError("error_series: trajectories sampled differently");
  Vector e(reference.times.size());
  for (std::size_t i = 0; i < e.size(); ++i) {
    const auto y1 = carl.first_block(i);
    double s = 0.0;
    for (std::size_t j = 0; j < y1.size(); ++j) {
      const double d = reference.states[i][j] - gamma * y1[j];
      s += d * d;
    }
    e[i] = std::sqrt(s);
  }
  return e;
}

inline double max_of(const Vector& v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, x);
  return m;
}

inline Trajectory run_solver(const RunConfig& c, const PreparedProblem& p, const Vector& y_in) {
  const double T = c.problem.T;
  switch (c.solver) {
    case SolverKind::kEuler: return solve_euler(p.system, y_in, c.m_steps, T);
    case SolverKind::kTaylor: return solve_taylor(p.system, y_in, c.K, c.m_steps, T);
    case SolverKind::kMatexp: {
      const Vector times = uniform_times(T, c.samples);
      return matexp_trajectory(*p.diag, y_in, times, c.eps);
    }
    case SolverKind::kCollocation: {
      const Vector times = uniform_times(T, c.samples);
      const double nA = norm_bound(p.n, c.N, c.problem.D, c.problem.a, p.scaled.norm_F2);
      CollocationOptions o{c.r, c.windows ? c.windows : collocation_windows(nA, T)};
      return solve_collocation(*p.diag, y_in, T, times, o);
    }
  }
  throw PreconditionError("run_solver: unknown solver");
}

inline SimulationResult simulate(const RunConfig& c) {
  const bool needs_diag = c.solver == SolverKind::kMatexp || c.solver == SolverKind::kCollocation;
  SimulationResult out;
  out.prep = prepare(c, needs_diag);
  out.warnings = out.prep.warnings;
  const Vector y_in = lift_initial(out.prep.scaled.u_in, c.N).flatten();
  out.carleman = run_solver(c, out.prep, y_in);
  out.reference = solve_reference(out.prep.ode, out.carleman.times);
  out.error = error_series(out.reference, out.carleman, out.prep.scale.gamma);
  out.max_error = max_of(out.error);
  out.measurement = measurement_report(out.prep.system, out.carleman.final_state());
  if (c.solver == SolverKind::kEuler || c.solver == SolverKind::kTaylor) out.history = history_norm_stats(out.carleman);
  return out;
}

/// (t, x_1..x_n) for the reference and the Carleman first block (unscaled),
/// and (t, norm_block_1..N, p_success, error) diagnostics.
inline std::pair<CsvTable, CsvTable> simulation_tables(const SimulationResult& r, std::size_t stride = 1) {
  CsvTable u, diag;
  const std::size_t n = r.prep.n, N = r.prep.system.N;
  u.header = {"t"};
  for (std::size_t j = 1; j <= n; ++j) u.header.push_back("x_" + std::to_string(j));
  for (std::size_t j = 1; j <= n; ++j) u.header.push_back("ref_x_" + std::to_string(j));
  diag.header = {"t"};
  for (std::size_t j = 1; j <= N; ++j) diag.header.push_back("norm_block_" + std::to_string(j));
  diag.header.push_back("p_success");
  diag.header.push_back("error");
  const std::size_t count = r.carleman.times.size();
  for (std::size_t i = 0; i < count; i += std::max<std::size_t>(stride, 1)) {
    std::vector<double> row{r.carleman.times[i]};
    const auto y1 = r.carleman.first_block(i);
    for (double x : y1) row.push_back(r.prep.scale.gamma * x);
    for (double x : r.reference.states[i]) row.push_back(x);
    u.add_numeric_row(row);
    const auto cv = r.prep.system.split(r.carleman.states[i]);
    std::vector<double> d{r.carleman.times[i]};
    double ssq = 0.0;
    for (const auto& b : cv.blocks) {
      d.push_back(l2_norm(b));
      ssq += d.back() * d.back();
    }
    d.push_back(ssq > 0.0 ? d[1] * d[1] / ssq : 0.0);
    d.push_back(r.error[i]);
    diag.add_numeric_row(d);
  }
  return {u, diag};
}

// ---------------------------------------------------------------------------
// tables and sweeps

struct ResonanceRow {
  std::size_t n = 0, N = 0;
  NoResonanceReport report;
};

/// The seven (n, N) pairs of the published no-resonance table.
inline std::vector<std::pair<std::size_t, std::size_t>> published_resonance_pairs() {
  return {{4, 5}, {8, 3}, {8, 4}, {8, 5}, {16, 3}, {16, 4}, {32, 3}};
}

inline std::vector<ResonanceRow> no_resonance_table(double D, double a,
                                                    const std::vector<std::pair<std::size_t, std::size_t>>& pairs) {
  std::vector<ResonanceRow> rows;
  for (const auto& [n, N] : pairs) rows.push_back({n, N, check_no_resonance(f1_spectrum(n, D, a), N)});
  return rows;
}

inline CsvTable resonance_csv(const std::vector<ResonanceRow>& rows, double D, double a) {
  CsvTable t;
  t.header = {"n", "N", "D", "a", "holds", "min_gap", "min_gap_relative", "block_gap"};
  for (const auto& r : rows)
    t.add_row({std::to_string(r.n), std::to_string(r.N), format_double(D), format_double(a),
               r.report.holds ? "true" : "false", format_double(r.report.min_gap),
               format_double(r.report.min_gap_relative), format_double(r.report.block_gap)});
  return t;
}

struct SweepPoint {
  double value = 0.0;
  double max_error = 0.0;
  Vector times, error;
};

/// Varies N, K (Taylor order or Chebyshev order per leg) or r and records the
/// max-over-time first-block error against the reference.
inline std::vector<SweepPoint> sweep(RunConfig c, const std::string& parameter, const std::vector<std::size_t>& values) {
  std::vector<SweepPoint> pts;
  for (std::size_t v : values) {
    RunConfig cc = c;
    if (parameter == "N") cc.N = v;
    else if (parameter == "K") cc.K = v;
    else if (parameter == "r") cc.r = v;
    else throw PreconditionError("sweep: parameter must be N, K or r");
    SweepPoint sp;
    sp.value = static_cast<double>(v);
    if (parameter == "K" && cc.solver == SolverKind::kMatexp) {
      // fixed Chebyshev order per leg, `samples` legs
      const PreparedProblem p = prepare(cc, true);
      const Vector y_in = lift_initial(p.scaled.u_in, cc.N).flatten();
      const Trajectory tr = matexp_trajectory(*p.diag, y_in, cc.problem.T, cc.samples, v);
      const Trajectory ref = solve_reference(p.ode, tr.times);
      sp.times = tr.times;
      sp.error = error_series(ref, tr, p.scale.gamma);
    } else {
      const SimulationResult r = simulate(cc);
      sp.times = r.carleman.times;
      sp.error = r.error;
    }
    sp.max_error = max_of(sp.error);
    pts.push_back(std::move(sp));
  }
  return pts;
}

inline CsvTable sweep_csv(const std::string& parameter, const std::vector<SweepPoint>& pts) {
  CsvTable t;
  t.header = {parameter, "max_error"};
  for (const auto& p : pts) t.add_numeric_row({p.value, p.max_error});
  return t;
}

inline std::string sweep_svg(const std::string& title, const std::string& parameter,
                             const std::vector<SweepPoint>& pts) {
  std::vector<PlotSeries> s;
  for (const auto& p : pts) {
    PlotSeries ps;
    ps.name = parameter + " = " + format_double(p.value);
    ps.x = p.times;
    ps.y = p.error;
    s.push_back(std::move(ps));
  }
  return svg_line_plot({title, "t", "absolute error", true}, s);
}

inline bool strictly_decreasing(const std::vector<SweepPoint>& pts) {
  for (std::size_t i = 1; i < pts.size(); ++i)
    if (!(pts[i].max_error < pts[i - 1].max_error)) return false;
  return true;
}

// ---------------------------------------------------------------------------
// budgets and resources

struct ErrorBudget {
  double carleman_bound = 0.0;  // at T; NaN when R >= 1
  double method_bound = 0.0;    // euler / taylor / chebyshev eps / collocation
  bool method_bound_ok = true;
  std::string method;
  double discretization_bound = 0.0;
  bool discretization_applicable = false;
  double observed_max_error = 0.0;
  double R = 0.0;
};

/// ||∂³u/∂x³|| of the initial profile on the grid, by central differences
/// of the sampled profile (one-sided near the boundary).
inline double third_derivative_norm(const FisherKppProblem& p, std::size_t n) {
  const double h = 1.0 / static_cast<double>(n + 1);
  Vector d3(n);
  for (std::size_t j = 1; j <= n; ++j) {
    const double x = static_cast<double>(j) * h;
    d3[j - 1] = (p.initial(x + 2 * h) - 2 * p.initial(x + h) + 2 * p.initial(x - h) - p.initial(x - 2 * h)) /
                (2.0 * h * h * h);
  }
  return l2_norm(d3);
}

inline ErrorBudget error_budget(const RunConfig& c, const SimulationResult& r) {
  ErrorBudget b;
  const auto& ode = r.prep.ode;
  const double T = c.problem.T;
  const double u_norm = l2_norm(ode.u_in);
  b.observed_max_error = r.max_error;
  b.method = solver_name(c.solver);
  try {
    b.R = compute_R(ode);
    b.carleman_bound = bound_carleman_truncation(u_norm, b.R, c.N, ode.lambda_F1.front(), T);
  } catch (const PreconditionError&) {
    b.R = std::numeric_limits<double>::quiet_NaN();
    b.carleman_bound = std::numeric_limits<double>::quiet_NaN();
  }
  double max_y = 0.0;
  for (const auto& s : r.carleman.states) max_y = std::max(max_y, l2_norm(s));
  const double y0 = l2_norm(r.carleman.states.front());
  const double nA = norm_bound(r.prep.n, c.N, c.problem.D, c.problem.a, r.prep.scaled.norm_F2);
  switch (c.solver) {
    case SolverKind::kEuler: {
      const auto e = bound_euler(c.N, T, T / static_cast<double>(c.m_steps), norm_f1_closed_form(r.prep.n, c.problem.D, c.problem.a),
                                 r.prep.scaled.norm_F2, max_y);
      b.method_bound = e.value;
      b.method_bound_ok = e.precondition_ok;
      break;
    }
    case SolverKind::kTaylor:
      b.method_bound = static_cast<double>(c.m_steps) * bound_taylor(nA, T / static_cast<double>(c.m_steps), c.K, y0);
      break;
    case SolverKind::kMatexp: b.method_bound = c.eps; break;
    case SolverKind::kCollocation: {
      const std::size_t w = c.windows ? c.windows : collocation_windows(nA, T);
      const double kappa = r.prep.diag ? r.prep.diag->kappa_direct : 1.0;
      b.method_bound = bound_collocation(w, kappa, y0, c.r);
      break;
    }
  }
  const auto d = bound_discretization(r.prep.n, c.problem.a, c.problem.b, u_norm, T,
                                      third_derivative_norm(c.problem, r.prep.n));
  b.discretization_bound = d.value;
  b.discretization_applicable = d.precondition_ok;
  return b;
}

/// Resource formulas with κ_V and ||u(T)|| measured on the configured problem.
inline ResourceEstimate measured_resources(const RunConfig& c) {
  const PreparedProblem p = prepare(c, true);
  const Trajectory ref = solve_reference(p.ode, c.problem.T, 1);
  ResourceInputs in;
  in.n = p.n;
  in.N = c.N;
  in.D = c.problem.D;
  in.a = c.problem.a;
  in.b = c.problem.b;
  in.T = c.problem.T;
  in.eps = c.eps;
  in.kappa = p.diag->kappa_direct;
  in.u_in_norm = l2_norm(p.ode.u_in);
  in.u_T_norm = l2_norm(ref.final_state());
  return estimate_resources(in);
}

inline CsvTable resources_csv(const ResourceEstimate& e) {
  CsvTable t;
  t.header = {"method", "time_scaling", "error_scaling", "order_scaling", "leading_factor", "with_polylog"};
  for (const auto& r : e.rows)
    t.add_row({r.method, r.time_scaling, r.error_scaling, r.order_scaling, format_double(r.leading),
               format_double(r.with_polylog)});
  t.add_row({"spectral_queries", "T", "polylog(1/eps)", "kappa 3N N(4D(n+1)^2+a+|b|)", format_double(e.query_leading),
             format_double(e.query_count)});
  return t;
}

}  // namespace carleman
