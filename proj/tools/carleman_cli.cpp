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

// carleman_cli: simulate, no-resonance, diagonalize, sweep, bounds, estimate.
// Exit codes: 0 success, 2 precondition violation, 3 numerical failure.

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "carleman/carleman.hpp"

namespace {

using namespace carleman;

struct FlagSpec {
  const char* flag;
  const char* key;
  const char* help;
};

// every flag is a "section.key" override applied after --config
const std::vector<FlagSpec> kFlags = {
    {"--D", "problem.D", "diffusion coefficient (default 0.2)"},
    {"--a", "problem.a", "linear reaction rate (default 0.4)"},
    {"--b", "problem.b", "quadratic reaction rate (default -1)"},
    {"--T", "problem.T", "final time (default 3)"},
    {"--profile", "problem.profile", "initial profile: sin2|gaussian|constant (default sin2)"},
    {"--amplitude", "problem.amplitude", "initial amplitude (default 0.1)"},
    {"-n,--grid", "grid.n", "interior grid points (default 8)"},
    {"-N,--order", "carleman.N", "Carleman truncation order (default 3)"},
    {"--gamma", "carleman.gamma", "rescaling: none|auto|<value> (default none)"},
    {"--lu-threshold", "carleman.lu_threshold", "dense-LU padding up to this leading size (default 128)"},
    {"--max-retries", "carleman.max_retries", "resonance retries with n+1 (default 3)"},
    {"--solver", "solver.method", "euler|taylor|matexp|collocation (default matexp)"},
    {"--steps", "solver.m_steps", "Euler/Taylor time steps (default 5000)"},
    {"-K,--taylor-order", "solver.K", "Taylor order (default 3)"},
    {"-r,--colloc-order", "solver.r", "collocation order (default 16)"},
    {"--windows", "solver.windows", "collocation windows, 0 = automatic (default 0)"},
    {"--eps", "solver.eps", "Chebyshev tolerance (default 1e-10)"},
    {"--samples", "solver.samples", "output intervals on [0, T] (default 64)"},
    {"--seed", "run.seed", "seed (default 0)"},
};

struct CommonArgs {
  std::string config;
  std::string out;
  std::map<std::string, std::string> values;
  std::map<std::string, CLI::Option*> options;
};

void add_common(CLI::App* app, CommonArgs& a) {
  app->add_option("--config", a.config, "sectioned key = value config file");
  app->add_option("-o,--out", a.out, "output directory (default $CARLEMAN_OUT_DIR or ./out)");
  for (const auto& f : kFlags) a.options[f.key] = app->add_option(f.flag, a.values[f.key], f.help);
}

RunConfig resolve(const CommonArgs& a) {
  RunConfig c;
  c.output_dir = default_output_dir();
  if (!a.config.empty()) c = apply_config(c, read_config(a.config));
  std::map<std::string, std::string> flags;
  for (const auto& [key, opt] : a.options)
    if (opt->count() > 0) flags[key] = a.values.at(key);
  c = apply_config(c, flags);
  if (!a.out.empty()) c.output_dir = a.out;
  c.validate();
  return c;
}

std::string fmt(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", x);
  return buf;
}

void print_warnings(const std::vector<std::string>& w) {
  for (const auto& s : w) std::cerr << "warning: " << s << "\n";
}

void write_csv(const RunConfig& c, const std::string& name, const CsvTable& t) {
  const auto path = c.output_dir / name;
  t.write(path);
  std::cout << "wrote " << path.string() << "\n";
}

void write_svg(const RunConfig& c, const std::string& name, const std::string& svg) {
  const auto path = c.output_dir / name;
  write_text(path, svg);
  std::cout << "wrote " << path.string() << "\n";
}

int cmd_simulate(const RunConfig& c) {
  const SimulationResult r = simulate(c);
  print_warnings(r.warnings);
  std::cout << "solver " << solver_name(c.solver) << "  n " << r.prep.n << "  N " << c.N << "  d " << r.prep.system.d
            << "  gamma " << fmt(r.prep.scale.gamma) << "\n";
  if (r.prep.retries) std::cout << "resonance retries: " << r.prep.retries << "\n";
  std::cout << "max error vs reference: " << fmt(r.max_error) << "\n";
  std::cout << "p_success(T) " << fmt(r.measurement.p_success) << "  aa_rounds " << r.measurement.aa_rounds
            << "  p>=1/N " << (r.measurement.regime ? (r.measurement.bound_ok ? "yes" : "no") : "n/a") << "\n";
  if (r.history) std::cout << "history G " << fmt(r.history->G) << "  p_lower " << fmt(r.history->p_lower) << "\n";
  const std::size_t stride = std::max<std::size_t>(1, r.carleman.times.size() / 500);
  const auto [u, diag] = simulation_tables(r, stride);
  const std::string base = "simulate_" + solver_name(c.solver);
  write_csv(c, base + "_u.csv", u);
  write_csv(c, base + "_diagnostics.csv", diag);
  PlotSeries err{"error", {}, {}}, norm{"||u||", {}, {}};
  for (std::size_t i = 0; i < r.carleman.times.size(); i += stride) {
    err.x.push_back(r.carleman.times[i]);
    err.y.push_back(r.error[i]);
    norm.x.push_back(r.reference.times[i]);
    norm.y.push_back(l2_norm(r.reference.states[i]));
  }
  write_svg(c, base + "_error.svg", svg_line_plot({"error vs reference", "t", "||u_ref - u||", true}, {err}));
  write_svg(c, base + "_norm.svg", svg_line_plot({"solution magnitude", "t", "||u(t)||", false}, {norm}));
  return 0;
}

int cmd_no_resonance(const RunConfig& c, bool published) {
  const auto pairs = published ? published_resonance_pairs()
                               : std::vector<std::pair<std::size_t, std::size_t>>{{c.n, c.N}};
  const auto rows = no_resonance_table(c.problem.D, c.problem.a, pairs);
  std::cout << "   n   N  holds  min_gap/max|lambda|  block_gap\n";
  bool all = true;
  for (const auto& r : rows) {
    char line[160];
    std::snprintf(line, sizeof line, "%4zu %3zu  %-5s  %-19s  %s\n", r.n, r.N, r.report.holds ? "yes" : "no",
                  fmt(r.report.min_gap_relative).c_str(), fmt(r.report.block_gap).c_str());
    std::cout << line;
    if (!r.report.near_misses.empty())
      std::cerr << "warning: n=" << r.n << " N=" << r.N << ": " << r.report.near_misses.size() << " near misses\n";
    all = all && r.report.holds;
  }
  write_csv(c, "no_resonance.csv", resonance_csv(rows, c.problem.D, c.problem.a));
  return all ? 0 : 3;
}

int cmd_diagonalize(const RunConfig& c) {
  const PreparedProblem p = prepare(c, true);
  print_warnings(p.warnings);
  const auto& dg = *p.diag;
  std::cout << "n " << p.n << "  N " << c.N << "  d " << dg.d << "  retries " << p.retries << "\n";
  std::cout << "residual ||AV - VL||_F/||A||_F  " << fmt(dg.residual) << "\n";
  std::cout << "inverse  ||V Vinv - I||_F       " << fmt(dg.inverse_residual) << "\n";
  std::cout << "kappa_direct                    " << fmt(dg.kappa_direct) << (dg.kappa_converged ? "" : " (not converged)")
            << "\n";
  std::cout << "log kappa bound (determinant)   " << fmt(dg.log_kappa_guggenheimer) << "\n";
  std::cout << "log |det V|                     " << fmt(dg.log_abs_det_V) << "\n";
  CsvTable t;
  t.header = {"n", "N", "d", "residual", "inverse_residual", "kappa_direct", "log_kappa_bound", "log_abs_det_V"};
  t.add_numeric_row({static_cast<double>(p.n), static_cast<double>(c.N), static_cast<double>(dg.d), dg.residual,
                     dg.inverse_residual, dg.kappa_direct, dg.log_kappa_guggenheimer, dg.log_abs_det_V});
  write_csv(c, "diagonalize.csv", t);
  return 0;
}

std::vector<std::size_t> parse_values(const std::string& s) {
  std::vector<std::size_t> v;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t pos = 0;
      const long long x = std::stoll(item, &pos);
      if (pos != item.size() || x < 1) throw std::invalid_argument(item);
      v.push_back(static_cast<std::size_t>(x));
    } catch (const std::exception&) {
      throw PreconditionError("sweep: bad value '" + item + "'");
    }
  }
  if (v.empty()) throw PreconditionError("sweep: no values");
  return v;
}

int cmd_sweep(const RunConfig& c, const std::string& param, const std::string& values) {
  const auto pts = sweep(c, param, parse_values(values));
  for (const auto& p : pts) std::cout << param << " = " << p.value << "  max error " << fmt(p.max_error) << "\n";
  std::cout << "strictly decreasing: " << (strictly_decreasing(pts) ? "yes" : "no") << "\n";
  const std::string base = "sweep_" + param + "_" + solver_name(c.solver);
  write_csv(c, base + ".csv", sweep_csv(param, pts));
  write_svg(c, base + ".svg", sweep_svg("error vs time, " + solver_name(c.solver), param, pts));
  return 0;
}

int cmd_bounds(const RunConfig& c) {
  const SimulationResult r = simulate(c);
  print_warnings(r.warnings);
  const ErrorBudget b = error_budget(c, r);
  std::cout << "observed max error       " << fmt(b.observed_max_error) << "\n";
  std::cout << "R                        " << fmt(b.R) << "\n";
  std::cout << "Carleman truncation      " << fmt(b.carleman_bound) << "\n";
  std::cout << b.method << " bound" << std::string(b.method.size() < 19 ? 19 - b.method.size() : 1, ' ')
            << fmt(b.method_bound) << (b.method_bound_ok ? "" : " (step-size precondition violated)") << "\n";
  std::cout << "spatial discretization   " << (b.discretization_applicable ? fmt(b.discretization_bound) : std::string("n/a"))
            << (b.discretization_applicable ? "" : " (inapplicable: needs a < 0 and |a| > |b| ||u_in||)") << "\n";
  CsvTable t;
  t.header = {"quantity", "value", "applicable"};
  t.add_row({"observed_max_error", format_double(b.observed_max_error), "true"});
  t.add_row({"R", format_double(b.R), "true"});
  t.add_row({"carleman_truncation", format_double(b.carleman_bound), b.R < 1.0 ? "true" : "false"});
  t.add_row({b.method, format_double(b.method_bound), b.method_bound_ok ? "true" : "false"});
  t.add_row({"discretization", format_double(b.discretization_bound), b.discretization_applicable ? "true" : "false"});
  write_csv(c, "bounds.csv", t);
  return 0;
}

int cmd_estimate(const RunConfig& c) {
  const ResourceEstimate e = measured_resources(c);
  std::cout << e.label << "\n";
  std::cout << "kappa " << fmt(e.inputs.kappa) << "  ||u_in|| " << fmt(e.inputs.u_in_norm) << "  ||u(T)|| "
            << fmt(e.inputs.u_T_norm) << "  norm bound " << fmt(e.norm_bound) << "\n";
  std::cout << "query count (leading) " << fmt(e.query_leading) << "  with polylog " << fmt(e.query_count)
            << "  gate factor " << fmt(e.gate_factor) << "\n";
  for (const auto& r : e.rows)
    std::cout << "  " << r.method << ": " << r.time_scaling << ", " << r.error_scaling << ", " << r.order_scaling
              << "  leading " << fmt(r.leading) << "\n";
  write_csv(c, "resources.csv", resources_csv(e));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Fisher-KPP via Carleman linearization: simulation, diagnostics and resource estimates"};
  app.require_subcommand(1);

  CommonArgs sim, res, dia, swp, bnd, est;
  auto* s_sim = app.add_subcommand("simulate", "run a Carleman solver against the reference integrator");
  add_common(s_sim, sim);
  auto* s_res = app.add_subcommand("no-resonance", "check the no-resonance condition");
  add_common(s_res, res);
  bool published = false;
  s_res->add_flag("--table", published, "check the seven published (n, N) pairs instead of (n, N)");
  auto* s_dia = app.add_subcommand("diagonalize", "build V, V^-1 and report residuals and condition numbers");
  add_common(s_dia, dia);
  auto* s_swp = app.add_subcommand("sweep", "max error versus N, K or r");
  add_common(s_swp, swp);
  std::string param = "N", values = "1,2,3";
  s_swp->add_option("--param", param, "N|K|r (default N)")->check(CLI::IsMember({"N", "K", "r"}));
  s_swp->add_option("--values", values, "comma-separated values (default 1,2,3)");
  auto* s_bnd = app.add_subcommand("bounds", "a priori error bounds next to the observed error");
  add_common(s_bnd, bnd);
  auto* s_est = app.add_subcommand("estimate", "asymptotic resource formulas with measured kappa");
  add_common(s_est, est);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (s_sim->parsed()) return cmd_simulate(resolve(sim));
    if (s_res->parsed()) return cmd_no_resonance(resolve(res), published);
    if (s_dia->parsed()) return cmd_diagonalize(resolve(dia));
    if (s_swp->parsed()) return cmd_sweep(resolve(swp), param, values);
    if (s_bnd->parsed()) return cmd_bounds(resolve(bnd));
    if (s_est->parsed()) return cmd_estimate(resolve(est));
  } catch (const PreconditionError& e) {
    std::cerr << "precondition violated: " << e.what() << "\n";
    return 2;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
