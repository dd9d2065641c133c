#pragma once

// Command-line front end: dispatches the constants / solve / study /
// validate-law subcommands, writes CSV and legacy-VTK artifacts, and maps
// every outcome onto a small exit-code contract so CI can gate on the
// process status alone:
//   0  success (all gates and checks passed)
//   1  usage error (unknown command or malformed arguments)
//   2  configuration or environment error (parse failure, invalid values,
//      infeasible solver preconditions, I/O failure)
//   3  a gate or verification check failed (smallness gate, study check,
//      law-validator violation)
//   4  the time stepper failed mid-run; partial artifacts were written and
//      flagged in status.csv

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "shvi/config.hpp"
#include "shvi/core.hpp"
#include "shvi/fespace.hpp"
#include "shvi/fields.hpp"
#include "shvi/friction.hpp"
#include "shvi/mesh.hpp"
#include "shvi/rothe.hpp"
#include "shvi/spectral.hpp"
#include "shvi/verify.hpp"

namespace shvi {

inline constexpr int exit_ok = 0;
inline constexpr int exit_usage = 1;
inline constexpr int exit_config = 2;
inline constexpr int exit_gate = 3;
inline constexpr int exit_solve = 4;

namespace cli_detail {

inline std::string csv_quote(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

struct Assembled {
  Mesh mesh;
  DofMap dm;
  DiscreteSystem sys;
};

inline Assembled assemble_from(const RunConfig& cfg) {
  Assembled a{build_rect_mesh(cfg.nx, cfg.ny, cfg.lx, cfg.ly, cfg.boundary), {}, {}};
  a.dm = build_spaces(a.mesh);
  a.sys = assemble(a.mesh, a.dm, cfg.mu);
  return a;
}

inline std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open output file '" + path.string() + "'");
  return os;
}

}  // namespace cli_detail

// ---------------------------------------------------------------------------
// artifact writers
// ---------------------------------------------------------------------------

/// Velocity coefficients over time: one row per time node, full (constrained
/// DOFs included) nodal layout.  All quantities are nondimensional.
inline void write_velocity_csv(std::ostream& os, const DofMap& dm, const RotheTrajectory& traj) {
  os << "t";
  for (int n = 0; n < dm.n_nodes; ++n) os << ",node" << n << "_x,node" << n << "_y";
  os << "\n";
  for (std::size_t n = 0; n < traj.u.size(); ++n) {
    os << fmt_g17(traj.grid.node(int(n)));
    Vector full = dm.expand(traj.u[n]);
    for (double v : full) os << "," << fmt_g17(v);
    os << "\n";
  }
}

/// Pressure at the mesh vertices, one row per completed step (the pressure
/// multiplier exists per step, not at t = 0).
inline void write_pressure_csv(std::ostream& os, const RotheTrajectory& traj) {
  os << "t";
  if (!traj.p.empty())
    for (std::size_t v = 0; v < traj.p.front().size(); ++v) os << ",vertex" << v;
  os << "\n";
  for (std::size_t n = 0; n < traj.p.size(); ++n) {
    os << fmt_g17(traj.grid.node(int(n) + 1));
    for (double v : traj.p[n]) os << "," << fmt_g17(v);
    os << "\n";
  }
}

/// Friction multipliers on the slip nodes, one row per completed step;
/// columns carry the quadratic node ids.
inline void write_multiplier_csv(std::ostream& os, const DofMap& dm, const RotheTrajectory& traj) {
  os << "t";
  for (const SlipNode& s : dm.slip_nodes) os << ",slip_node" << s.node;
  os << "\n";
  for (std::size_t n = 0; n < traj.xi.size(); ++n) {
    os << fmt_g17(traj.grid.node(int(n) + 1));
    for (double v : traj.xi[n]) os << "," << fmt_g17(v);
    os << "\n";
  }
}

inline void write_stats_csv(std::ostream& os, const RotheTrajectory& traj) {
  os << "step,t,iterations,inclusion_residual,slip_change,omega\n";
  for (std::size_t n = 0; n < traj.stats.size(); ++n) {
    const StepStats& s = traj.stats[n];
    os << (n + 1) << "," << fmt_g17(traj.grid.node(int(n) + 1)) << "," << s.iterations << ","
       << fmt_g17(s.inclusion_residual) << "," << fmt_g17(s.slip_change) << ","
       << fmt_g17(s.omega) << "\n";
  }
}

inline void write_status_csv(std::ostream& os, const std::string& status, int completed, int total,
                             const std::string& message) {
  os << "status,completed_steps,total_steps,message\n";
  os << status << "," << completed << "," << total << "," << cli_detail::csv_quote(message)
     << "\n";
}

/// One solution snapshot as a legacy ASCII VTK unstructured grid of quadratic
/// triangles (cell type 22; connectivity corner0..2 then mid01, mid12, mid20,
/// matching the DOF map).  Velocity is a point vector field on all quadratic
/// nodes; the linear pressure is prolonged to edge midpoints by averaging the
/// endpoint vertices, which is exact for P1.
inline void write_snapshot_vtk(std::ostream& os, const DofMap& dm, const Vector& u_full,
                               const Vector& p_vertex, const std::string& title) {
  if (int(u_full.size()) != dm.n_full())
    throw std::invalid_argument("write_snapshot_vtk: velocity length mismatch");
  if (int(p_vertex.size()) != dm.n_vertices)
    throw std::invalid_argument("write_snapshot_vtk: pressure length mismatch");
  os << "# vtk DataFile Version 3.0\n" << title << "\nASCII\nDATASET UNSTRUCTURED_GRID\n";
  os << "POINTS " << dm.n_nodes << " double\n";
  for (const Vec2& c : dm.node_coords) os << fmt_g17(c.x) << " " << fmt_g17(c.y) << " 0\n";
  const auto nt = dm.tri_nodes.size();
  os << "CELLS " << nt << " " << 7 * nt << "\n";
  for (const auto& tn : dm.tri_nodes) {
    os << "6";
    for (int id : tn) os << " " << id;
    os << "\n";
  }
  os << "CELL_TYPES " << nt << "\n";
  for (std::size_t t = 0; t < nt; ++t) os << "22\n";

  // Parent vertices of each midpoint node, for the pressure prolongation.
  std::vector<std::pair<int, int>> parents(std::size_t(dm.n_nodes), {-1, -1});
  for (const auto& tn : dm.tri_nodes) {
    parents[std::size_t(tn[3])] = {tn[0], tn[1]};
    parents[std::size_t(tn[4])] = {tn[1], tn[2]};
    parents[std::size_t(tn[5])] = {tn[2], tn[0]};
  }

  os << "POINT_DATA " << dm.n_nodes << "\nVECTORS velocity double\n";
  for (int n = 0; n < dm.n_nodes; ++n)
    os << fmt_g17(u_full[std::size_t(2 * n)]) << " " << fmt_g17(u_full[std::size_t(2 * n + 1)])
       << " 0\n";
  os << "SCALARS pressure double 1\nLOOKUP_TABLE default\n";
  for (int n = 0; n < dm.n_nodes; ++n) {
    if (n < dm.n_vertices) {
      os << fmt_g17(p_vertex[std::size_t(n)]) << "\n";
    } else {
      auto [a, b] = parents[std::size_t(n)];
      if (a < 0) throw std::runtime_error("write_snapshot_vtk: dangling midpoint node");
      os << fmt_g17(0.5 * (p_vertex[std::size_t(a)] + p_vertex[std::size_t(b)])) << "\n";
    }
  }
}

// ---------------------------------------------------------------------------
// subcommands
// ---------------------------------------------------------------------------

namespace cli_detail {

inline ConstantsReport constants_for(const Assembled& a, const RunConfig& cfg,
                                     const FrictionLaw& law) {
  double lambda_tau = compute_lambda_tau(a.sys);
  ConstantsReport r = smallness(cfg.mu, law.alpha_psi, lambda_tau, cfg.k());
  r.inf_sup_alpha = compute_inf_sup(a.sys, a.dm);
  r.inf_sup_alpha_full = compute_inf_sup_full(a.sys);
  return r;
}

inline void report_gate_failure(std::ostream& err, const ConstantsReport& r) {
  err << "smallness gate failed: m_margin = " << fmt_g17(r.m_margin)
      << " <= 0 and the step condition fails at k = " << fmt_g17(r.k)
      << "; steps are uniquely solvable only under a bound of the form k < lambda_tau/alpha_psi"
      << " (here k < " << fmt_g17(r.step_bound) << " with lambda_tau = " << fmt_g17(r.lambda_tau)
      << ", alpha_psi = " << fmt_g17(r.alpha_psi) << ")\n";
}

inline void report_failed_checks(std::ostream& err, const VerificationReport& rep) {
  for (const CheckLine& c : rep.checks)
    if (!c.pass)
      err << "FAILED " << c.name << ": lhs = " << fmt_g17(c.lhs) << ", rhs = " << fmt_g17(c.rhs)
          << ", margin = " << fmt_g17(c.margin) << "\n";
}

inline int finish_study(const RunConfig& cfg, const VerificationReport& rep,
                        const std::string& artifact, std::ostream& out, std::ostream& err) {
  std::filesystem::create_directories(cfg.out_dir);
  auto os = open_out(std::filesystem::path(cfg.out_dir) / artifact);
  os << verify_csv_header() << "\n" << to_csv(rep);
  out << to_text(rep);
  if (rep.all_pass()) return exit_ok;
  report_failed_checks(err, rep);
  return exit_gate;
}

}  // namespace cli_detail

/// Print the discrete well-posedness constants and gate on them: exit 0 iff
/// the configured step size admits unique step solves (smallness margin
/// positive, or the explicit step-size condition at k).
inline int cmd_constants(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  cli_detail::Assembled a = cli_detail::assemble_from(cfg);
  FrictionLaw law = cfg.law();
  ConstantsReport r = cli_detail::constants_for(a, cfg, law);
  out << to_key_values(r);
  std::filesystem::create_directories(cfg.out_dir);
  auto os = cli_detail::open_out(std::filesystem::path(cfg.out_dir) / "constants.csv");
  os << constants_csv_header() << "\n" << to_csv_row(r) << "\n";
  if (r.m_margin > 0.0 || r.step_condition) return exit_ok;
  cli_detail::report_gate_failure(err, r);
  return exit_gate;
}

/// Run the time stepper and write trajectory artifacts.  A mid-run step
/// failure still writes the completed prefix of every artifact and flags it
/// in status.csv.
inline int cmd_solve(const RunConfig& cfg, bool force, std::ostream& out, std::ostream& err) {
  cli_detail::Assembled a = cli_detail::assemble_from(cfg);
  FrictionLaw law = cfg.law();
  ConstantsReport consts = cli_detail::constants_for(a, cfg, law);
  if (!(consts.m_margin > 0.0 || consts.step_condition)) {
    if (!force) {
      cli_detail::report_gate_failure(err, consts);
      err << "rerun with --force to attempt the solve anyway\n";
      return exit_gate;
    }
    err << "warning: smallness gate failed; continuing under --force\n";
  }

  TimeGrid grid(cfg.t_final, cfg.n_steps);
  SourceTerm f = make_source(a.mesh, a.dm, cfg.f_field(), cfg.f_name);
  SaddleOptions opt;
  opt.uzawa_seed = cfg.seed;

  RotheTrajectory traj;
  bool complete = true;
  std::string failure;
  try {
    traj = run(a.mesh, a.dm, a.sys, law, cfg.u0_field(), f, grid, cfg.tol, int(cfg.max_iter), opt);
  } catch (RunError& e) {
    traj = std::move(e.partial);
    complete = false;
    failure = e.what();
  }
  const int completed = int(traj.u.size()) - 1;

  namespace fs = std::filesystem;
  fs::path dir(cfg.out_dir);
  fs::create_directories(dir);
  if (cfg.write_trajectory) {
    {
      auto os = cli_detail::open_out(dir / "velocity.csv");
      write_velocity_csv(os, a.dm, traj);
    }
    {
      auto os = cli_detail::open_out(dir / "pressure.csv");
      write_pressure_csv(os, traj);
    }
    {
      auto os = cli_detail::open_out(dir / "multiplier.csv");
      write_multiplier_csv(os, a.dm, traj);
    }
  }
  if (cfg.write_stats) {
    auto os = cli_detail::open_out(dir / "step_stats.csv");
    write_stats_csv(os, traj);
  }
  {
    auto os = cli_detail::open_out(dir / "status.csv");
    write_status_csv(os, complete ? "complete" : "partial", completed, grid.n_steps, failure);
  }
  {
    auto os = cli_detail::open_out(dir / "mesh.vtk");
    write_vtk(a.mesh, os, "mesh");
  }
  if (cfg.vtk_stride > 0) {
    Vector zero_p(std::size_t(a.sys.n_pressure()), 0.0);
    for (int n = 0; n <= completed; ++n) {
      if (n % cfg.vtk_stride != 0 && n != completed) continue;
      std::ostringstream name;
      name << "fields_" << std::setw(6) << std::setfill('0') << n << ".vtk";
      std::ostringstream title;
      title << "fields at t = " << fmt_g17(traj.grid.node(n));
      auto os = cli_detail::open_out(dir / name.str());
      write_snapshot_vtk(os, a.dm, a.dm.expand(traj.u[std::size_t(n)]),
                         n == 0 ? zero_p : traj.p[std::size_t(n - 1)], title.str());
    }
  }

  int worst_it = 0;
  double worst_res = 0.0;
  for (const StepStats& s : traj.stats) {
    worst_it = std::max(worst_it, s.iterations);
    worst_res = std::max(worst_res, s.inclusion_residual);
  }
  out << "steps_completed=" << completed << "/" << grid.n_steps << "\n"
      << "max_step_iterations=" << worst_it << "\n"
      << "max_inclusion_residual=" << fmt_g17(worst_res) << "\n"
      << "artifacts=" << dir.string() << "\n";
  if (complete) return exit_ok;
  err << "solve failed at step " << (completed + 1) << ": " << failure
      << " (partial artifacts flagged in status.csv)\n";
  return exit_solve;
}

/// Drive one of the verification studies; exit 0 iff every check passes.
inline int cmd_study(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  const std::string& kind = cfg.study.kind;
  if (kind != "convergence" && kind != "lipschitz" && kind != "energy") {
    err << "study.kind must be one of convergence | lipschitz | energy (got '" << kind << "')\n";
    return exit_config;
  }
  cli_detail::Assembled a = cli_detail::assemble_from(cfg);
  FrictionLaw law = cfg.law();
  TimeGrid grid(cfg.t_final, cfg.n_steps);

  if (kind == "convergence") {
    VerificationReport rep =
        cauchy_study(a.mesh, a.dm, a.sys, law, cfg.u0_field(), make_source(a.mesh, a.dm,
                     cfg.f_field(), cfg.f_name), cfg.t_final, cfg.n_steps, cfg.study.halvings,
                     cfg.study.ratio_bound, cfg.tol, int(cfg.max_iter));
    return cli_detail::finish_study(cfg, rep, "study_convergence.csv", out, err);
  }

  // Both remaining studies quantify inequalities that only hold under the
  // smallness condition; refuse to run them without it.
  double lambda_tau = compute_lambda_tau(a.sys);
  double m = smallness(cfg.mu, law.alpha_psi, lambda_tau, cfg.k()).m_margin;
  if (!(m > 0.0)) {
    err << "study '" << kind << "' refused: smallness margin m = 2*mu - alpha_psi/lambda_tau = "
        << fmt_g17(m) << " is not positive (mu = " << fmt_g17(cfg.mu)
        << ", alpha_psi = " << fmt_g17(law.alpha_psi)
        << ", lambda_tau = " << fmt_g17(lambda_tau) << ")\n";
    return exit_gate;
  }

  if (kind == "energy") {
    VerificationReport rep = energy_family(a.mesh, a.dm, a.sys, law, cfg.u0_field(),
                                           make_source(a.mesh, a.dm, cfg.f_field(), cfg.f_name),
                                           cfg.t_final, cfg.study.steps_list, lambda_tau, m,
                                           cfg.study.spread_tol, cfg.tol, int(cfg.max_iter));
    return cli_detail::finish_study(cfg, rep, "study_energy.csv", out, err);
  }

  RunData d1;
  d1.u0 = project_initial(a.mesh, a.dm, a.sys, cfg.u0_field(), grid);
  SourceTerm f1 = make_source(a.mesh, a.dm, cfg.f_field(), cfg.f_name);
  d1.f = average_source(f1, grid);
  RunData d2 = d1;
  if (!cfg.study.u0b_name.empty())
    d2.u0 = project_initial(a.mesh, a.dm, a.sys,
                            make_field(cfg.study.u0b_name, cfg.study.u0b_params), grid);
  if (!cfg.study.fb_name.empty()) {
    SourceTerm f2 = make_source(a.mesh, a.dm, make_field(cfg.study.fb_name, cfg.study.fb_params),
                                cfg.study.fb_name);
    d2.f = average_source(f2, grid);
  }
  VerificationReport rep = lipschitz_check(a.sys, law, grid, d1, d2, m, cfg.study.n_pairs,
                                           cfg.tol, int(cfg.max_iter), cfg.seed);
  return cli_detail::finish_study(cfg, rep, "study_lipschitz.csv", out, err);
}

/// Sample-check the configured law's growth and relaxed-monotonicity
/// constants (or explicitly claimed ones); exit 0 iff no violations.
inline int cmd_validate_law(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  FrictionLaw law = cfg.law();
  if (cfg.validate.has_alpha_claim) law.alpha_psi = cfg.validate.alpha_claim;
  if (cfg.validate.has_c0_claim) law.c0 = cfg.validate.c0_claim;
  LawValidation rep = validate_law(law, cfg.validate.n_samples, cfg.validate.radius);

  out << "law=" << rep.law_name << "\n"
      << "c0=" << fmt_g17(law.c0) << "\n"
      << "alpha_psi=" << fmt_g17(law.alpha_psi) << "\n"
      << "n_samples=" << cfg.validate.n_samples << "\n"
      << "radius=" << fmt_g17(cfg.validate.radius) << "\n"
      << "growth_checks=" << rep.growth_checks << "\n"
      << "growth_violations=" << rep.growth_violations << "\n"
      << "mono_checks=" << rep.mono_checks << "\n"
      << "mono_violations=" << rep.mono_violations << "\n"
      << "worst_growth_margin=" << fmt_g17(rep.worst_growth_margin) << "\n"
      << "worst_mono_margin=" << fmt_g17(rep.worst_mono_margin) << "\n"
      << "alpha_hat=" << fmt_g17(rep.alpha_hat) << "\n"
      << "ok=" << (rep.ok() ? 1 : 0) << "\n";

  std::filesystem::create_directories(cfg.out_dir);
  auto os = cli_detail::open_out(std::filesystem::path(cfg.out_dir) / "validate_law.csv");
  os << "law,c0,alpha_psi,n_samples,radius,growth_checks,growth_violations,mono_checks,"
        "mono_violations,worst_growth_margin,worst_mono_margin,alpha_hat,ok\n";
  os << rep.law_name << "," << fmt_g17(law.c0) << "," << fmt_g17(law.alpha_psi) << ","
     << cfg.validate.n_samples << "," << fmt_g17(cfg.validate.radius) << "," << rep.growth_checks
     << "," << rep.growth_violations << "," << rep.mono_checks << "," << rep.mono_violations << ","
     << fmt_g17(rep.worst_growth_margin) << "," << fmt_g17(rep.worst_mono_margin) << ","
     << fmt_g17(rep.alpha_hat) << "," << (rep.ok() ? 1 : 0) << "\n";

  if (rep.ok()) return exit_ok;
  err << "law validation failed: " << rep.growth_violations << " growth violation(s), "
      << rep.mono_violations << " relaxed-monotonicity violation(s)\n";
  return exit_gate;
}

// ---------------------------------------------------------------------------
// argument parsing and dispatch
// ---------------------------------------------------------------------------

inline void print_usage(std::ostream& os) {
  os << "usage: stokes-hvi <constants|solve|study|validate-law> --config PATH [--force] "
        "[--out DIR]\n"
        "\n"
        "  constants     print lambda_tau, inf-sup, smallness margin and step bound;\n"
        "                exit 0 iff the configured step size admits unique step solves\n"
        "  solve         run the time stepper; write trajectory CSV/VTK artifacts\n"
        "  study         run the study named by [study] kind: convergence | lipschitz | energy\n"
        "  validate-law  sample-check the configured friction law's certified constants\n"
        "\n"
        "  --config PATH  run configuration (key = value with [section] headers); required\n"
        "  --force        run solve even if the smallness gate fails\n"
        "  --out DIR      override the output directory (beats SHVI_OUT_DIR and the config)\n"
        "\n"
        "exit codes: 0 ok, 1 usage, 2 config/environment error, 3 failed gate or check,\n"
        "            4 mid-run solve failure (partial artifacts flagged)\n";
}

inline int cli_main(int argc, const char* const* argv, std::ostream& out = std::cout,
                    std::ostream& err = std::cerr) {
  std::vector<std::string> args(argv + 1, argv + argc);
  for (const std::string& s : args)
    if (s == "--help" || s == "-h") {
      print_usage(out);
      return exit_ok;
    }
  if (args.empty()) {
    print_usage(err);
    return exit_usage;
  }
  const std::string cmd = args[0];
  if (cmd != "constants" && cmd != "solve" && cmd != "study" && cmd != "validate-law") {
    err << "unknown command '" << cmd << "'\n";
    print_usage(err);
    return exit_usage;
  }
  std::string config_path, out_override;
  bool force = false;
  for (std::size_t i = 1; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) {
      config_path = args[++i];
    } else if (args[i] == "--out" && i + 1 < args.size()) {
      out_override = args[++i];
    } else if (args[i] == "--force") {
      force = true;
    } else {
      err << "unrecognized argument '" << args[i] << "'\n";
      print_usage(err);
      return exit_usage;
    }
  }
  if (config_path.empty()) {
    err << "missing required --config PATH\n";
    return exit_usage;
  }

  RunConfig cfg;
  try {
    cfg = load_run_config(Config::from_file(config_path));
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return exit_config;
  }
  if (const char* env = std::getenv("SHVI_OUT_DIR"); env && *env) cfg.out_dir = env;
  if (!out_override.empty()) cfg.out_dir = out_override;

  try {
    if (cmd == "constants") return cmd_constants(cfg, out, err);
    if (cmd == "solve") return cmd_solve(cfg, force, out, err);
    if (cmd == "study") return cmd_study(cfg, out, err);
    return cmd_validate_law(cfg, out, err);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return exit_config;
  }
}

}  // namespace shvi
