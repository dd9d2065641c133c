#pragma once

// Numerical verification of the discrete well-posedness chain behind the
// frictional-slip Stokes solver: per-trajectory energy bounds with explicit
// constants, squared-variation control of the piecewise-constant interpolant,
// the continuous-dependence (Lipschitz) inequality for paired runs, Cauchy
// refinement studies under step halving, a frictionless manufactured-solution
// regression, and pressure uniqueness through the inf-sup constant.  Every
// check records its left side, right side, tolerances, margin, and pass flag,
// together with a digest of the inputs; reports serialize to CSV and text.

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "shvi/core.hpp"
#include "shvi/fespace.hpp"
#include "shvi/fields.hpp"
#include "shvi/friction.hpp"
#include "shvi/mesh.hpp"
#include "shvi/rothe.hpp"
#include "shvi/solvers.hpp"
#include "shvi/sparse.hpp"
#include "shvi/spectral.hpp"

namespace shvi {

// ---------------------------------------------------------------------------
// reports
// ---------------------------------------------------------------------------

/// One verified inequality: pass <=> lhs <= rhs*(1 + rel_tol) + abs_tol.
/// Informational values are recorded with rhs = +infinity (always pass).
struct CheckLine {
  std::string name;
  double lhs = 0.0;
  double rhs = 0.0;
  double rel_tol = 0.0;
  double abs_tol = 0.0;
  double margin = 0.0;  // rhs*(1+rel_tol) + abs_tol - lhs; >= 0 iff pass
  bool pass = true;
};

struct VerificationReport {
  std::string title;
  std::string inputs_digest;
  std::vector<CheckLine> checks;

  CheckLine& add(std::string name, double lhs, double rhs, double rel_tol = 0.0,
                 double abs_tol = 0.0) {
    CheckLine c;
    c.name = std::move(name);
    c.lhs = lhs;
    c.rhs = rhs;
    c.rel_tol = rel_tol;
    c.abs_tol = abs_tol;
    double bound = rhs * (1.0 + rel_tol) + abs_tol;
    c.margin = bound - lhs;
    c.pass = std::isfinite(lhs) && !(lhs > bound);
    checks.push_back(std::move(c));
    return checks.back();
  }

  /// Record a measured quantity without a bound (always passes).
  CheckLine& note(std::string name, double value) {
    return add(std::move(name), value, std::numeric_limits<double>::infinity());
  }

  /// Copy another report's lines under a name prefix.
  void absorb(const VerificationReport& other, const std::string& prefix) {
    for (const CheckLine& c : other.checks) {
      checks.push_back(c);
      checks.back().name = prefix + c.name;
    }
  }

  bool all_pass() const {
    for (const CheckLine& c : checks)
      if (!c.pass) return false;
    return true;
  }
  int n_failed() const {
    int n = 0;
    for (const CheckLine& c : checks) n += c.pass ? 0 : 1;
    return n;
  }
};

inline std::string verify_csv_header() {
  return "check,lhs,rhs,rel_tol,abs_tol,margin,pass,inputs_digest";
}

inline std::string to_csv(const VerificationReport& r) {
  std::ostringstream os;
  for (const CheckLine& c : r.checks)
    os << c.name << "," << fmt_g17(c.lhs) << "," << fmt_g17(c.rhs) << "," << fmt_g17(c.rel_tol)
       << "," << fmt_g17(c.abs_tol) << "," << fmt_g17(c.margin) << "," << (c.pass ? 1 : 0) << ","
       << r.inputs_digest << "\n";
  return os.str();
}

inline std::string to_text(const VerificationReport& r) {
  std::ostringstream os;
  os << "== " << r.title << " (inputs " << r.inputs_digest << ") ==\n";
  for (const CheckLine& c : r.checks) {
    os << (c.pass ? "[PASS] " : "[FAIL] ") << c.name << ": lhs = " << fmt_g17(c.lhs);
    if (std::isfinite(c.rhs)) os << ", rhs = " << fmt_g17(c.rhs) << ", margin = " << fmt_g17(c.margin);
    os << "\n";
  }
  os << (r.all_pass() ? "all checks passed" : std::to_string(r.n_failed()) + " check(s) FAILED")
     << " (" << r.checks.size() << " total)\n";
  return os.str();
}

namespace verify_detail {

inline std::string digest_trajectory(const RotheTrajectory& traj, const DiscreteSystem& sys,
                                     const FrictionLaw& law) {
  Digest d;
  d.feed(law.name).feed(law.c0).feed(law.alpha_psi);
  d.feed(traj.grid.t_final).feed(traj.grid.n_steps);
  d.feed(sys.n_free()).feed(sys.n_pressure()).feed(sys.n_slip());
  for (const Vector& v : traj.u) d.feed(v);
  for (const Vector& v : traj.f_avg) d.feed(v);
  return d.hex();
}

/// || . ||_{M_Gamma} of a slip-node vector under the lumped boundary weights.
inline double slip_norm(const DiscreteSystem& sys, const Vector& xi) {
  double s = 0.0;
  for (std::size_t b = 0; b < xi.size(); ++b) s += sys.m_gamma[b] * xi[b] * xi[b];
  return std::sqrt(s);
}

/// Backward-Euler sweep from explicit vector data (no projection, loads
/// supplied per step).
struct SweepStates {
  std::vector<Vector> u;  // n_steps + 1 states
  std::vector<Vector> p;  // n_steps pressures
};

inline SweepStates sweep_states(const DiscreteSystem& sys, const FrictionLaw& law,
                                const TimeGrid& grid, const Vector& u0,
                                const std::vector<Vector>& f, double tol, int max_iter) {
  if (int(f.size()) != grid.n_steps)
    throw std::invalid_argument("sweep_states: one load per step required");
  RotheEngine engine(sys, law, grid.k, {});
  SweepStates s;
  s.u.reserve(std::size_t(grid.n_steps) + 1);
  s.p.reserve(std::size_t(grid.n_steps));
  s.u.push_back(u0);
  for (int n = 1; n <= grid.n_steps; ++n) {
    StepResult sr = engine.step(s.u.back(), f[std::size_t(n - 1)], tol, max_iter);
    s.u.push_back(std::move(sr.u));
    s.p.push_back(std::move(sr.p));
  }
  return s;
}

inline std::vector<Vector> sweep_from_data(const DiscreteSystem& sys, const FrictionLaw& law,
                                           const TimeGrid& grid, const Vector& u0,
                                           const std::vector<Vector>& f, double tol,
                                           int max_iter) {
  return sweep_states(sys, law, grid, u0, f, tol, max_iter).u;
}

/// Exact L^2(0,T; H) distance between the piecewise-constant interpolants of
/// two trajectories on nested grids (the finer step count must be an integer
/// multiple of the coarser).
inline double l2h_distance(const DiscreteSystem& sys, const std::vector<Vector>& coarse,
                           int n_coarse, const std::vector<Vector>& fine, int n_fine,
                           double t_final) {
  if (n_fine % n_coarse != 0)
    throw std::invalid_argument("l2h_distance: grids are not nested");
  const int ratio = n_fine / n_coarse;
  const double kf = t_final / double(n_fine);
  double acc = 0.0;
  for (int i = 1; i <= n_fine; ++i) {
    const Vector& uf = fine[std::size_t(i)];
    const Vector& uc = coarse[std::size_t((i + ratio - 1) / ratio)];
    Vector d = uc;
    axpy(-1.0, uf, d);
    acc += kf * sys.m.quad(d);
  }
  return std::sqrt(acc);
}

}  // namespace verify_detail

// ---------------------------------------------------------------------------
// energy bounds
// ---------------------------------------------------------------------------

/// The three uniform-boundedness quantities of a trajectory:
///   max_h   = max_n ||u_n||_M,
///   sum_dh2 = sum_n ||u_n - u_{n-1}||_M^2,
///   sum_v2  = k sum_n ||u_n||_V^2.
struct EnergyQuantities {
  double max_h = 0.0;
  double sum_dh2 = 0.0;
  double sum_v2 = 0.0;
};

inline EnergyQuantities energy_quantities(const RotheTrajectory& traj,
                                          const DiscreteSystem& sys) {
  EnergyQuantities q;
  q.max_h = std::sqrt(sys.m.quad(traj.u[0]));
  for (int n = 1; n < int(traj.u.size()); ++n) {
    const Vector& un = traj.u[std::size_t(n)];
    q.max_h = std::max(q.max_h, std::sqrt(sys.m.quad(un)));
    Vector d = un;
    axpy(-1.0, traj.u[std::size_t(n - 1)], d);
    q.sum_dh2 += sys.m.quad(d);
    q.sum_v2 += traj.grid.k * sys.k_v.quad(un);
  }
  return q;
}

/// Verify the telescoped per-step energy inequality with fully explicit
/// constants.  Pairing the step equation with u_n, using the relaxed
/// monotonicity of the friction potential against the zero state, the growth
/// of its subgradients at zero, the trace inequality, and two splittings with
/// epsilon = m/4 gives, for every n,
///   ||u_n||_M^2 + sum_j ||u_j - u_{j-1}||_M^2 + m k sum_j ||u_j||_V^2
///     <= ||u_0||_M^2 + (2 c0^2 g0^2 / (lambda_tau m)) n k
///        + (2/m) k sum_j ||f_j||_{V*}^2,
/// where g0^2 = sum of the lumped slip weights and m = 2 mu - alpha/lambda_tau
/// is the smallness margin.  Also verifies the multiplier bound
///   ||xi_n||_{M_Gamma} <= sqrt(2) c0 max(g0, lambda_tau^{-1/2}) (1 + ||u_n||_V).
inline VerificationReport energy_bounds(const RotheTrajectory& traj, const DiscreteSystem& sys,
                                        const FrictionLaw& law, double lambda_tau,
                                        double m_margin) {
  if (!(m_margin > 0.0))
    throw std::invalid_argument("energy_bounds: smallness margin must be positive");
  if (!(lambda_tau > 0.0))
    throw std::invalid_argument("energy_bounds: lambda_tau must be positive");
  VerificationReport rep;
  rep.title = "discrete energy bounds";
  rep.inputs_digest = verify_detail::digest_trajectory(traj, sys, law);

  double g0_sq = 0.0;
  for (double w : sys.m_gamma) g0_sq += w;
  const double g0 = std::sqrt(g0_sq);
  const double k = traj.grid.k;
  const int n_steps = traj.grid.n_steps;

  SpdOperator kvop(sys.k_v, 1e-13);
  const double u0_sq = sys.m.quad(traj.u[0]);

  double lhs_acc_dh = 0.0, lhs_acc_v = 0.0, rhs_acc_f = 0.0;
  double worst_gap = -std::numeric_limits<double>::infinity();
  double worst_lhs = 0.0, worst_rhs = 0.0;
  double worst_xi_gap = -std::numeric_limits<double>::infinity();
  double worst_xi_lhs = 0.0, worst_xi_rhs = 0.0;
  const double c_xi = std::sqrt(2.0) * law.c0 * std::max(g0, 1.0 / std::sqrt(lambda_tau));

  for (int n = 1; n <= n_steps; ++n) {
    const Vector& un = traj.u[std::size_t(n)];
    Vector d = un;
    axpy(-1.0, traj.u[std::size_t(n - 1)], d);
    lhs_acc_dh += sys.m.quad(d);
    const double un_v_sq = sys.k_v.quad(un);
    lhs_acc_v += k * un_v_sq;
    const double fn_dual = dual_norm(kvop, traj.f_avg[std::size_t(n - 1)]);
    rhs_acc_f += k * fn_dual * fn_dual;

    const double lhs = sys.m.quad(un) + lhs_acc_dh + m_margin * lhs_acc_v;
    const double rhs = u0_sq + (2.0 * law.c0 * law.c0 * g0_sq / (lambda_tau * m_margin)) * n * k +
                       (2.0 / m_margin) * rhs_acc_f;
    if (lhs - rhs > worst_gap) {
      worst_gap = lhs - rhs;
      worst_lhs = lhs;
      worst_rhs = rhs;
    }

    const double xi_lhs = verify_detail::slip_norm(sys, traj.xi[std::size_t(n - 1)]);
    const double xi_rhs = c_xi * (1.0 + std::sqrt(un_v_sq));
    if (xi_lhs - xi_rhs > worst_xi_gap) {
      worst_xi_gap = xi_lhs - xi_rhs;
      worst_xi_lhs = xi_lhs;
      worst_xi_rhs = xi_rhs;
    }
  }

  rep.add("energy/summed-inequality", worst_lhs, worst_rhs, 1e-8, 1e-10);
  rep.add("energy/multiplier-bound", worst_xi_lhs, worst_xi_rhs, 1e-8, 1e-10);
  EnergyQuantities q = energy_quantities(traj, sys);
  rep.note("energy/max-h", q.max_h);
  rep.note("energy/sum-increments-sq", q.sum_dh2);
  rep.note("energy/sum-v-sq", q.sum_v2);
  return rep;
}

/// Run one configuration across a family of step counts and verify that the
/// three energy quantities stay uniformly bounded: for each quantity the
/// relative spread (max - min)/max across the family must stay below
/// `spread_tol` (the generic constant of the estimate is not reconstructed;
/// k-uniformity is its testable surrogate).  Each run's per-trajectory checks
/// are absorbed under an "N=.../" prefix.
inline VerificationReport energy_family(const Mesh& mesh, const DofMap& dm,
                                        const DiscreteSystem& sys, const FrictionLaw& law,
                                        const SpaceTimeField& u0, const SourceTerm& f,
                                        double t_final, const std::vector<int>& step_family,
                                        double lambda_tau, double m_margin,
                                        double spread_tol = 0.10, double tol = 1e-10,
                                        int max_iter = 200) {
  if (step_family.size() < 2)
    throw std::invalid_argument("energy_family: need at least two step counts");
  VerificationReport rep;
  rep.title = "energy bounds across a step-size family";

  EnergyQuantities lo, hi;
  bool first = true;
  Digest digest;
  for (int n_steps : step_family) {
    TimeGrid grid(t_final, n_steps);
    RotheTrajectory traj = run(mesh, dm, sys, law, u0, f, grid, tol, max_iter);
    VerificationReport one = energy_bounds(traj, sys, law, lambda_tau, m_margin);
    rep.absorb(one, "N=" + std::to_string(n_steps) + "/");
    digest.feed(one.inputs_digest);
    EnergyQuantities q = energy_quantities(traj, sys);
    if (first) {
      lo = hi = q;
      first = false;
    } else {
      lo.max_h = std::min(lo.max_h, q.max_h);
      hi.max_h = std::max(hi.max_h, q.max_h);
      lo.sum_dh2 = std::min(lo.sum_dh2, q.sum_dh2);
      hi.sum_dh2 = std::max(hi.sum_dh2, q.sum_dh2);
      lo.sum_v2 = std::min(lo.sum_v2, q.sum_v2);
      hi.sum_v2 = std::max(hi.sum_v2, q.sum_v2);
    }
  }
  rep.inputs_digest = digest.hex();
  auto spread = [](double a, double b) { return b > 0.0 ? (b - a) / b : 0.0; };
  rep.add("family/spread-max-h", spread(lo.max_h, hi.max_h), spread_tol);
  rep.add("family/spread-sum-increments-sq", spread(lo.sum_dh2, hi.sum_dh2), spread_tol);
  rep.add("family/spread-sum-v-sq", spread(lo.sum_v2, hi.sum_v2), spread_tol);
  return rep;
}

// ---------------------------------------------------------------------------
// squared variation of the piecewise-constant interpolant
// ---------------------------------------------------------------------------

/// Squared total variation of the piecewise-constant velocity interpolant in
/// the dual norm, evaluated on the time-node partition:
///   node_value = sum_n dual_norm(K_V, M (u_n - u_{n-1}))^2.
/// For a piecewise-constant function the supremum over all partitions is
/// attained on the node partition (merging adjacent increments can only
/// reduce a sum of squared norms, by the triangle inequality and a^2 + b^2 >=
/// (a+b)^2/2 applied pairwise -- verified against sampled coarsenings in the
/// tests rather than assumed).  `derivative_bound` is the controlling
/// quantity from the compactness argument, T * ||u'||^2 in the same dual
/// norm: T k sum_n ||(u_n - u_{n-1})/k||^2 = (T/k) * node_value.
struct Bv2Result {
  double node_value = 0.0;
  double derivative_bound = 0.0;
};

inline Bv2Result bv2_seminorm(const Interpolants& interp, const DiscreteSystem& sys,
                              double tol = 1e-13) {
  const RotheTrajectory& traj = interp.trajectory();
  SpdOperator kvop(sys.k_v, tol);
  double acc = 0.0;
  for (int n = 1; n < int(traj.u.size()); ++n) {
    Vector d = traj.u[std::size_t(n)];
    axpy(-1.0, traj.u[std::size_t(n - 1)], d);
    double dn = dual_norm(kvop, sys.m * d);
    acc += dn * dn;
  }
  Bv2Result r;
  r.node_value = acc;
  r.derivative_bound = acc * traj.grid.t_final / traj.grid.k;
  return r;
}

// ---------------------------------------------------------------------------
// continuous dependence on the data
// ---------------------------------------------------------------------------

/// Explicit data for one backward-Euler sweep: an initial free-DOF state and
/// one averaged load per step.
struct RunData {
  Vector u0;
  std::vector<Vector> f;
};

/// Verify the discrete continuous-dependence inequality: for two sweeps with
/// data (u0^1, f^1), (u0^2, f^2) on the same grid, at every node n
///   ||du_n||_M^2 + m k sum_{j<=n} ||du_j||_V^2
///     <= ||du_0||_M^2 + (1/m) k sum_{j<=n} ||df_j||_{V*}^2,
/// with du = u^1 - u^2, df = f^1 - f^2 (time integrals are exact step sums
/// for the piecewise-constant interpolants).  The derivation subtracts the
/// two step equations, pairs with du_n, and uses relaxed monotonicity plus
/// the trace inequality; it is exact at the discrete level, so the only
/// tolerance needed covers the fixed-point and linear-solver residuals.
/// Beyond the supplied base pair, `n_eval` deterministic random
/// perturbation pairs of the first dataset are checked the same way; `seed`
/// selects the perturbation stream.
inline VerificationReport lipschitz_check(const DiscreteSystem& sys, const FrictionLaw& law,
                                          const TimeGrid& grid, const RunData& d1,
                                          const RunData& d2, double m_margin, int n_eval,
                                          double tol = 1e-10, int max_iter = 200,
                                          std::uint64_t seed = 0x11b5) {
  if (!(m_margin > 0.0))
    throw std::invalid_argument("lipschitz_check: smallness margin must be positive");
  VerificationReport rep;
  rep.title = "continuous dependence on the data";
  Digest digest;
  digest.feed(law.name).feed(grid.t_final).feed(grid.n_steps).feed(d1.u0).feed(d2.u0);
  for (const Vector& v : d1.f) digest.feed(v);
  for (const Vector& v : d2.f) digest.feed(v);
  digest.feed(std::int64_t(n_eval)).feed(std::int64_t(seed));
  rep.inputs_digest = digest.hex();

  SpdOperator kvop(sys.k_v, 1e-13);
  const double k = grid.k;

  auto check_pair = [&](const RunData& a, const RunData& b, const std::string& name) {
    std::vector<Vector> ua =
        verify_detail::sweep_from_data(sys, law, grid, a.u0, a.f, tol, max_iter);
    std::vector<Vector> ub =
        verify_detail::sweep_from_data(sys, law, grid, b.u0, b.f, tol, max_iter);
    Vector d0 = a.u0;
    axpy(-1.0, b.u0, d0);
    const double lhs0 = sys.m.quad(d0);
    double acc_v = 0.0, acc_f = 0.0;
    double worst_gap = -std::numeric_limits<double>::infinity();
    double worst_lhs = 0.0, worst_rhs = 0.0;
    for (int n = 1; n <= grid.n_steps; ++n) {
      Vector du = ua[std::size_t(n)];
      axpy(-1.0, ub[std::size_t(n)], du);
      acc_v += k * sys.k_v.quad(du);
      Vector df = a.f[std::size_t(n - 1)];
      axpy(-1.0, b.f[std::size_t(n - 1)], df);
      const double dfn = dual_norm(kvop, df);
      acc_f += k * dfn * dfn;
      const double lhs = sys.m.quad(du) + m_margin * acc_v;
      const double rhs = lhs0 + acc_f / m_margin;
      if (lhs - rhs > worst_gap) {
        worst_gap = lhs - rhs;
        worst_lhs = lhs;
        worst_rhs = rhs;
      }
    }
    rep.add(name, worst_lhs, worst_rhs, 1e-8, 1e-12);
  };

  check_pair(d1, d2, "lipschitz/base-pair");

  // Deterministic random perturbations of the first dataset.
  const double u_scale = 1.0 + nrm_inf(d1.u0);
  double f_scale = 1.0;
  for (const Vector& v : d1.f) f_scale = std::max(f_scale, nrm_inf(v));
  for (int e = 0; e < n_eval; ++e) {
    Rng rng(seed + 977ull * std::uint64_t(e));
    RunData pa = d1, pb = d1;
    for (std::size_t i = 0; i < pa.u0.size(); ++i) {
      pa.u0[i] += 0.2 * u_scale * rng.sym();
      pb.u0[i] += 0.2 * u_scale * rng.sym();
    }
    for (std::size_t j = 0; j < pa.f.size(); ++j)
      for (std::size_t i = 0; i < pa.f[j].size(); ++i) {
        pa.f[j][i] += 0.2 * f_scale * rng.sym();
        pb.f[j][i] += 0.2 * f_scale * rng.sym();
      }
    check_pair(pa, pb, "lipschitz/pair-" + std::to_string(e));
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Cauchy refinement study
// ---------------------------------------------------------------------------

/// Run the same configuration on step counts N0, 2 N0, 4 N0, ... and measure
/// consecutive distances e_j = ||ubar_{k_j} - ubar_{k_{j+1}}||_{L^2(0,T;H)}
/// by exact nested quadrature.  The Cauchy property of the Rothe sequence is
/// verified as geometric decrease from the second difference on: e_{j+1} <=
/// ratio_bound * e_j for every consecutive pair except the first, which may
/// still sit in the pre-asymptotic range and is recorded informationally
/// (distances at the solver-noise floor pass trivially).
inline VerificationReport cauchy_study(const Mesh& mesh, const DofMap& dm,
                                       const DiscreteSystem& sys, const FrictionLaw& law,
                                       const SpaceTimeField& u0, const SourceTerm& f,
                                       double t_final, int n0, int halvings,
                                       double ratio_bound = 0.75, double tol = 1e-10,
                                       int max_iter = 200) {
  if (halvings < 2) throw std::invalid_argument("cauchy_study: need at least two halvings");
  VerificationReport rep;
  rep.title = "Cauchy property under step halving";

  std::vector<RotheTrajectory> trajs;
  std::vector<int> ns;
  Digest digest;
  digest.feed(law.name).feed(t_final).feed(std::int64_t(n0)).feed(std::int64_t(halvings));
  for (int j = 0; j <= halvings; ++j) {
    int n = n0 << j;
    ns.push_back(n);
    trajs.push_back(run(mesh, dm, sys, law, u0, f, TimeGrid(t_final, n), tol, max_iter));
    digest.feed(trajs.back().u.back());
  }
  rep.inputs_digest = digest.hex();

  std::vector<double> e;
  double scale = 0.0;
  for (const Vector& un : trajs.front().u) scale = std::max(scale, nrm_inf(un));
  for (int j = 0; j < halvings; ++j) {
    e.push_back(verify_detail::l2h_distance(sys, trajs[std::size_t(j)].u, ns[std::size_t(j)],
                                            trajs[std::size_t(j + 1)].u, ns[std::size_t(j + 1)],
                                            t_final));
    rep.note("cauchy/e-" + std::to_string(j), e.back());
  }
  const double floor = 100.0 * tol * (1.0 + scale);
  if (e.size() >= 2 && e[0] > floor) rep.note("cauchy/first-ratio", e[1] / e[0]);
  for (int j = 1; j + 1 < int(e.size()); ++j) {
    double prev = e[std::size_t(j)], next = e[std::size_t(j + 1)];
    std::string name = "cauchy/ratio-" + std::to_string(j + 1);
    if (prev <= floor && next <= floor)
      rep.add(name, 0.0, ratio_bound);  // both at the noise floor: trivially Cauchy
    else
      rep.add(name, next, ratio_bound * prev, 1e-12, 0.0);
  }
  return rep;
}

// ---------------------------------------------------------------------------
// frictionless manufactured regression
// ---------------------------------------------------------------------------

/// With a vanishing friction potential the scheme must reproduce linear
/// slip-boundary Stokes flow.  Checks against the manufactured decaying flow
/// (whose source is derived analytically from the momentum equation); all
/// time-step levels integrate from the same initial vector (the nodal
/// interpolant of the exact initial velocity), so level differences measure
/// the time discretization alone:
///   - temporal order: self-errors against a reference run with one-eighth
///     the finest step, on the same mesh, halve with k at first order
///     (every observed consecutive order >= order_min);
///   - steady case (decay rate zero): the error against the exact interpolant
///     over the second half of the window, after the start-up transient has
///     equilibrated, is k-independent to steady_rel_tol;
///   - every recovered pressure has zero mean.
/// `n_levels` halving levels N, 2N, ... are measured (n_levels - 1 observed
/// orders).  Space-time velocity and pressure errors of the finest unsteady
/// run are recorded for information (they are spatial-accuracy dominated).
inline VerificationReport stokes_regression(const Mesh& mesh, const DofMap& dm,
                                            const DiscreteSystem& sys, double mu,
                                            const TimeGrid& grid, double lambda = 2.0,
                                            int n_levels = 3, double order_min = 0.8,
                                            double steady_rel_tol = 0.05, double tol = 1e-11,
                                            int max_iter = 200) {
  if (n_levels < 2) throw std::invalid_argument("stokes_regression: need at least two levels");
  VerificationReport rep;
  rep.title = "frictionless manufactured regression";
  Digest digest;
  digest.feed(mu).feed(lambda).feed(grid.t_final).feed(std::int64_t(grid.n_steps));
  digest.feed(std::int64_t(n_levels)).feed(sys.n_free()).feed(sys.n_pressure());
  rep.inputs_digest = digest.hex();

  const FrictionLaw frictionless = zero_law();
  const double T = grid.t_final;
  const int n_base = grid.n_steps;

  FlowSolution sol = decaying_flow(mu, lambda);
  SourceTerm f = make_source(mesh, dm, sol.source, "manufactured decaying source");
  const Vector u0 = dm.reduce(interpolate_velocity(dm, at_time(sol.velocity, 0.0)));

  auto sweep = [&](int n_steps) {
    TimeGrid g(T, n_steps);
    return verify_detail::sweep_states(sys, frictionless, g, u0, average_source(f, g), tol,
                                       max_iter);
  };

  std::vector<verify_detail::SweepStates> lv;
  std::vector<int> ns;
  for (int j = 0; j < n_levels; ++j) {
    ns.push_back(n_base << j);
    lv.push_back(sweep(ns.back()));
  }
  const int n_ref = 8 * ns.back();
  verify_detail::SweepStates ref = sweep(n_ref);
  std::vector<double> err;
  for (int j = 0; j < n_levels; ++j) {
    err.push_back(
        verify_detail::l2h_distance(sys, lv[std::size_t(j)].u, ns[std::size_t(j)], ref.u, n_ref, T));
    rep.note("stokes/self-error-" + std::to_string(j), err.back());
  }
  for (int j = 0; j + 1 < n_levels; ++j) {
    const double order = std::log2(err[std::size_t(j)] / err[std::size_t(j + 1)]);
    // order >= order_min checked as order_min <= order (lhs/rhs swapped form)
    rep.add("stokes/temporal-order-" + std::to_string(j + 1), order_min, order, 1e-12, 0.0);
  }

  // Space-time errors of the finest unsteady run against the interpolated
  // exact solution (dominated by the fixed spatial resolution).
  auto exact_u = [&](double t) {
    return dm.reduce(interpolate_velocity(dm, at_time(sol.velocity, t)));
  };
  const verify_detail::SweepStates& fine = lv.back();
  const int n_fine = ns.back();
  double acc_u = 0.0, acc_p = 0.0, worst_mean = 0.0;
  const double kf = T / double(n_fine);
  for (int n = 1; n <= n_fine; ++n) {
    Vector du = fine.u[std::size_t(n)];
    axpy(-1.0, exact_u(kf * n), du);
    acc_u += kf * sys.m.quad(du);
    Vector dp = fine.p[std::size_t(n - 1)];
    Vector pex = interpolate_pressure(
        mesh, [&](double x, double y) { return sol.pressure(x, y, kf * n); });
    // compare against the zero-mean representative of the interpolant
    double pex_mean = dot(sys.mean_p, pex) / sys.area;
    for (double& v : pex) v -= pex_mean;
    axpy(-1.0, pex, dp);
    acc_p += kf * sys.m_q.quad(dp);
    worst_mean = std::max(worst_mean,
                          std::abs(dot(sys.mean_p, fine.p[std::size_t(n - 1)])) / sys.area);
  }
  rep.note("stokes/space-time-velocity-error", std::sqrt(acc_u));
  rep.note("stokes/space-time-pressure-error", std::sqrt(acc_p));
  rep.add("stokes/pressure-zero-mean", worst_mean, 0.0, 0.0, 1e-10);

  // Steady manufactured case: after the start-up transient (initial
  // interpolant versus discrete steady state) has decayed, the remaining
  // error against the exact interpolant is purely spatial and must not move
  // with k; measured over the second half of the window.
  FlowSolution steady = decaying_flow(mu, 0.0);
  SourceTerm fs = make_source(mesh, dm, steady.source, "manufactured steady source");
  const Vector u0s = dm.reduce(interpolate_velocity(dm, at_time(steady.velocity, 0.0)));
  auto steady_err = [&](int n_steps) {
    TimeGrid g(T, n_steps);
    verify_detail::SweepStates tr =
        verify_detail::sweep_states(sys, frictionless, g, u0s, average_source(fs, g), tol,
                                    max_iter);
    double acc = 0.0;
    const double kk = T / double(n_steps);
    for (int n = n_steps / 2 + 1; n <= n_steps; ++n) {
      Vector du = tr.u[std::size_t(n)];
      axpy(-1.0, u0s, du);
      acc += kk * sys.m.quad(du);
    }
    return std::sqrt(acc);
  };
  const double s1 = steady_err(n_base), s2 = steady_err(2 * n_base);
  rep.note("stokes/steady-error-k", s1);
  rep.add("stokes/steady-k-independence", std::abs(s1 - s2), steady_rel_tol * std::max(s1, s2),
          1e-12, 1e-12);
  return rep;
}

// ---------------------------------------------------------------------------
// pressure uniqueness through the inf-sup constant
// ---------------------------------------------------------------------------

/// Re-solve every step's saddle system through a perturbed iterative path and
/// verify that the recovered pressure is unique up to solver residuals via
/// the inf-sup bound: writing the two momentum residuals r, r' and the
/// velocity difference du, the divergence coupling gives
///   alpha_b ||p - p'||_Q <= ||r|V0||_* + ||r'|V0||_* + ||(A du)|V0||_*
/// with every dual norm taken over the interior velocity space.  Also checks
/// that each momentum residual restricted to interior test functions vanishes
/// to ten times the linear-solver tolerance.
inline VerificationReport pressure_uniqueness_check(const DiscreteSystem& sys, const DofMap& dm,
                                                    const RotheTrajectory& traj,
                                                    double solver_tol = 1e-12) {
  VerificationReport rep;
  rep.title = "pressure uniqueness through inf-sup";
  Digest digest;
  digest.feed(traj.grid.t_final).feed(std::int64_t(traj.grid.n_steps));
  for (const Vector& p : traj.p) digest.feed(p);
  rep.inputs_digest = digest.hex();

  const double alpha_b = compute_inf_sup(sys, dm);
  rep.note("pressure/inf-sup-alpha", alpha_b);

  const double k = traj.grid.k;
  SparseMatrix amat = sys.m.scaled(1.0 / k).plus(sys.k_a, 1.0);
  SparseMatrix bt = sys.b.transposed();
  SaddleOptions alt_opt;
  alt_opt.tol = solver_tol;
  alt_opt.force_uzawa = true;
  SparseMatrix k0 = sys.k_v.submatrix(dm.interior_free, dm.interior_free);
  SpdOperator k0op(k0, 1e-13);
  const Vector zero_p(std::size_t(sys.n_pressure()), 0.0);

  auto restrict_interior = [&](const Vector& full) {
    Vector r(dm.interior_free.size());
    for (std::size_t i = 0; i < r.size(); ++i) r[i] = full[std::size_t(dm.interior_free[i])];
    return r;
  };

  double worst_dp = 0.0, worst_dp_bound = 0.0, worst_dp_gap = -1.0;
  double worst_res = 0.0;
  for (int n = 1; n <= traj.grid.n_steps; ++n) {
    // Reassemble the linear step system this step solved (friction frozen).
    Vector rhs = sys.m * traj.u[std::size_t(n - 1)];
    scale(rhs, 1.0 / k);
    axpy(1.0, traj.f_avg[std::size_t(n - 1)], rhs);
    Vector load(traj.xi[std::size_t(n - 1)].size());
    for (std::size_t b = 0; b < load.size(); ++b)
      load[b] = sys.m_gamma[b] * traj.xi[std::size_t(n - 1)][b];
    Vector tload(std::size_t(sys.n_free()), 0.0);
    sys.t.matvec_transpose(load, tload);
    axpy(-1.0, tload, rhs);

    alt_opt.uzawa_seed = 0x5eedull + std::uint64_t(n);
    SaddleSolver alt(amat, bt, sys.mean_p, alt_opt);
    SaddleResult sr = alt.solve(rhs, zero_p);
    Vector p_alt = scaled(sr.p, -1.0);

    const Vector& u1 = traj.u[std::size_t(n)];
    const Vector& p1 = traj.p[std::size_t(n - 1)];
    auto momentum_residual = [&](const Vector& u, const Vector& p_phys) {
      Vector r = amat * u;
      Vector btp(std::size_t(sys.n_free()), 0.0);
      sys.b.matvec_transpose(p_phys, btp);
      axpy(-1.0, btp, r);
      axpy(-1.0, rhs, r);
      return r;  // A u - B^T p_phys - rhs
    };
    Vector r1 = momentum_residual(u1, p1);
    Vector r2 = momentum_residual(sr.u, p_alt);
    Vector du = u1;
    axpy(-1.0, sr.u, du);
    const double dn_r1 = dual_norm(k0op, restrict_interior(r1));
    const double dn_r2 = dual_norm(k0op, restrict_interior(r2));
    const double dn_adu = dual_norm(k0op, restrict_interior(amat * du));

    Vector dp = p1;
    axpy(-1.0, p_alt, dp);
    const double dp_norm = std::sqrt(sys.m_q.quad(dp));
    const double dp_bound = (dn_r1 + dn_r2 + dn_adu) / alpha_b;
    if (dp_norm - dp_bound > worst_dp_gap) {
      worst_dp_gap = dp_norm - dp_bound;
      worst_dp = dp_norm;
      worst_dp_bound = dp_bound;
    }
    const double res_scale = 1.0 + nrm2(rhs);
    worst_res = std::max(worst_res, std::max(dn_r1, dn_r2) / res_scale);
  }
  rep.add("pressure/re-solve-distance", worst_dp, worst_dp_bound, 1e-8, 1e-12);
  rep.add("pressure/interior-residual", worst_res, 10.0 * solver_tol);
  return rep;
}

}  // namespace shvi
