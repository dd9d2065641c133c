#pragma once

// Backward-Euler (Rothe) time stepping for the mixed slip-flow inequality:
// per-step nonsmooth saddle-point solves via a relaxed fixed point with nodal
// proximal resolvents on the friction law, smoothed initial projection, and
// the piecewise interpolants used by the verification studies.

#include <cmath>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "shvi/core.hpp"
#include "shvi/dense.hpp"
#include "shvi/fespace.hpp"
#include "shvi/fields.hpp"
#include "shvi/friction.hpp"
#include "shvi/solvers.hpp"
#include "shvi/sparse.hpp"

namespace shvi {

struct TimeGrid {
  double t_final = 1.0;
  int n_steps = 1;
  double k = 1.0;

  TimeGrid() = default;
  TimeGrid(double t_final_, int n_steps_) : t_final(t_final_), n_steps(n_steps_) {
    if (!(t_final > 0.0)) throw std::invalid_argument("TimeGrid: T must be positive");
    if (n_steps < 1) throw std::invalid_argument("TimeGrid: need at least one step");
    k = t_final / double(n_steps);
  }
  double node(int n) const { return n >= n_steps ? t_final : k * double(n); }
};

/// A time-dependent load functional over free velocity DOFs.
struct SourceTerm {
  std::string description;
  std::function<Vector(double)> eval;
};

/// Wrap an analytic field as an assembled load functional.  `mesh` and `dm`
/// are captured by reference and must outlive the returned SourceTerm.
inline SourceTerm make_source(const Mesh& mesh, const DofMap& dm, SpaceTimeField f,
                              std::string description) {
  SourceTerm s;
  s.description = std::move(description);
  s.eval = [mp = &mesh, dp = &dm, f = std::move(f)](double t) {
    return dp->reduce(assemble_load(*mp, *dp, at_time(f, t)));
  };
  return s;
}

/// Step averages f_n = (1/k) * integral of f over (t_{n-1}, t_n], by 2-point
/// Gauss quadrature (exact for sources polynomial in t of degree <= 3).
inline std::vector<Vector> average_source(const SourceTerm& f, const TimeGrid& grid) {
  if (!f.eval) throw std::invalid_argument("average_source: source has no evaluator");
  const double off = 0.5 / std::sqrt(3.0);
  std::vector<Vector> avg;
  avg.reserve(std::size_t(grid.n_steps));
  for (int n = 1; n <= grid.n_steps; ++n) {
    double mid = 0.5 * (grid.node(n - 1) + grid.node(n));
    for (double t : {mid - off * grid.k, mid + off * grid.k}) {
      Vector v = f.eval(t);
      if (!all_finite(v))
        throw std::runtime_error("average_source: non-finite source at t = " + fmt_g17(t));
      if (n == int(avg.size()) + 1)
        avg.push_back(scaled(v, 0.5));
      else
        axpy(0.5, v, avg.back());
    }
  }
  return avg;
}

struct StepStats {
  int iterations = 0;
  // Graph residual of the friction inclusion: xi is an exact subgradient at
  // the converged nodal slip state, which differs from the realized trace
  // T u by at most this much (sup over slip nodes).  A value-space distance
  // dist(xi_b, subdiff((T u)_b)) is not a usable residual: the subdifferential
  // jumps at kinks, so at a sticking node it stays O(1) however accurate the
  // solve is, while the graph gap contracts to solver precision.
  double inclusion_residual = 0.0;
  double slip_change = 0.0;  // final sup-norm movement of the slip iterate
  double omega = 1.0;        // relaxation factor in effect at termination
};

struct StepResult {
  Vector u, p, xi;
  StepStats stats;
};

struct RotheTrajectory {
  TimeGrid grid;
  std::vector<Vector> u;      // n_steps + 1 entries, u[0] = projected initial
  std::vector<Vector> p;      // n_steps entries (physical sign, zero mean)
  std::vector<Vector> xi;     // n_steps entries of slip-node multipliers
  std::vector<StepStats> stats;
  std::vector<Vector> f_avg;  // the step-averaged loads the run used
};

/// Step failure with the partial trajectory attached for diagnosis.
struct RunError : SolveError {
  RotheTrajectory partial;
  int failed_step = 0;
  RunError(const SolveError& e, RotheTrajectory traj, int step)
      : SolveError(std::string(e.what()) + " (at step " + std::to_string(step) + ")", e.residual,
                   e.iterations),
        partial(std::move(traj)),
        failed_step(step) {}
};

/// Discretely divergence-free, constraint-respecting initial state: the
/// minimizer of ||v - u0||_H^2 + k ||v||_V^2 over the admissible space.  The
/// k-scaled smoothing keeps ||result||_V = O(k^{-1/2}) for rough u0 (which
/// only needs to be square-integrable).
inline Vector project_initial(const Mesh& mesh, const DofMap& dm, const DiscreteSystem& sys,
                              const SpaceTimeField& u0, const TimeGrid& grid,
                              const SaddleOptions& opt = {}) {
  Vector rhs = dm.reduce(assemble_load(mesh, dm, at_time(u0, 0.0)));
  SparseMatrix kmat = sys.m.plus(sys.k_v, grid.k);
  SparseMatrix bt = sys.b.transposed();
  SaddleSolver saddle(kmat, bt, sys.mean_p, opt);
  Vector zero_p(std::size_t(sys.n_pressure()), 0.0);
  return saddle.solve(rhs, zero_p).u;
}

/// Per-step solver with the saddle factorization built once per (system, k).
/// Holds references to the system; keep it alive while stepping.
///
/// Because the multipliers enter the momentum balance only through the slip
/// trace, each step condenses exactly onto the slip nodes: with the
/// friction-free trace w_f and the boundary response matrix
/// S_{bc} = (T A~^{-1} T^T)_{bc} of the constrained step operator
/// A = M/k + K_a, the step solves
///   min_w  1/2 (w - w_f)^T S^{-1} (w - w_f) + sum_b m_gamma_b psi(w_b),
/// an s-dimensional convex composite problem (convexity certified at
/// construction).  Nodal prox sweeps minimize it exactly; one linear saddle
/// solve per outer pass then realizes (u, p), and the exactness of the
/// condensed model makes the outer fixed point settle in about two passes.
class RotheEngine {
 public:
  RotheEngine(const DiscreteSystem& sys, FrictionLaw law, double k, SaddleOptions opt = {})
      : sys_(&sys),
        law_(std::move(law)),
        k_(k),
        amat_(make_step_matrix(sys, k)),
        bt_(sys.b.transposed()),
        saddle_(amat_, bt_, sys.mean_p, opt),
        zero_p_(std::size_t(sys.n_pressure()), 0.0) {
    // Documented step-size guard with the nodal prox parameter k / m_gamma_b.
    for (double wgt : sys.m_gamma) require_prox_condition(k / wgt);
    build_condensed_model();
  }

  RotheEngine(const RotheEngine&) = delete;
  RotheEngine& operator=(const RotheEngine&) = delete;

  double k() const { return k_; }
  const FrictionLaw& law() const { return law_; }

  /// One backward-Euler step: solve
  ///   (1/k) M (u - u_prev) + K_a u + T^T diag(m_gamma) xi - B^T p = f_n,
  ///   B u = 0,  xi_b an exact subgradient at the converged nodal slip,
  /// by nodal prox sweeps on the condensed slip problem, a linear saddle
  /// solve per pass, and a unit-relaxed slip update.  `w_start` overrides the
  /// initial slip iterate (default: trace of u_prev).
  StepResult step(const Vector& u_prev, const Vector& f_n, double tol, int max_iter,
                  const Vector* w_start = nullptr) const {
    const DiscreteSystem& sys = *sys_;
    if (int(u_prev.size()) != sys.n_free() || int(f_n.size()) != sys.n_free())
      throw std::invalid_argument("RotheEngine::step: length mismatch");
    if (!(tol > 0.0) || max_iter < 1)
      throw std::invalid_argument("RotheEngine::step: need tol > 0 and max_iter >= 1");

    Vector rhs_base = sys.m * u_prev;
    scale(rhs_base, 1.0 / k_);
    axpy(1.0, f_n, rhs_base);

    // Friction-free trace and its condensed gradient data, fixed per step.
    Vector w_f = sys.t * saddle_.solve(rhs_base, zero_p_).u;
    Vector q = hmat_.matvec(w_f);

    Vector w = w_start ? *w_start : sys.t * u_prev;
    if (int(w.size()) != sys.n_slip())
      throw std::invalid_argument("RotheEngine::step: slip iterate length mismatch");
    Vector xi(w.size(), 0.0);
    const double inner_tol = std::max(0.05 * tol, 1e-16 * (1.0 + nrm_inf(w_f)));

    StepResult out;
    Vector w_entry = w;
    for (int it = 1; it <= max_iter; ++it) {
      // (i) nodal prox sweeps: minimize the condensed slip objective from the
      // current iterate; every xi_b is an exact subgradient at the final w_b.
      w_entry = w;
      condensed_minimize(q, w, xi, inner_tol);
      // (ii) linear saddle solve with the friction load frozen.
      Vector rhs = rhs_base;
      Vector load(xi.size());
      for (std::size_t b = 0; b < xi.size(); ++b) load[b] = sys.m_gamma[b] * xi[b];
      Vector tload(std::size_t(sys.n_free()), 0.0);
      sys.t.matvec_transpose(load, tload);
      axpy(-1.0, tload, rhs);
      SaddleResult sr = saddle_.solve(rhs, zero_p_);
      // (iii) residuals and slip update (unit relaxation: the model is exact,
      // so the realized trace is already the next fixed-point iterate).
      Vector trace = sys.t * sr.u;
      double gap = 0.0, change = 0.0;
      for (std::size_t b = 0; b < w.size(); ++b) {
        gap = std::max(gap, std::abs(w[b] - trace[b]));
        change = std::max(change, std::abs(trace[b] - w_entry[b]));
      }
      out.stats.iterations = it;
      out.stats.inclusion_residual = gap;
      out.stats.slip_change = change;
      out.stats.omega = 1.0;
      w = trace;
      if (gap <= tol && change <= tol) {
        out.u = std::move(sr.u);
        out.p = scaled(sr.p, -1.0);  // solver multiplier has the opposite sign
        out.xi = xi;
        return out;
      }
      if (it == max_iter) {
        throw SolveError(
            "RotheEngine::step: fixed point did not converge; consider halving k "
            "(k < lambda_tau/alpha_psi guarantees the step problem)",
            std::max(gap, change), it);
      }
    }
    throw SolveError("RotheEngine::step: unreachable", 0.0, 0);
  }

 private:
  static SparseMatrix make_step_matrix(const DiscreteSystem& sys, double k) {
    if (!(k > 0.0)) throw std::invalid_argument("RotheEngine: k must be positive");
    return sys.m.scaled(1.0 / k).plus(sys.k_a, 1.0);
  }

  void require_prox_condition(double theta) const {
    if (!(theta > 0.0) || !(theta * law_.alpha_psi < 1.0))
      throw std::invalid_argument(
          "RotheEngine: per-node prox condition theta*alpha_psi < 1 fails; "
          "reduce the time step (k < lambda_tau/alpha_psi guarantees it)");
  }

  /// Assemble S (trace response of the constrained step operator to unit
  /// nodal multipliers), invert it to the condensed Hessian H, derive the
  /// nodal prox parameters theta_b = m_gamma_b / H_bb, and certify convexity
  /// of the condensed objective: H - alpha_psi * diag(m_gamma) must be
  /// positive definite, the discrete form of the step-size condition.
  void build_condensed_model() {
    const DiscreteSystem& sys = *sys_;
    const int s = sys.n_slip();
    DenseMatrix smat(s, s);
    for (int c = 0; c < s; ++c) {
      Vector load(std::size_t(s), 0.0);
      load[std::size_t(c)] = 1.0;
      Vector tload(std::size_t(sys.n_free()), 0.0);
      sys.t.matvec_transpose(load, tload);
      Vector tr = sys.t * saddle_.solve(tload, zero_p_).u;
      for (int b = 0; b < s; ++b) smat(b, c) = tr[std::size_t(b)];
    }
    for (int b = 0; b < s; ++b)  // symmetrize round-off
      for (int c = 0; c < b; ++c) {
        double v = 0.5 * (smat(b, c) + smat(c, b));
        smat(b, c) = smat(c, b) = v;
      }
    Cholesky sfac(smat, 1e-13);
    if (sfac.failed())
      throw SolveError(
          "RotheEngine: slip trace response matrix is singular; the slip "
          "boundary does not couple to the constrained velocity space",
          0.0, sfac.fail_index());
    hmat_ = DenseMatrix(s, s);
    for (int c = 0; c < s; ++c) {
      Vector e(std::size_t(s), 0.0);
      e[std::size_t(c)] = 1.0;
      Vector h = sfac.solve(e);
      for (int b = 0; b < s; ++b) hmat_(b, c) = h[std::size_t(b)];
    }
    for (int b = 0; b < s; ++b)
      for (int c = 0; c < b; ++c) {
        double v = 0.5 * (hmat_(b, c) + hmat_(c, b));
        hmat_(b, c) = hmat_(c, b) = v;
      }
    theta_.clear();
    theta_.reserve(std::size_t(s));
    for (int b = 0; b < s; ++b) theta_.push_back(sys.m_gamma[std::size_t(b)] / hmat_(b, b));
    for (double th : theta_) require_prox_condition(th);
    DenseMatrix conv = hmat_;
    for (int b = 0; b < s; ++b) conv(b, b) -= law_.alpha_psi * sys.m_gamma[std::size_t(b)];
    Cholesky cert(conv, 1e-12);
    if (s > 0 && cert.failed())
      throw std::invalid_argument(
          "RotheEngine: the step objective is not convex on the slip boundary "
          "(condensed Hessian minus alpha_psi * M_Gamma fails positive "
          "definiteness); reduce the time step or the friction nonconvexity");
  }

  /// Gauss-Seidel nodal prox sweeps on the condensed slip objective.  Exact
  /// per-coordinate minimization; under the certified convexity this
  /// converges globally.  xi_b = (z_b - w_b)/theta_b is an exact subgradient
  /// of psi at w_b by prox stationarity, whatever the sweep count.
  void condensed_minimize(const Vector& q, Vector& w, Vector& xi, double inner_tol) const {
    const int s = int(w.size());
    const long cap = 400L * s + 200;
    double delta = 0.0;
    for (long sweep = 0; sweep < cap; ++sweep) {
      delta = 0.0;
      for (int b = 0; b < s; ++b) {
        double z = q[std::size_t(b)];
        for (int c = 0; c < s; ++c)
          if (c != b) z -= hmat_(b, c) * w[std::size_t(c)];
        z /= hmat_(b, b);
        double wb = prox(law_, theta_[std::size_t(b)], z);
        delta = std::max(delta, std::abs(wb - w[std::size_t(b)]));
        w[std::size_t(b)] = wb;
        xi[std::size_t(b)] = (z - wb) / theta_[std::size_t(b)];
      }
      if (delta <= inner_tol) return;
    }
    throw SolveError(
        "RotheEngine::step: nodal prox sweeps on the condensed slip problem "
        "stalled; consider halving k (k < lambda_tau/alpha_psi guarantees the "
        "step problem)",
        delta, int(cap));
  }

  const DiscreteSystem* sys_;
  FrictionLaw law_;
  double k_;
  SparseMatrix amat_;  // M/k + K_a
  SparseMatrix bt_;
  SaddleSolver saddle_;
  Vector zero_p_;
  DenseMatrix hmat_;           // condensed slip Hessian S^{-1}
  std::vector<double> theta_;  // nodal prox parameters m_gamma_b / H_bb
};

/// One-off step solve (constructs the engine internally; prefer RotheEngine
/// when stepping repeatedly on the same system and k).
inline StepResult step_solve(const DiscreteSystem& sys, const FrictionLaw& law,
                             const Vector& u_prev, const Vector& f_n, double k, double tol,
                             int max_iter, const Vector* w_start = nullptr,
                             const SaddleOptions& opt = {}) {
  RotheEngine engine(sys, law, k, opt);
  return engine.step(u_prev, f_n, tol, max_iter, w_start);
}

/// Full Rothe sweep: projected initial state, then n_steps backward-Euler
/// steps.  On failure, throws RunError with the partial trajectory attached.
inline RotheTrajectory run(const Mesh& mesh, const DofMap& dm, const DiscreteSystem& sys,
                           const FrictionLaw& law, const SpaceTimeField& u0,
                           const SourceTerm& f, const TimeGrid& grid, double tol,
                           int max_iter = 200, const SaddleOptions& opt = {}) {
  RotheTrajectory traj;
  traj.grid = grid;
  traj.f_avg = average_source(f, grid);
  traj.u.push_back(project_initial(mesh, dm, sys, u0, grid, opt));
  RotheEngine engine(sys, law, grid.k, opt);
  for (int n = 1; n <= grid.n_steps; ++n) {
    try {
      StepResult sr = engine.step(traj.u.back(), traj.f_avg[std::size_t(n - 1)], tol, max_iter);
      traj.u.push_back(std::move(sr.u));
      traj.p.push_back(std::move(sr.p));
      traj.xi.push_back(std::move(sr.xi));
      traj.stats.push_back(sr.stats);
    } catch (const SolveError& e) {
      throw RunError(e, std::move(traj), n);
    }
  }
  return traj;
}

/// Piecewise interpolants over a complete trajectory: continuous piecewise
/// linear u_lin, right-continuous piecewise constants u_bar / xi_bar / f_bar
/// (value on (t_{n-1}, t_n] is the step-n one; the first step also covers
/// t = 0).  Holds a pointer to the trajectory; keep it alive.
class Interpolants {
 public:
  explicit Interpolants(const RotheTrajectory& traj) : traj_(&traj) {
    const auto n = std::size_t(traj.grid.n_steps);
    if (traj.u.size() != n + 1 || traj.p.size() != n || traj.xi.size() != n ||
        traj.f_avg.size() != n)
      throw std::invalid_argument("Interpolants: incomplete trajectory");
  }

  Vector u_lin(double t) const {
    int snap = node_index(t);
    if (snap >= 0) return traj_->u[std::size_t(snap)];
    int n = interval(t);
    double s = t / traj_->grid.k - double(n - 1);
    Vector v = traj_->u[std::size_t(n - 1)];
    const Vector& un = traj_->u[std::size_t(n)];
    for (std::size_t i = 0; i < v.size(); ++i) v[i] += s * (un[i] - v[i]);
    return v;
  }
  Vector u_bar(double t) const { return traj_->u[std::size_t(step_of(t))]; }
  Vector xi_bar(double t) const { return traj_->xi[std::size_t(step_of(t) - 1)]; }
  Vector f_bar(double t) const { return traj_->f_avg[std::size_t(step_of(t) - 1)]; }

  const RotheTrajectory& trajectory() const { return *traj_; }

 private:
  // Node snap: keeps evaluation at grid nodes exact despite t/k round-off.
  int node_index(double t) const {
    double r = t / traj_->grid.k;
    double n = std::floor(r + 0.5);
    if (std::abs(r - n) < 1e-9 && n >= 0.0 && n <= double(traj_->grid.n_steps)) return int(n);
    return -1;
  }
  int interval(double t) const {
    int n = int(std::ceil(t / traj_->grid.k - 1e-9));
    return std::min(std::max(n, 1), traj_->grid.n_steps);
  }
  int step_of(double t) const {
    int snap = node_index(t);
    if (snap >= 0) return std::max(snap, 1);  // value at t_n is the step-n one; t=0 -> step 1
    return interval(t);
  }
  const RotheTrajectory* traj_;
};

inline Interpolants build_interpolants(const RotheTrajectory& traj) { return Interpolants(traj); }

}  // namespace shvi
