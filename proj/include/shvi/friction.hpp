#pragma once

// Friction potentials for the slip boundary condition: locally Lipschitz,
// possibly nonconvex scalar laws with finitely many derivative breakpoints.
// Provides the Clarke directional derivative, subgradient selection, an exact
// global proximal operator by branch enumeration, and a sampling validator
// for the growth and relaxed-monotonicity assumptions.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "shvi/core.hpp"

namespace shvi {

/// A scalar friction potential psi with piecewise-C^1 structure.  The
/// subdifferential at s is the interval between the one-sided derivatives.
/// `c0` certifies the growth bound |eta| <= c0(1+|s|) for eta in the
/// subdifferential; `alpha_psi` certifies relaxed monotonicity
/// (eta1-eta2)(s1-s2) >= -alpha_psi (s1-s2)^2.
struct FrictionLaw {
  std::string name;
  double c0 = 0.0;
  double alpha_psi = 0.0;
  std::vector<double> breakpoints;  // ascending; empty for globally C^1 laws
  std::function<double(double)> psi;
  std::function<double(double)> deriv_minus;  // left one-sided derivative
  std::function<double(double)> deriv_plus;   // right one-sided derivative
};

/// Subdifferential interval [lo, hi] at s (convex hull of the one-sided
/// derivatives; for nonconvex kinks the hull still contains both).
inline std::pair<double, double> subdiff(const FrictionLaw& law, double s) {
  double a = law.deriv_minus(s);
  double b = law.deriv_plus(s);
  return {std::min(a, b), std::max(a, b)};
}

/// Clarke directional derivative psi0(xi; eta) = max of g*eta over the
/// subdifferential at xi.
inline double eval_psi0(const FrictionLaw& law, double xi, double eta_dir) {
  auto [lo, hi] = subdiff(law, xi);
  return eta_dir >= 0.0 ? hi * eta_dir : lo * eta_dir;
}

/// Minimal-absolute-value element of the subdifferential at xi (ties toward
/// zero; at smooth points this is just the derivative).
inline double select_subgrad(const FrictionLaw& law, double xi) {
  auto [lo, hi] = subdiff(law, xi);
  if (lo <= 0.0 && 0.0 <= hi) return 0.0;
  return std::abs(lo) <= std::abs(hi) ? lo : hi;
}

/// Global minimizer of F(w) = (w-z)^2/(2 theta) + psi(w).  Requires
/// theta*alpha_psi < 1, which makes F strictly convex branchwise and the
/// minimizer unique; the search still enumerates every branch stationary
/// point and breakpoint so nothing rests on convexity of psi itself.
inline double prox(const FrictionLaw& law, double theta, double z) {
  if (!(theta > 0.0)) throw std::invalid_argument("prox: theta must be positive");
  if (!(theta * law.alpha_psi < 1.0))
    throw std::invalid_argument("prox: step violates per-node convexity condition");
  auto obj = [&](double w) { return 0.5 * (w - z) * (w - z) / theta + law.psi(w); };
  auto slope_plus = [&](double w) { return (w - z) / theta + law.deriv_plus(w); };
  auto slope_minus = [&](double w) { return (w - z) / theta + law.deriv_minus(w); };

  double radius = std::max(1.0, theta * law.c0 * (2.0 + std::abs(z)));
  for (int grow = 0; grow < 64; ++grow) {
    double lo = z - radius, hi = z + radius;
    std::vector<double> knots{lo};
    for (double b : law.breakpoints)
      if (b > lo && b < hi) knots.push_back(b);
    knots.push_back(hi);

    std::vector<double> cand = knots;
    cand.push_back(z);
    for (std::size_t i = 0; i + 1 < knots.size(); ++i) {
      double a = knots[i], b = knots[i + 1];
      if (!(b > a)) continue;
      // The objective slope is strictly increasing inside a branch
      // (1/theta - alpha_psi > 0), so at most one interior stationary point.
      if (slope_plus(a) >= 0.0 || slope_minus(b) <= 0.0) continue;
      double x0 = a, x1 = b;
      for (int it = 0; it < 200; ++it) {
        double mid = 0.5 * (x0 + x1);
        if (!(mid > x0) || !(mid < x1)) break;
        (slope_plus(mid) < 0.0 ? x0 : x1) = mid;
      }
      cand.push_back(0.5 * (x0 + x1));
    }

    double best = cand.front();
    double best_f = obj(best);
    for (double w : cand) {
      double fw = obj(w);
      bool better = fw < best_f;
      bool tie = fw == best_f && (std::abs(w) < std::abs(best) ||
                                  (std::abs(w) == std::abs(best) && w < best));
      if (better || tie) {
        best = w;
        best_f = fw;
      }
    }
    if (best > lo + 1e-12 * radius && best < hi - 1e-12 * radius) return best;
    radius *= 4.0;  // minimizer pinned to the search edge: widen and retry
  }
  throw SolveError("prox: search interval did not stabilize", 0.0, 64);
}

// ---------------------------------------------------------------------------
// Built-in laws.

/// Frictionless slip: psi identically zero.
inline FrictionLaw zero_law() {
  FrictionLaw law;
  law.name = "zero";
  law.c0 = 0.0;
  law.alpha_psi = 0.0;
  law.psi = [](double) { return 0.0; };
  law.deriv_minus = [](double) { return 0.0; };
  law.deriv_plus = [](double) { return 0.0; };
  return law;
}

/// Quadratic (viscous-friction) potential psi(s) = kappa/2 s^2.  Convex, so
/// any positive relaxed-monotonicity constant works; a tiny one is stored.
inline FrictionLaw quadratic_law(double kappa) {
  if (!(kappa > 0.0)) throw std::invalid_argument("quadratic_law: kappa must be positive");
  FrictionLaw law;
  law.name = "quadratic";
  law.c0 = kappa;
  law.alpha_psi = 1e-8;
  law.psi = [kappa](double s) { return 0.5 * kappa * s * s; };
  law.deriv_minus = [kappa](double s) { return kappa * s; };
  law.deriv_plus = law.deriv_minus;
  return law;
}

/// Smooth nonconvex saturating potential psi(s) = kappa/2 ln(1+s^2):
/// derivative kappa s/(1+s^2) is bounded by kappa/2 and loses monotonicity
/// for |s| > 1; the curvature minimum -kappa/8 (at s^2 = 3) certifies
/// alpha_psi = kappa/8.
inline FrictionLaw saturating_law(double kappa) {
  if (!(kappa > 0.0)) throw std::invalid_argument("saturating_law: kappa must be positive");
  FrictionLaw law;
  law.name = "saturating";
  law.c0 = 0.5 * kappa;
  law.alpha_psi = 0.125 * kappa;
  law.psi = [kappa](double s) { return 0.5 * kappa * std::log1p(s * s); };
  law.deriv_minus = [kappa](double s) { return kappa * s / (1.0 + s * s); };
  law.deriv_plus = law.deriv_minus;
  return law;
}

/// Slip-weakening piecewise-quadratic potential: the friction threshold
/// decays linearly from mu1 at onset to mu2 beyond slip s0,
///   psi'(s) = sign(s) max(mu2, mu1 - (mu1-mu2)|s|/s0),  subdiff(0) = [-mu1, mu1].
/// Nonconvex at the origin; alpha_psi = (mu1-mu2)/s0 is the exact weakening
/// slope.
inline FrictionLaw slip_weakening_law(double mu1, double mu2, double s0) {
  if (!(mu1 > 0.0) || !(mu2 > 0.0) || !(mu1 > mu2))
    throw std::invalid_argument("slip_weakening_law: need mu1 > mu2 > 0");
  if (!(s0 > 0.0)) throw std::invalid_argument("slip_weakening_law: s0 must be positive");
  FrictionLaw law;
  law.name = "slip_weakening";
  law.c0 = mu1;
  law.alpha_psi = (mu1 - mu2) / s0;
  law.breakpoints = {-s0, 0.0, s0};
  double drop = (mu1 - mu2) / s0;
  law.psi = [mu1, mu2, s0, drop](double s) {
    double a = std::abs(s);
    if (a <= s0) return mu1 * a - 0.5 * drop * a * a;
    double at_s0 = mu1 * s0 - 0.5 * drop * s0 * s0;
    return at_s0 + mu2 * (a - s0);
  };
  auto deriv = [mu1, mu2, s0, drop](double s) {
    double a = std::abs(s);
    double mag = a >= s0 ? mu2 : mu1 - drop * a;
    return s >= 0.0 ? mag : -mag;
  };
  law.deriv_minus = [mu1, deriv](double s) { return s == 0.0 ? -mu1 : deriv(s); };
  law.deriv_plus = [mu1, deriv](double s) { return s == 0.0 ? mu1 : deriv(s); };
  return law;
}

// ---------------------------------------------------------------------------
// Assumption validator.

struct LawValidation {
  std::string law_name;
  long growth_checks = 0;
  long mono_checks = 0;
  long growth_violations = 0;
  long mono_violations = 0;
  /// min over samples of c0(1+|xi|) - |eta| (negative = violation)
  double worst_growth_margin = std::numeric_limits<double>::infinity();
  /// min over pairs of [(eta1-eta2)(xi1-xi2) + alpha (xi1-xi2)^2] / (xi1-xi2)^2;
  /// raw sampled value: near-coincident pairs can push it slightly negative
  /// through round-off even for a clean law (violations use a guarded test)
  double worst_mono_margin = std::numeric_limits<double>::infinity();
  /// empirical tightest relaxed-monotonicity constant (max negative secant
  /// slope of the subgradient selection; may be negative for monotone laws)
  double alpha_hat = -std::numeric_limits<double>::infinity();

  bool ok() const { return growth_violations == 0 && mono_violations == 0; }
};

namespace friction_detail {

inline double frac(double x) { return x - std::floor(x); }

}  // namespace friction_detail

/// Deterministic sampling check of the growth bound and relaxed monotonicity
/// over [-radius, radius]: a golden-ratio low-discrepancy sequence plus every
/// breakpoint, with all subdifferential interval endpoints per sample pair.
inline LawValidation validate_law(const FrictionLaw& law, long n_samples, double radius) {
  if (n_samples < 1) throw std::invalid_argument("validate_law: n_samples must be >= 1");
  if (!(radius > 0.0)) throw std::invalid_argument("validate_law: radius must be positive");
  LawValidation rep;
  rep.law_name = law.name;
  const double tol = 1e-12;

  std::vector<double> special = law.breakpoints;
  special.push_back(0.0);
  special.push_back(radius);
  special.push_back(-radius);

  auto growth_check = [&](double xi) {
    auto [lo, hi] = subdiff(law, xi);
    for (double eta : {lo, hi}) {
      double margin = law.c0 * (1.0 + std::abs(xi)) - std::abs(eta);
      rep.worst_growth_margin = std::min(rep.worst_growth_margin, margin);
      if (margin < -tol * (1.0 + law.c0) * (1.0 + radius)) ++rep.growth_violations;
      ++rep.growth_checks;
    }
  };
  auto mono_check = [&](double x1, double x2) {
    double dx = x1 - x2;
    if (dx == 0.0) return;
    auto [lo1, hi1] = subdiff(law, x1);
    auto [lo2, hi2] = subdiff(law, x2);
    for (double e1 : {lo1, hi1}) {
      for (double e2 : {lo2, hi2}) {
        double secant = -(e1 - e2) / dx;
        rep.alpha_hat = std::max(rep.alpha_hat, secant);
        rep.worst_mono_margin = std::min(rep.worst_mono_margin, law.alpha_psi - secant);
        // Violation test on the unnormalized slack with a guard proportional
        // to the terms' magnitudes: near-coincident pairs otherwise turn
        // subtraction round-off into spurious violations.
        double slack = (e1 - e2) * dx + law.alpha_psi * dx * dx;
        double guard = 32.0 * std::numeric_limits<double>::epsilon() *
                           ((std::abs(e1) + std::abs(e2)) * std::abs(dx) +
                            law.alpha_psi * dx * dx) +
                       tol * std::max(1.0, law.alpha_psi) * dx * dx;
        if (slack < -guard) ++rep.mono_violations;
        ++rep.mono_checks;
      }
    }
  };

  // Golden-ratio 1D sequence for growth, plastic-constant 2D for pairs.
  const double g1 = 0.6180339887498949;
  const double a1 = 0.7548776662466927, a2 = 0.5698402909980532;
  for (long i = 0; i < n_samples; ++i) {
    double xi = (2.0 * friction_detail::frac(double(i + 1) * g1) - 1.0) * radius;
    growth_check(xi);
    double p1 = (2.0 * friction_detail::frac(double(i + 1) * a1) - 1.0) * radius;
    double p2 = (2.0 * friction_detail::frac(double(i + 1) * a2) - 1.0) * radius;
    mono_check(p1, p2);
  }
  for (double s : special) {
    growth_check(s);
    for (double s2 : special) mono_check(s, s2);
    long stride = std::max<long>(1, n_samples / 512);
    for (long i = 0; i < n_samples; i += stride)
      mono_check(s, (2.0 * friction_detail::frac(double(i + 1) * g1) - 1.0) * radius);
  }
  return rep;
}

}  // namespace shvi
