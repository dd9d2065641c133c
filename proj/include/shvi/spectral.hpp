#pragma once

// Discrete constants gating well-posedness of the frictional Stokes problem:
// the smallest positive trace eigenvalue lambda_tau (sharp constant of the
// inequality ||T v||^2_{M_Gamma} <= lambda_tau^-1 ||v||_V^2), the discrete
// inf-sup constant of the divergence coupling over interior velocities, the
// smallness margin m = 2*mu - alpha_psi/lambda_tau, and the time-step bound
// under which each implicit step is uniquely solvable.

#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>

#include "shvi/core.hpp"
#include "shvi/fespace.hpp"
#include "shvi/solvers.hpp"
#include "shvi/sparse.hpp"

namespace shvi {

struct ConstantsReport {
  double mu = 0.0;
  double alpha_psi = 0.0;
  double k = 0.0;  // time step the step condition was evaluated at
  double lambda_tau = 0.0;
  double inf_sup_alpha = 0.0;       // over the interior (V0) velocity DOFs
  double inf_sup_alpha_full = 0.0;  // diagnostic: over all free velocity DOFs
  double m_margin = 0.0;            // 2*mu - alpha_psi/lambda_tau
  double step_bound = std::numeric_limits<double>::infinity();
  bool step_condition = true;  // alpha_psi*k/lambda_tau < 1 + 2*mu*k
};

/// Smallest positive eigenvalue (and eigenvector) of
///   K_V u = lambda T^T M_Gamma T u
/// over the free DOFs.  The eigenvector realizes the trace inequality with
/// equality.
inline GenEigResult trace_eigenpair(const DiscreteSystem& sys, double tol = 1e-12) {
  if (sys.n_slip() == 0)
    throw std::invalid_argument("trace_eigenpair: empty slip boundary");
  // T^T M_Gamma T assembled row by row: row b of T contributes
  // weight_b * t_b t_b^T.
  SparseMatrix tmt(sys.n_free(), sys.n_free());
  const auto& rp = sys.t.row_ptr();
  const auto& ci = sys.t.col_idx();
  const auto& tv = sys.t.values();
  for (int bb = 0; bb < sys.t.rows(); ++bb) {
    for (long e1 = rp[std::size_t(bb)]; e1 < rp[std::size_t(bb) + 1]; ++e1)
      for (long e2 = rp[std::size_t(bb)]; e2 < rp[std::size_t(bb) + 1]; ++e2)
        tmt.add(ci[std::size_t(e1)], ci[std::size_t(e2)],
                sys.m_gamma[std::size_t(bb)] * tv[std::size_t(e1)] * tv[std::size_t(e2)]);
  }
  tmt.finalize();
  return gen_eig_extreme(sys.k_v, tmt, EigWhich::smallest_positive, tol);
}

inline double compute_lambda_tau(const DiscreteSystem& sys, double tol = 1e-12) {
  return trace_eigenpair(sys, tol).value;
}

namespace spectral_detail {

/// Smallest positive eigenvalue of (B K^-1 B^T) q = beta^2 M_Q q on the
/// zero-mean pressure subspace.  The constant-pressure kernel direction is
/// lifted by the exact rank-one shift S + sigma (M_Q 1)(M_Q 1)^T / (1'M_Q 1),
/// which pins that mode at sigma while leaving every genuine (M_Q-orthogonal)
/// eigenpair untouched.  All genuine eigenvalues are bounded by the square of
/// the divergence continuity constant (<= 2), so a fixed sigma works on every
/// mesh.
inline double inf_sup_from(const SparseMatrix& kvel, const SparseMatrix& b,
                           const SparseMatrix& m_q, double tol) {
  if (b.rows() < 2)
    throw std::invalid_argument("compute_inf_sup: pressure space is degenerate");
  if (b.cols() == 0)
    throw std::invalid_argument("compute_inf_sup: empty velocity space");
  SpdOperator kop(kvel, std::min(tol, 1e-13));
  DenseMatrix s = schur_complement(kop, b);

  Vector ones(std::size_t(b.rows()), 1.0);
  Vector mq1 = m_q * ones;
  double mass = dot(ones, mq1);
  if (!(mass > 0.0)) throw std::invalid_argument("compute_inf_sup: singular pressure mass");
  const double sigma = 100.0;  // far above the continuity bound c_b^2 <= 2
  s.add_outer(sigma / mass, mq1);

  GenEigResult r = gen_eig_extreme(to_sparse(s), m_q, EigWhich::smallest_positive, tol);
  if (!(r.value > 0.0) || !(r.value < 0.5 * sigma))
    throw SolveError("compute_inf_sup: no eigenvalue below the deflation shift",
                     r.residual, r.iterations);
  return std::sqrt(r.value);
}

}  // namespace spectral_detail

/// Discrete inf-sup constant alpha_b over the interior velocity space V0
/// (every boundary DOF fixed), as the square root of the smallest positive
/// eigenvalue of B0 K_V0^-1 B0^T q = beta^2 M_Q q.
inline double compute_inf_sup(const DiscreteSystem& sys, const DofMap& dm, double tol = 1e-10) {
  if (dm.interior_free.empty())
    throw std::invalid_argument("compute_inf_sup: no interior velocity DOFs");
  std::vector<int> all_p(std::size_t(sys.n_pressure()));
  for (std::size_t q = 0; q < all_p.size(); ++q) all_p[q] = int(q);
  SparseMatrix b0 = sys.b.submatrix(all_p, dm.interior_free);
  SparseMatrix k0 = sys.k_v.submatrix(dm.interior_free, dm.interior_free);
  return spectral_detail::inf_sup_from(k0, b0, sys.m_q, tol);
}

/// Diagnostic variant of the inf-sup constant with the supremum taken over
/// the full free velocity space; never below the V0 value.
inline double compute_inf_sup_full(const DiscreteSystem& sys, double tol = 1e-10) {
  return spectral_detail::inf_sup_from(sys.k_v, sys.b, sys.m_q, tol);
}

/// Smallness margin and step bound.  The margin m = 2*mu - alpha_psi/lambda_tau
/// being positive makes the implicit step operator strongly monotone for every
/// step size; otherwise steps remain uniquely solvable exactly for
/// k < lambda_tau / (alpha_psi - 2*mu*lambda_tau), i.e. while
/// alpha_psi*k/lambda_tau < 1 + 2*mu*k.
inline ConstantsReport smallness(double mu, double alpha_psi, double lambda_tau, double k) {
  if (!(mu > 0.0)) throw std::invalid_argument("smallness: mu must be positive");
  if (!(lambda_tau > 0.0)) throw std::invalid_argument("smallness: lambda_tau must be positive");
  if (!(alpha_psi >= 0.0)) throw std::invalid_argument("smallness: alpha_psi must be >= 0");
  if (!(k > 0.0)) throw std::invalid_argument("smallness: k must be positive");
  ConstantsReport r;
  r.mu = mu;
  r.alpha_psi = alpha_psi;
  r.k = k;
  r.lambda_tau = lambda_tau;
  r.m_margin = 2.0 * mu - alpha_psi / lambda_tau;
  double slope = alpha_psi / lambda_tau - 2.0 * mu;
  r.step_bound =
      slope <= 0.0 ? std::numeric_limits<double>::infinity() : lambda_tau / (alpha_psi - 2.0 * mu * lambda_tau);
  r.step_condition = alpha_psi * k / lambda_tau < 1.0 + 2.0 * mu * k;
  return r;
}

inline std::string to_key_values(const ConstantsReport& r) {
  std::ostringstream os;
  os << "mu=" << fmt_g17(r.mu) << "\n";
  os << "alpha_psi=" << fmt_g17(r.alpha_psi) << "\n";
  os << "k=" << fmt_g17(r.k) << "\n";
  os << "lambda_tau=" << fmt_g17(r.lambda_tau) << "\n";
  os << "inf_sup_alpha=" << fmt_g17(r.inf_sup_alpha) << "\n";
  os << "inf_sup_alpha_full=" << fmt_g17(r.inf_sup_alpha_full) << "\n";
  os << "m_margin=" << fmt_g17(r.m_margin) << "\n";
  os << "step_bound=" << fmt_g17(r.step_bound) << "\n";
  os << "step_condition=" << (r.step_condition ? 1 : 0) << "\n";
  return os.str();
}

inline std::string constants_csv_header() {
  return "mu,alpha_psi,k,lambda_tau,inf_sup_alpha,inf_sup_alpha_full,m_margin,step_bound,"
         "step_condition";
}

inline std::string to_csv_row(const ConstantsReport& r) {
  std::ostringstream os;
  os << fmt_g17(r.mu) << "," << fmt_g17(r.alpha_psi) << "," << fmt_g17(r.k) << ","
     << fmt_g17(r.lambda_tau) << "," << fmt_g17(r.inf_sup_alpha) << ","
     << fmt_g17(r.inf_sup_alpha_full) << "," << fmt_g17(r.m_margin) << ","
     << fmt_g17(r.step_bound) << "," << (r.step_condition ? 1 : 0);
  return os.str();
}

}  // namespace shvi
