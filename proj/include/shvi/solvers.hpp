#pragma once

// Linear solver layer. Systems below `dense_threshold` unknowns go through the
// direct dense factorizations; above that iterative paths take over (Jacobi
// preconditioned CG for SPD, projected Uzawa-CG for saddle systems). Every
// path is single threaded with fixed reduction order, so identical inputs give
// bit-identical outputs.

#include <optional>

#include "shvi/dense.hpp"

namespace shvi {

enum class SpdMethod { automatic, dense, iterative };

inline constexpr int kDefaultDenseThreshold = 2000;

namespace detail {

/// Jacobi preconditioned conjugate gradients. Throws SolveError on stagnation
/// or iteration exhaustion, with the achieved residual attached.
inline Vector pcg(const SparseMatrix& k, const Vector& b, double tol, long max_iter) {
  const int n = k.rows();
  Vector x(std::size_t(n), 0.0);
  double nb = nrm2(b);
  if (nb == 0.0) return x;
  Vector dinv = k.diagonal();
  for (double& d : dinv) d = (std::fabs(d) > 0.0) ? 1.0 / d : 1.0;
  Vector r = b;
  Vector z(std::size_t(n), 0.0);
  for (int i = 0; i < n; ++i) z[std::size_t(i)] = dinv[std::size_t(i)] * r[std::size_t(i)];
  Vector p = z, q;
  double rz = dot(r, z);
  if (max_iter <= 0) max_iter = 20L * n + 200;
  double best = nrm2(r);
  long best_at = 0;
  for (long it = 1; it <= max_iter; ++it) {
    k.matvec(p, q);
    double pq = dot(p, q);
    if (!(pq > 0.0)) throw SolveError("pcg: matrix not positive definite", best / nb, it);
    double alpha = rz / pq;
    axpy(alpha, p, x);
    axpy(-alpha, q, r);
    double nr = nrm2(r);
    if (nr <= tol * nb) {
      // guard against drifted recurrence: accept on the true residual
      Vector rt = b;
      Vector kx = k * x;
      axpy(-1.0, kx, rt);
      if (nrm2(rt) <= 2.0 * tol * nb) return x;
      r = rt;
      nr = nrm2(r);
    }
    if (nr < best * 0.999999) {
      best = nr;
      best_at = it;
    } else if (it - best_at > 250) {
      throw SolveError("pcg: residual stagnation", nr / nb, it);
    }
    for (int i = 0; i < n; ++i) z[std::size_t(i)] = dinv[std::size_t(i)] * r[std::size_t(i)];
    double rz2 = dot(r, z);
    double beta = rz2 / rz;
    rz = rz2;
    for (int i = 0; i < n; ++i) p[std::size_t(i)] = z[std::size_t(i)] + beta * p[std::size_t(i)];
  }
  throw SolveError("pcg: max iterations reached", best / nb, max_iter);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// SPD solve, one-shot and reusable-factorization forms
// ---------------------------------------------------------------------------

/// Reusable SPD solver: dense Cholesky below the threshold, CG above it.
class SpdOperator {
 public:
  SpdOperator(const SparseMatrix& k, double tol = 1e-13, long max_iter = 0,
              SpdMethod method = SpdMethod::automatic, int dense_threshold = kDefaultDenseThreshold)
      : k_(&k), tol_(tol), max_iter_(max_iter) {
    if (k.rows() != k.cols()) throw std::invalid_argument("SpdOperator: not square");
    bool dense = (method == SpdMethod::dense) ||
                 (method == SpdMethod::automatic && k.rows() <= dense_threshold);
    if (dense) {
      chol_.emplace(to_dense(k));
      if (chol_->failed())
        throw SolveError("SpdOperator: Cholesky pivot failure at index " +
                             std::to_string(chol_->fail_index()),
                         0.0, chol_->fail_index());
    }
  }

  int n() const { return k_->rows(); }
  bool dense() const { return chol_.has_value(); }
  const SparseMatrix& matrix() const { return *k_; }

  Vector solve(const Vector& rhs) const {
    require_finite(rhs, "SpdOperator::solve rhs");
    if (!chol_) return detail::pcg(*k_, rhs, tol_, max_iter_);
    Vector x = chol_->solve(rhs);
    // adaptive iterative refinement: keeps the residual contract independent
    // of the conditioning of assembled systems
    double nb = nrm2(rhs);
    if (nb == 0.0) return x;
    for (int pass = 0; pass < 3; ++pass) {
      Vector r = rhs;
      Vector kx = (*k_) * x;
      axpy(-1.0, kx, r);
      if (nrm2(r) <= std::max(tol_, 1e-15) * nb) break;
      Vector dx = chol_->solve(r);
      axpy(1.0, dx, x);
    }
    return x;
  }

 private:
  const SparseMatrix* k_;
  double tol_;
  long max_iter_;
  std::optional<Cholesky> chol_;
};

/// Solve K x = rhs for SPD K. Residual contract: ||K x - rhs|| <= tol*||rhs||
/// (direct path typically far tighter).
inline Vector solve_spd(const SparseMatrix& k, const Vector& rhs, double tol, long max_iter,
                        SpdMethod method = SpdMethod::automatic,
                        int dense_threshold = kDefaultDenseThreshold) {
  SpdOperator op(k, tol, max_iter, method, dense_threshold);
  Vector x = op.solve(rhs);
  Vector r = k * x;
  axpy(-1.0, rhs, r);
  double nb = nrm2(rhs);
  double res = nrm2(r);
  if (nb > 0.0 && res > std::max(tol * nb, 1e-13 * nb))
    throw SolveError("solve_spd: residual above tolerance", res / nb, max_iter);
  return x;
}

/// Dual norm sqrt(g^T K^{-1} g) of a functional g against the SPD Gram K.
inline double dual_norm(const SparseMatrix& k, const Vector& g, double tol = 1e-13) {
  if (nrm2(g) == 0.0) return 0.0;
  SpdOperator op(k, tol);
  Vector x = op.solve(g);
  return std::sqrt(std::max(0.0, dot(g, x)));
}

inline double dual_norm(const SpdOperator& op, const Vector& g) {
  if (nrm2(g) == 0.0) return 0.0;
  Vector x = op.solve(g);
  return std::sqrt(std::max(0.0, dot(g, x)));
}

// ---------------------------------------------------------------------------
// saddle solver  [K  B^T; B  0] [u; p] = [ru; rp]
// ---------------------------------------------------------------------------

struct SaddleResult {
  Vector u, p;
  double momentum_residual = 0.0;  // ||K u + B^T p - ru|| / scale
  double div_residual = 0.0;       // ||B u - rp|| / scale
};

struct SaddleOptions {
  double tol = 1e-12;
  int dense_threshold = kDefaultDenseThreshold;
  bool force_uzawa = false;       // iterative Schur path regardless of size
  std::uint64_t uzawa_seed = 0;   // nonzero: random CG start (re-solve studies)
  long max_iter = 0;
};

/// Dense Schur complement S = B K^{-1} B^T (column by column through the SPD
/// operator). Shared by the saddle solver and the inf-sup computation.
inline DenseMatrix schur_complement(const SpdOperator& kop, const SparseMatrix& b) {
  const int np = b.rows();
  DenseMatrix s(np, np);
  Vector ej(std::size_t(b.cols()), 0.0);
  for (int j = 0; j < np; ++j) {
    Vector bj(std::size_t(b.cols()), 0.0);
    // column j of B^T
    Vector epj(std::size_t(np), 0.0);
    epj[std::size_t(j)] = 1.0;
    b.matvec_transpose(epj, bj);
    Vector y = kop.solve(bj);
    Vector col = b * y;
    for (int i = 0; i < np; ++i) s(i, j) = col[std::size_t(i)];
  }
  // symmetrize away factorization round-off so Cholesky sees an exact
  // symmetric matrix
  for (int i = 0; i < np; ++i)
    for (int j = i + 1; j < np; ++j) {
      double v = 0.5 * (s(i, j) + s(j, i));
      s(i, j) = v;
      s(j, i) = v;
    }
  return s;
}

class SaddleSolver {
 public:
  /// K SPD (n_u x n_u), Bt = B^T (n_u x n_p). `deflate` is the constraint-side
  /// functional fixing the additive nullspace of B^T (pressure mean vector);
  /// leave empty when B^T has full column rank.
  SaddleSolver(const SparseMatrix& k, const SparseMatrix& bt, Vector deflate = {},
               SaddleOptions opt = {})
      : opt_(opt),
        kop_(k, opt.tol * 0.01, opt.max_iter, SpdMethod::automatic, opt.dense_threshold),
        b_(bt.transposed()),
        bt_(&bt),
        mhat_(std::move(deflate)) {
    if (bt.rows() != k.rows()) throw std::invalid_argument("SaddleSolver: shape mismatch");
    np_ = bt.cols();
    if (!mhat_.empty() && int(mhat_.size()) != np_)
      throw std::invalid_argument("SaddleSolver: deflation vector length mismatch");
    double nm = nrm2(mhat_);
    if (!mhat_.empty() && nm > 0.0) scale(mhat_, 1.0 / nm);
    bool direct_schur = !opt.force_uzawa && np_ > 0 && np_ <= opt.dense_threshold;
    if (direct_schur) {
      s_ = schur_complement(kop_, b_);
      double ds = 0.0;
      for (int i = 0; i < np_; ++i) ds = std::max(ds, s_(i, i));
      DenseMatrix shift = s_;
      if (!mhat_.empty()) {
        // Any sigma > 0 yields the exact constrained solution; a moderate one
        // keeps the shifted matrix conditioned like S itself, so a genuinely
        // deficient direction (beyond the deflated one) still surfaces as a
        // tiny pivot instead of hiding under shift-induced round-off.
        sigma_ = std::max(ds, 1e-300);
        shift.add_outer(sigma_, mhat_);
      }
      // Pivot threshold 1e-12: round-off pivots of an exactly singular
      // direction sit near 1e-14 * scale, while the smallest legitimate
      // Schur eigenvalue (an inf-sup quantity) stays orders above it.
      schol_.emplace(shift, 1e-12);
      if (schol_->failed()) diagnose_rank(shift);
    }
  }

  int n_u() const { return kop_.n(); }
  int n_p() const { return np_; }
  const DenseMatrix& schur() const {
    if (np_ == 0 || !schol_) throw std::logic_error("SaddleSolver: no dense Schur path");
    return s_;
  }
  const SpdOperator& k_operator() const { return kop_; }

  SaddleResult solve(const Vector& ru, const Vector& rp) const {
    require_finite(ru, "SaddleSolver rhs_u");
    require_finite(rp, "SaddleSolver rhs_p");
    if (int(ru.size()) != kop_.n() || int(rp.size()) != np_)
      throw std::invalid_argument("SaddleSolver::solve: length mismatch");
    SaddleResult res;
    if (np_ == 0) {
      res.u = kop_.solve(ru);
      res.p.clear();
    } else {
      Vector y = kop_.solve(ru);
      Vector g = b_ * y;
      axpy(-1.0, rp, g);
      res.p = schol_ ? schol_->solve(g) : uzawa(g);
      Vector btp = (*bt_) * res.p;
      Vector ru2 = ru;
      axpy(-1.0, btp, ru2);
      res.u = kop_.solve(ru2);
    }
    // residual report
    Vector mr = kop_.matrix() * res.u;
    if (np_ > 0) axpy(1.0, (*bt_) * res.p, mr);
    axpy(-1.0, ru, mr);
    double su = std::max(nrm2(ru), 1.0);
    res.momentum_residual = nrm2(mr) / su;
    if (np_ > 0) {
      Vector dr = b_ * res.u;
      axpy(-1.0, rp, dr);
      res.div_residual = nrm2(dr) / su;
    }
    return res;
  }

 private:
  [[noreturn]] void diagnose_rank(const DenseMatrix& shifted) const {
    Vector evals;
    DenseMatrix evecs;
    sym_eig(shifted, evals, evecs);
    Vector mode(std::size_t(np_), 0.0);
    for (int i = 0; i < np_; ++i) mode[std::size_t(i)] = evecs(i, 0);
    throw RankDeficiencyError(
        "SaddleSolver: constraint block rank deficient (inf-sup breakdown), "
        "null pressure mode with eigenvalue " +
            fmt_g17(evals.empty() ? 0.0 : evals[0]),
        mode, evals.empty() ? 0.0 : evals[0]);
  }

  /// Projected CG on the Schur operator, kernel direction handled by explicit
  /// projection; start vector optionally seeded for re-solve studies.
  Vector uzawa(const Vector& g) const {
    const int np = np_;
    auto apply = [&](const Vector& q) {
      Vector btq = (*bt_) * q;
      Vector y = kop_.solve(btq);
      return b_ * y;
    };
    auto project = [&](Vector& v) {
      if (mhat_.empty()) return;
      // S has nullspace span(1); keep iterates mean-free in the euclidean sense
      double s = 0.0;
      for (double x : v) s += x;
      s /= double(np);
      for (double& x : v) x -= s;
    };
    Vector x(std::size_t(np), 0.0);
    if (opt_.uzawa_seed != 0) {
      Rng rng(opt_.uzawa_seed);
      x = rng.vec(std::size_t(np));
      project(x);
    }
    Vector r = apply(x);
    Vector gg = g;
    project(gg);
    for (int i = 0; i < np; ++i) r[std::size_t(i)] = gg[std::size_t(i)] - r[std::size_t(i)];
    project(r);
    double nb = std::max(nrm2(gg), 1e-300);
    Vector p = r, q;
    double rr = dot(r, r);
    long max_iter = opt_.max_iter > 0 ? opt_.max_iter : 40L * np + 400;
    for (long it = 0; it < max_iter && std::sqrt(rr) > opt_.tol * nb; ++it) {
      q = apply(p);
      project(q);
      double pq = dot(p, q);
      if (!(pq > 0.0))
        throw RankDeficiencyError("SaddleSolver: Schur operator not positive on mean-free space", p,
                                  pq);
      double alpha = rr / pq;
      axpy(alpha, p, x);
      axpy(-alpha, q, r);
      project(r);
      double rr2 = dot(r, r);
      double beta = rr2 / rr;
      rr = rr2;
      for (int i = 0; i < np; ++i) p[std::size_t(i)] = r[std::size_t(i)] + beta * p[std::size_t(i)];
    }
    if (std::sqrt(rr) > opt_.tol * nb)
      throw SolveError("SaddleSolver: Uzawa CG did not converge", std::sqrt(rr) / nb, max_iter);
    // report p in the deflated gauge
    if (!mhat_.empty()) {
      double num = dot(mhat_, x);
      double den = 0.0;
      for (double m : mhat_) den += m;
      if (std::fabs(den) > 1e-300) {
        double c = num / den;
        for (double& v : x) v -= c;
      }
    }
    return x;
  }

  SaddleOptions opt_;
  SpdOperator kop_;
  SparseMatrix b_;
  const SparseMatrix* bt_;
  Vector mhat_;
  int np_ = 0;
  DenseMatrix s_;
  double sigma_ = 0.0;
  std::optional<Cholesky> schol_;
};

/// One-shot form. Residual contract relative to ||(ru, rp)||.
inline SaddleResult solve_saddle(const SparseMatrix& k, const SparseMatrix& bt, const Vector& rhs_u,
                                 const Vector& rhs_p, double tol, Vector deflate = {}) {
  SaddleOptions opt;
  opt.tol = tol;
  SaddleSolver s(k, bt, std::move(deflate), opt);
  return s.solve(rhs_u, rhs_p);
}

// ---------------------------------------------------------------------------
// extreme generalized eigenpairs of  B x = theta K x  (K SPD, B sym. PSD)
// ---------------------------------------------------------------------------

enum class EigWhich { largest, smallest_positive };

struct GenEigResult {
  double value = 0.0;
  Vector vector;
  long iterations = 0;
  double residual = 0.0;  // ||B x - theta K x|| / (theta * ||K x||)
};

/// `largest`: largest theta with B x = theta K x.
/// `smallest_positive`: smallest positive lambda with K x = lambda B x,
/// computed as 1/theta_max (restriction to range(B) is implicit: theta_max
/// ignores the kernel of B). Power iteration on K^{-1}B in the K-inner
/// product, accelerated by a Rayleigh-Ritz projection of the accumulated
/// Krylov basis; deterministic start vector.
inline GenEigResult gen_eig_extreme(const SparseMatrix& kmat, const SparseMatrix& bmat,
                                    EigWhich which, double tol = 1e-12, long max_iter = 5000) {
  const int n = kmat.rows();
  if (kmat.cols() != n || bmat.rows() != n || bmat.cols() != n)
    throw std::invalid_argument("gen_eig_extreme: shape mismatch");
  if (bmat.nnz() == 0)
    throw std::invalid_argument("gen_eig_extreme: B is identically zero, no positive eigenvalue");
  SpdOperator kop(kmat, std::min(tol * 1e-2, 1e-13));

  const int m_max = 48;
  std::vector<Vector> basis;  // K-orthonormal
  auto k_dot = [&](const Vector& a, const Vector& b) { return kmat.bilin(a, b); };
  auto k_orthonormalize = [&](Vector& y) {
    for (int pass = 0; pass < 2; ++pass)
      for (const auto& v : basis) axpy(-k_dot(y, v), v, y);
    double ny = std::sqrt(std::max(0.0, k_dot(y, y)));
    if (ny < 1e-150) return false;
    scale(y, 1.0 / ny);
    return true;
  };

  Rng rng(0x5d1f00d5u);
  Vector x = rng.vec(std::size_t(n));
  {
    double nx = std::sqrt(std::max(k_dot(x, x), 1e-300));
    scale(x, 1.0 / nx);
  }
  basis.push_back(x);

  GenEigResult out;
  double theta = 0.0;
  Vector ritz = x;
  bool exhausted = false;
  for (long it = 1; it <= max_iter; ++it) {
    Vector y = kop.solve(bmat * basis.back());
    bool ok = k_orthonormalize(y);
    if (ok) basis.push_back(std::move(y));
    // Rayleigh-Ritz on the current basis
    int m = int(basis.size());
    DenseMatrix t(m, m);
    for (int i = 0; i < m; ++i)
      for (int j = i; j < m; ++j) {
        double v = bmat.bilin(basis[std::size_t(i)], basis[std::size_t(j)]);
        t(i, j) = v;
        t(j, i) = v;
      }
    Vector tev;
    DenseMatrix tvec;
    sym_eig(t, tev, tvec);
    theta = tev[std::size_t(m - 1)];
    ritz.assign(std::size_t(n), 0.0);
    for (int i = 0; i < m; ++i) axpy(tvec(i, m - 1), basis[std::size_t(i)], ritz);
    // residual ||B x - theta K x||
    Vector r = bmat * ritz;
    Vector kx = kmat * ritz;
    axpy(-theta, kx, r);
    double denom = std::max(std::fabs(theta) * nrm2(kx), 1e-300);
    out.residual = nrm2(r) / denom;
    out.iterations = it;
    if (theta > 0.0 && out.residual <= tol) break;
    if (!ok) {
      // Krylov space of K^{-1}B is exhausted: the Ritz pair is exact up to
      // round-off; a failure to converge here means B has no positive action
      if (theta > 0.0 && out.residual <= std::sqrt(tol)) break;
      if (exhausted)
        throw SolveError("gen_eig_extreme: no positive eigenvalue found", out.residual, it);
      exhausted = true;
      basis.clear();
      Vector f = rng.vec(std::size_t(n));
      double nf = std::sqrt(std::max(k_dot(f, f), 1e-300));
      scale(f, 1.0 / nf);
      basis.push_back(f);
      continue;
    }
    if (m >= m_max) {
      Vector seed = ritz;
      double ns = std::sqrt(std::max(k_dot(seed, seed), 1e-300));
      scale(seed, 1.0 / ns);
      basis.clear();
      basis.push_back(std::move(seed));
    }
  }
  if (!(theta > 0.0))
    throw SolveError("gen_eig_extreme: no positive eigenvalue found", out.residual, out.iterations);
  if (theta > 0.0 && out.residual > std::sqrt(tol))
    throw SolveError("gen_eig_extreme: did not converge", out.residual, out.iterations);
  double nx = std::sqrt(std::max(kmat.quad(ritz), 1e-300));
  scale(ritz, 1.0 / nx);
  out.vector = std::move(ritz);
  out.value = (which == EigWhich::largest) ? theta : 1.0 / theta;
  return out;
}

}  // namespace shvi
