#pragma once

// Small dense kernels backing the direct solver paths: row-major matrix,
// Cholesky factorization, cyclic Jacobi symmetric eigensolver. All loops are
// deterministic; no pivoting heuristics with data-dependent tie breaks.

#include "shvi/sparse.hpp"

namespace shvi {

class DenseMatrix {
 public:
  DenseMatrix() = default;
  DenseMatrix(int rows, int cols, double fill = 0.0)
      : rows_(rows), cols_(cols), a_(std::size_t(rows) * std::size_t(cols), fill) {
    if (rows < 0 || cols < 0) throw std::invalid_argument("DenseMatrix: negative shape");
  }

  int rows() const { return rows_; }
  int cols() const { return cols_; }

  double& operator()(int i, int j) { return a_[std::size_t(i) * std::size_t(cols_) + std::size_t(j)]; }
  double operator()(int i, int j) const {
    return a_[std::size_t(i) * std::size_t(cols_) + std::size_t(j)];
  }

  static DenseMatrix identity(int n) {
    DenseMatrix m(n, n);
    for (int i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

  Vector matvec(const Vector& x) const {
    if (int(x.size()) != cols_) throw std::invalid_argument("DenseMatrix::matvec: length mismatch");
    Vector y(std::size_t(rows_), 0.0);
    for (int i = 0; i < rows_; ++i) {
      double s = 0.0;
      for (int j = 0; j < cols_; ++j) s += (*this)(i, j) * x[std::size_t(j)];
      y[std::size_t(i)] = s;
    }
    return y;
  }

  DenseMatrix transposed() const {
    DenseMatrix t(cols_, rows_);
    for (int i = 0; i < rows_; ++i)
      for (int j = 0; j < cols_; ++j) t(j, i) = (*this)(i, j);
    return t;
  }

  double max_abs() const {
    double m = 0.0;
    for (double v : a_) m = std::max(m, std::fabs(v));
    return m;
  }

  /// Rank-one update A += alpha * v v^T.
  void add_outer(double alpha, const Vector& v) {
    if (int(v.size()) != rows_ || rows_ != cols_)
      throw std::invalid_argument("add_outer: shape mismatch");
    for (int i = 0; i < rows_; ++i)
      for (int j = 0; j < cols_; ++j) (*this)(i, j) += alpha * v[std::size_t(i)] * v[std::size_t(j)];
  }

 private:
  int rows_ = 0, cols_ = 0;
  std::vector<double> a_;
};

inline DenseMatrix to_dense(const SparseMatrix& s) {
  DenseMatrix d(s.rows(), s.cols());
  const auto& rp = s.row_ptr();
  const auto& ci = s.col_idx();
  const auto& v = s.values();
  for (int r = 0; r < s.rows(); ++r)
    for (long k = rp[std::size_t(r)]; k < rp[std::size_t(r) + 1]; ++k)
      d(r, ci[std::size_t(k)]) = v[std::size_t(k)];
  return d;
}

inline SparseMatrix to_sparse(const DenseMatrix& d) {
  SparseMatrix s(d.rows(), d.cols());
  for (int i = 0; i < d.rows(); ++i)
    for (int j = 0; j < d.cols(); ++j)
      if (d(i, j) != 0.0) s.add(i, j, d(i, j));
  s.finalize();
  return s;
}

// ---------------------------------------------------------------------------
// Cholesky (SPD, lower triangular), no pivoting
// ---------------------------------------------------------------------------

class Cholesky {
 public:
  /// Factor A = L L^T. On a nonpositive pivot the object reports failed();
  /// callers decide whether that is an error or a rank diagnosis. `rel_tol`
  /// is the pivot acceptance threshold relative to max|A|.
  explicit Cholesky(const DenseMatrix& a, double rel_tol = 1e-15) : n_(a.rows()), l_(a) {
    if (a.rows() != a.cols()) throw std::invalid_argument("Cholesky: not square");
    double scale = a.max_abs();
    for (int j = 0; j < n_; ++j) {
      double d = l_(j, j);
      for (int k = 0; k < j; ++k) d -= l_(j, k) * l_(j, k);
      if (!(d > scale * rel_tol) || !std::isfinite(d)) {
        failed_ = true;
        fail_index_ = j;
        return;
      }
      double lj = std::sqrt(d);
      l_(j, j) = lj;
      double inv = 1.0 / lj;
      for (int i = j + 1; i < n_; ++i) {
        double s = l_(i, j);
        for (int k = 0; k < j; ++k) s -= l_(i, k) * l_(j, k);
        l_(i, j) = s * inv;
      }
    }
  }

  bool failed() const { return failed_; }
  int fail_index() const { return fail_index_; }
  int n() const { return n_; }

  void solve_inplace(Vector& b) const {
    if (failed_) throw SolveError("Cholesky: factorization failed", 0.0, fail_index_);
    if (int(b.size()) != n_) throw std::invalid_argument("Cholesky::solve: length mismatch");
    for (int i = 0; i < n_; ++i) {
      double s = b[std::size_t(i)];
      for (int k = 0; k < i; ++k) s -= l_(i, k) * b[std::size_t(k)];
      b[std::size_t(i)] = s / l_(i, i);
    }
    for (int i = n_ - 1; i >= 0; --i) {
      double s = b[std::size_t(i)];
      for (int k = i + 1; k < n_; ++k) s -= l_(k, i) * b[std::size_t(k)];
      b[std::size_t(i)] = s / l_(i, i);
    }
  }

  Vector solve(Vector b) const {
    solve_inplace(b);
    return b;
  }

 private:
  int n_ = 0;
  bool failed_ = false;
  int fail_index_ = -1;
  DenseMatrix l_;
};

// ---------------------------------------------------------------------------
// cyclic Jacobi eigensolver for symmetric matrices (ascending eigenvalues)
// ---------------------------------------------------------------------------

inline void sym_eig(DenseMatrix a, Vector& evals, DenseMatrix& evecs) {
  int n = a.rows();
  if (a.cols() != n) throw std::invalid_argument("sym_eig: not square");
  evecs = DenseMatrix::identity(n);
  if (n == 0) {
    evals.clear();
    return;
  }
  auto off = [&]() {
    double s = 0.0;
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j) s += a(i, j) * a(i, j);
    return std::sqrt(2.0 * s);
  };
  double scale = std::max(a.max_abs(), 1e-300);
  for (int sweep = 0; sweep < 64 && off() > 1e-14 * scale * n; ++sweep) {
    for (int p = 0; p < n - 1; ++p) {
      for (int q = p + 1; q < n; ++q) {
        double apq = a(p, q);
        if (std::fabs(apq) <= 1e-18 * scale) continue;
        double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        double t = (theta >= 0 ? 1.0 : -1.0) / (std::fabs(theta) + std::sqrt(theta * theta + 1.0));
        double c = 1.0 / std::sqrt(t * t + 1.0);
        double s = t * c;
        for (int k = 0; k < n; ++k) {
          double akp = a(k, p), akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (int k = 0; k < n; ++k) {
          double apk = a(p, k), aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        for (int k = 0; k < n; ++k) {
          double vkp = evecs(k, p), vkq = evecs(k, q);
          evecs(k, p) = c * vkp - s * vkq;
          evecs(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }
  // sort ascending, permute eigenvector columns accordingly
  std::vector<int> order(std::size_t(n), 0);
  for (int i = 0; i < n; ++i) order[std::size_t(i)] = i;
  std::sort(order.begin(), order.end(), [&](int i, int j) { return a(i, i) < a(j, j); });
  evals.assign(std::size_t(n), 0.0);
  DenseMatrix v(n, n);
  for (int j = 0; j < n; ++j) {
    evals[std::size_t(j)] = a(order[std::size_t(j)], order[std::size_t(j)]);
    for (int i = 0; i < n; ++i) v(i, j) = evecs(i, order[std::size_t(j)]);
  }
  evecs = v;
}

}  // namespace shvi
