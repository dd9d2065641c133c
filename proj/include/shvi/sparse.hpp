#pragma once

// Compressed sparse row matrix with a triplet build phase. Desk scale: the
// matvec loop order is part of the determinism contract, do not reorder.

#include <algorithm>
#include <tuple>

#include "shvi/core.hpp"

namespace shvi {

class SparseMatrix {
 public:
  SparseMatrix() = default;
  SparseMatrix(int rows, int cols) : rows_(rows), cols_(cols) {
    if (rows < 0 || cols < 0) throw std::invalid_argument("SparseMatrix: negative shape");
  }

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  long nnz() const { return long(val_.size()); }
  bool finalized() const { return finalized_; }

  /// Accumulate a triplet; duplicates are summed at finalize().
  void add(int i, int j, double v) {
    if (finalized_) throw std::logic_error("SparseMatrix::add after finalize");
    if (i < 0 || i >= rows_ || j < 0 || j >= cols_)
      throw std::out_of_range("SparseMatrix::add: index out of range");
    if (!std::isfinite(v)) throw std::invalid_argument("SparseMatrix::add: non-finite value");
    coo_.emplace_back(i, j, v);
  }

  /// Sort, combine duplicates, drop exact zeros, build CSR.
  void finalize() {
    if (finalized_) return;
    std::sort(coo_.begin(), coo_.end(), [](const Trip& a, const Trip& b) {
      if (std::get<0>(a) != std::get<0>(b)) return std::get<0>(a) < std::get<0>(b);
      return std::get<1>(a) < std::get<1>(b);
    });
    row_ptr_.assign(std::size_t(rows_) + 1, 0);
    col_.clear();
    val_.clear();
    std::size_t i = 0;
    while (i < coo_.size()) {
      int r = std::get<0>(coo_[i]);
      int c = std::get<1>(coo_[i]);
      double s = 0.0;
      while (i < coo_.size() && std::get<0>(coo_[i]) == r && std::get<1>(coo_[i]) == c) {
        s += std::get<2>(coo_[i]);
        ++i;
      }
      if (s != 0.0) {
        col_.push_back(c);
        val_.push_back(s);
        ++row_ptr_[std::size_t(r) + 1];
      }
    }
    for (int r = 0; r < rows_; ++r) row_ptr_[std::size_t(r) + 1] += row_ptr_[std::size_t(r)];
    coo_.clear();
    coo_.shrink_to_fit();
    finalized_ = true;
  }

  void matvec(const Vector& x, Vector& y) const {
    check_final();
    if (int(x.size()) != cols_) throw std::invalid_argument("matvec: length mismatch");
    y.assign(std::size_t(rows_), 0.0);
    for (int r = 0; r < rows_; ++r) {
      double s = 0.0;
      for (long k = row_ptr_[std::size_t(r)]; k < row_ptr_[std::size_t(r) + 1]; ++k)
        s += val_[std::size_t(k)] * x[std::size_t(col_[std::size_t(k)])];
      y[std::size_t(r)] = s;
    }
  }

  Vector operator*(const Vector& x) const {
    Vector y;
    matvec(x, y);
    return y;
  }

  void matvec_transpose(const Vector& x, Vector& y) const {
    check_final();
    if (int(x.size()) != rows_) throw std::invalid_argument("matvec_transpose: length mismatch");
    y.assign(std::size_t(cols_), 0.0);
    for (int r = 0; r < rows_; ++r) {
      double xr = x[std::size_t(r)];
      if (xr == 0.0) continue;
      for (long k = row_ptr_[std::size_t(r)]; k < row_ptr_[std::size_t(r) + 1]; ++k)
        y[std::size_t(col_[std::size_t(k)])] += val_[std::size_t(k)] * xr;
    }
  }

  Vector mul_transpose(const Vector& x) const {
    Vector y;
    matvec_transpose(x, y);
    return y;
  }

  /// x^T A x, fixed traversal order.
  double quad(const Vector& x) const { return bilin(x, x); }

  /// x^T A y
  double bilin(const Vector& x, const Vector& y) const {
    check_final();
    if (int(x.size()) != rows_ || int(y.size()) != cols_)
      throw std::invalid_argument("bilin: length mismatch");
    double s = 0.0;
    for (int r = 0; r < rows_; ++r) {
      double t = 0.0;
      for (long k = row_ptr_[std::size_t(r)]; k < row_ptr_[std::size_t(r) + 1]; ++k)
        t += val_[std::size_t(k)] * y[std::size_t(col_[std::size_t(k)])];
      s += x[std::size_t(r)] * t;
    }
    return s;
  }

  SparseMatrix transposed() const {
    check_final();
    SparseMatrix t(cols_, rows_);
    for (int r = 0; r < rows_; ++r)
      for (long k = row_ptr_[std::size_t(r)]; k < row_ptr_[std::size_t(r) + 1]; ++k)
        t.add(col_[std::size_t(k)], r, val_[std::size_t(k)]);
    t.finalize();
    return t;
  }

  SparseMatrix scaled(double a) const {
    check_final();
    SparseMatrix s(rows_, cols_);
    for (int r = 0; r < rows_; ++r)
      for (long k = row_ptr_[std::size_t(r)]; k < row_ptr_[std::size_t(r) + 1]; ++k)
        s.add(r, col_[std::size_t(k)], a * val_[std::size_t(k)]);
    s.finalize();
    return s;
  }

  /// A + alpha * B (same shape).
  SparseMatrix plus(const SparseMatrix& b, double alpha = 1.0) const {
    check_final();
    b.check_final();
    if (rows_ != b.rows_ || cols_ != b.cols_) throw std::invalid_argument("plus: shape mismatch");
    SparseMatrix s(rows_, cols_);
    for (int r = 0; r < rows_; ++r)
      for (long k = row_ptr_[std::size_t(r)]; k < row_ptr_[std::size_t(r) + 1]; ++k)
        s.add(r, col_[std::size_t(k)], val_[std::size_t(k)]);
    for (int r = 0; r < b.rows_; ++r)
      for (long k = b.row_ptr_[std::size_t(r)]; k < b.row_ptr_[std::size_t(r) + 1]; ++k)
        s.add(r, b.col_[std::size_t(k)], alpha * b.val_[std::size_t(k)]);
    s.finalize();
    return s;
  }

  static SparseMatrix identity(int n) {
    SparseMatrix s(n, n);
    for (int i = 0; i < n; ++i) s.add(i, i, 1.0);
    s.finalize();
    return s;
  }

  static SparseMatrix from_diagonal(const Vector& d) {
    SparseMatrix s(int(d.size()), int(d.size()));
    for (int i = 0; i < int(d.size()); ++i) s.add(i, i, d[std::size_t(i)]);
    s.finalize();
    return s;
  }

  Vector diagonal() const {
    check_final();
    if (rows_ != cols_) throw std::invalid_argument("diagonal: not square");
    Vector d(std::size_t(rows_), 0.0);
    for (int r = 0; r < rows_; ++r)
      for (long k = row_ptr_[std::size_t(r)]; k < row_ptr_[std::size_t(r) + 1]; ++k)
        if (col_[std::size_t(k)] == r) d[std::size_t(r)] = val_[std::size_t(k)];
    return d;
  }

  double max_abs() const {
    check_final();
    double m = 0.0;
    for (double v : val_) m = std::max(m, std::fabs(v));
    return m;
  }

  bool is_symmetric(double tol) const {
    check_final();
    if (rows_ != cols_) return false;
    SparseMatrix t = transposed();
    if (t.nnz() != nnz()) return false;
    for (std::size_t k = 0; k < val_.size(); ++k) {
      if (t.col_[k] != col_[k]) return false;
      if (std::fabs(t.val_[k] - val_[k]) > tol) return false;
    }
    return true;
  }

  /// Rows/cols picked by index lists (values reindexed to list positions).
  SparseMatrix submatrix(const std::vector<int>& row_ids, const std::vector<int>& col_ids) const {
    check_final();
    std::vector<int> rmap(std::size_t(rows_), -1), cmap(std::size_t(cols_), -1);
    for (std::size_t i = 0; i < row_ids.size(); ++i) rmap[std::size_t(row_ids[i])] = int(i);
    for (std::size_t j = 0; j < col_ids.size(); ++j) cmap[std::size_t(col_ids[j])] = int(j);
    SparseMatrix s(int(row_ids.size()), int(col_ids.size()));
    for (int r = 0; r < rows_; ++r) {
      int rr = rmap[std::size_t(r)];
      if (rr < 0) continue;
      for (long k = row_ptr_[std::size_t(r)]; k < row_ptr_[std::size_t(r) + 1]; ++k) {
        int cc = cmap[std::size_t(col_[std::size_t(k)])];
        if (cc >= 0) s.add(rr, cc, val_[std::size_t(k)]);
      }
    }
    s.finalize();
    return s;
  }

  // raw CSR access for kernels that need it
  const std::vector<long>& row_ptr() const { check_final(); return row_ptr_; }
  const std::vector<int>& col_idx() const { check_final(); return col_; }
  const std::vector<double>& values() const { check_final(); return val_; }

 private:
  using Trip = std::tuple<int, int, double>;
  void check_final() const {
    if (!finalized_) throw std::logic_error("SparseMatrix: finalize() required");
  }
  int rows_ = 0, cols_ = 0;
  bool finalized_ = false;
  std::vector<Trip> coo_;
  std::vector<long> row_ptr_;
  std::vector<int> col_;
  std::vector<double> val_;
};

}  // namespace shvi
