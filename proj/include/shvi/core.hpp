#pragma once

// Shared scalar/vector utilities: dense vectors are plain std::vector<double>,
// reductions run in fixed (index) order so results are bit-reproducible.

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace shvi {

using Vector = std::vector<double>;

// ---------------------------------------------------------------------------
// errors
// ---------------------------------------------------------------------------

/// Iterative or factorization failure; carries the achieved residual.
struct SolveError : std::runtime_error {
  double residual;
  long iterations;
  SolveError(const std::string& msg, double res, long iters)
      : std::runtime_error(msg), residual(res), iterations(iters) {}
};

/// Singular constraint block (inf-sup breakdown); carries the null mode.
struct RankDeficiencyError : std::runtime_error {
  Vector null_mode;
  double eigenvalue;
  RankDeficiencyError(const std::string& msg, Vector mode, double eig)
      : std::runtime_error(msg), null_mode(std::move(mode)), eigenvalue(eig) {}
};

// ---------------------------------------------------------------------------
// vector kernels (fixed summation order)
// ---------------------------------------------------------------------------

inline double dot(const Vector& a, const Vector& b) {
  if (a.size() != b.size()) throw std::invalid_argument("dot: length mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double nrm2(const Vector& a) { return std::sqrt(dot(a, a)); }

inline double nrm_inf(const Vector& a) {
  double m = 0.0;
  for (double v : a) m = std::max(m, std::fabs(v));
  return m;
}

inline void axpy(double alpha, const Vector& x, Vector& y) {
  if (x.size() != y.size()) throw std::invalid_argument("axpy: length mismatch");
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += alpha * x[i];
}

inline void scale(Vector& x, double alpha) {
  for (double& v : x) v *= alpha;
}

inline Vector scaled(Vector x, double alpha) {
  scale(x, alpha);
  return x;
}

inline bool all_finite(const Vector& a) {
  for (double v : a)
    if (!std::isfinite(v)) return false;
  return true;
}

inline void require_finite(const Vector& a, const char* what) {
  if (!all_finite(a)) throw std::invalid_argument(std::string(what) + ": non-finite entry");
}

// ---------------------------------------------------------------------------
// deterministic rng (splitmix64); std::distributions are avoided on purpose,
// their output is implementation defined
// ---------------------------------------------------------------------------

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  /// uniform in [0,1)
  double uniform() { return double(next_u64() >> 11) * 0x1.0p-53; }

  /// uniform in [-1,1)
  double sym() { return 2.0 * uniform() - 1.0; }

  Vector vec(std::size_t n) {
    Vector v(n);
    for (auto& x : v) x = sym();
    return v;
  }

 private:
  std::uint64_t state_;
};

// ---------------------------------------------------------------------------
// input digest (fnv-1a over raw bytes) for report reproducibility stamps
// ---------------------------------------------------------------------------

class Digest {
 public:
  Digest& feed_bytes(const void* p, std::size_t n) {
    const unsigned char* b = static_cast<const unsigned char*>(p);
    for (std::size_t i = 0; i < n; ++i) {
      h_ ^= b[i];
      h_ *= 0x100000001b3ull;
    }
    return *this;
  }
  Digest& feed(double v) { return feed_bytes(&v, sizeof v); }
  Digest& feed(std::int64_t v) { return feed_bytes(&v, sizeof v); }
  Digest& feed(int v) { return feed(std::int64_t(v)); }
  Digest& feed(const std::string& s) { return feed_bytes(s.data(), s.size()); }
  Digest& feed(const Vector& v) {
    for (double x : v) feed(x);
    return *this;
  }
  std::string hex() const {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h_));
    return buf;
  }

 private:
  std::uint64_t h_ = 0xcbf29ce484222325ull;
};

/// Shortest-roundtrip-style fixed formatting: 17 significant digits, C locale.
inline std::string fmt_g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace shvi
