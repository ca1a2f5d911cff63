#pragma once

// Counter-based random numbers: every draw is a pure function of
// (seed, stream, counter), so results do not depend on thread scheduling.

#include <cmath>
#include <cstdint>
#include <numbers>

#include "gmcvx/matcore.hpp"

namespace gmcvx {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

class CounterRng {
 public:
  explicit CounterRng(std::uint64_t seed, std::uint64_t stream = 0)
      : key_(splitmix64(seed ^ splitmix64(stream + 0x632be59bd9b4e019ULL))) {}

  std::uint64_t next_u64() { return splitmix64(key_ ^ splitmix64(counter_++)); }

  /// Uniform in the open interval (0, 1).
  double uniform() { return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53; }

  /// Standard normal by Box-Muller; the second value of each pair is cached.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double t = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(t);
    has_spare_ = true;
    return r * std::cos(t);
  }

  Vector normal_vector(Index n) {
    Vector v(n);
    for (Index k = 0; k < n; ++k) v(k) = normal();
    return v;
  }

  /// Uniform direction on the unit sphere in R^n.
  Vector unit_vector(Index n) {
    for (;;) {
      Vector v = normal_vector(n);
      const double nv = v.norm();
      if (nv > 1e-12) return v / nv;
    }
  }

  std::uint64_t counter() const { return counter_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

/// Haar-distributed orthogonal matrix (QR of a Gaussian matrix with the
/// sign of R's diagonal folded back in).
inline Matrix random_orthogonal(Index n, CounterRng& rng) {
  Matrix g(n, n);
  for (Index j = 0; j < n; ++j) {
    for (Index i = 0; i < n; ++i) g(i, j) = rng.normal();
  }
  Eigen::HouseholderQR<Matrix> qr(g);
  Matrix q = qr.householderQ() * Matrix::Identity(n, n);
  const Matrix r = qr.matrixQR();
  for (Index k = 0; k < n; ++k) {
    if (r(k, k) < 0) q.col(k) = -q.col(k);
  }
  return q;
}

/// Random PSD matrix G G^T / n with G of size n x rank.
inline SymMat random_psd(Index n, CounterRng& rng, Index rank = -1) {
  if (rank < 0) rank = n;
  Matrix g(n, rank);
  for (Index j = 0; j < rank; ++j) {
    for (Index i = 0; i < n; ++i) g(i, j) = rng.normal();
  }
  return SymMat::from_upper(g * g.transpose() / static_cast<double>(n));
}

}  // namespace gmcvx
