#pragma once

// Factor pairs (S1, S2) with S1 S1^T = Sigma1, S2 S2^T = Sigma2; the Gaussian
// coupling with cross-covariance S1 S2^T is then admissible.

#include <utility>

#include "gmcvx/matcore.hpp"

namespace gmcvx {

namespace detail {

inline bool nonsingular(const SymMat& s, const Tolerances& tol) {
  const SpectralDecomp e = eigen_sym(s);
  return e.max_eigenvalue() > 0.0 && e.min_eigenvalue() > tol.rank_tol * e.max_eigenvalue() * 1e2;
}

inline std::pair<Matrix, Matrix> wasserstein_nonsingular_first(const SymMat& s1, const SymMat& s2,
                                                               const Tolerances& tol) {
  const SymMat r1 = sqrt_psd(s1, tol.eps_psd);
  const SymMat r1inv = pinv_sqrt_psd(s1, tol);
  const SymMat mid = sqrt_psd(congruence(r1.mat(), s2), tol.eps_psd);
  return {r1.mat(), r1inv.mat() * mid.mat()};
}

}  // namespace detail

/// Quadratic-Wasserstein optimal coupling factors. Uses Sigma1 as the
/// reference when it is nonsingular, else Sigma2; both singular throws.
inline std::pair<Matrix, Matrix> wasserstein_blocks(const SymMat& s1, const SymMat& s2,
                                                    const Tolerances& tol = {}) {
  if (s1.dim() != s2.dim()) throw Error(ErrorCode::DimensionMismatch, "wasserstein_blocks");
  if (detail::nonsingular(s1, tol)) return detail::wasserstein_nonsingular_first(s1, s2, tol);
  if (detail::nonsingular(s2, tol)) {
    auto [t2, t1] = detail::wasserstein_nonsingular_first(s2, s1, tol);
    return {t1, t2};
  }
  throw Error(ErrorCode::BothSingular, "neither covariance is invertible");
}

/// Knothe-Rosenblatt (lower-triangular) factors.
inline std::pair<Matrix, Matrix> knothe_blocks(const SymMat& s1, const SymMat& s2,
                                               const Tolerances& tol = {}) {
  if (s1.dim() != s2.dim()) throw Error(ErrorCode::DimensionMismatch, "knothe_blocks");
  return {cholesky_lower(s1, tol.eps_psd), cholesky_lower(s2, tol.eps_psd)};
}

}  // namespace gmcvx
