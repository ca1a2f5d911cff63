#pragma once

// The worked examples: two 2 x 2 mixtures with equal weights and a
// three-component one, with their explicit couplings.

#include <cmath>
#include <vector>

#include "gmcvx/problem.hpp"

namespace gmcvx::gallery {

inline SymMat sym2(double a, double b, double c) {
  Matrix m(2, 2);
  m << a, b, b, c;
  return SymMat::from_upper(m);
}

inline const double kSqrt2 = std::sqrt(2.0);

// ---- Example 1: coupling without shared correlation ----

/// Sigma_1 = 4 I, Sigma_2 = diag(4, 4 lambda^2),
/// Sigma = [[2, 1 + lambda], [1 + lambda, 1 + lambda^2]], p = (1/2, 1/2).
inline MixtureProblem example1(double lambda) {
  return make_problem(sym2(2.0, 1.0 + lambda, 1.0 + lambda * lambda),
                      {sym2(4.0, 0.0, 4.0), sym2(4.0, 0.0, 4.0 * lambda * lambda)}, {0.5, 0.5});
}

/// 4 [[1,0,0,l],[0,1,1,0],[0,1,1,0],[l,0,0,l^2]].
inline Matrix example1_gamma(double lambda) {
  Matrix g(4, 4);
  g << 1, 0, 0, lambda, 0, 1, 1, 0, 0, 1, 1, 0, lambda, 0, 0, lambda * lambda;
  return 4.0 * g;
}

/// The two M families left after the rescaling argument: [[1, x], [0, 1]]
/// and [[0, 1], [1, x]].
inline Matrix example1_family(double x, bool swapped) {
  Matrix m(2, 2);
  if (swapped) m << 0, 1, 1, x;
  else m << 1, x, 0, 1;
  return m;
}

// ---- Example 2: equal diagonal targets ----

/// Sigma_1 = diag(8, 4), Sigma_2 = diag(4, 8), Sigma = [[a, b], [b, a]].
inline MixtureProblem example2(double a, double b) {
  return make_problem(sym2(a, b, a), {sym2(8.0, 0.0, 4.0), sym2(4.0, 0.0, 8.0)}, {0.5, 0.5});
}

inline double example2_sqrt_term(double a) { return std::sqrt(std::max(0.0, 1.0 - (a - 3.0) * (a - 3.0) / 8.0)); }

/// Closed-form region where the convex order holds.
inline bool example2_region(double a, double b) {
  const double ab = std::abs(b);
  if (a < 0.0) return false;
  if (a <= 3.0) return ab <= a;
  if (a <= 17.0 / 3.0) return ab <= 6.0 - a;
  if (a <= 3.0 + 2.0 * kSqrt2) return ab <= example2_sqrt_term(a);
  return false;
}

/// Theta = [[2(a-3), 8 s], [-4 s, 2(a-3)]] with s = sqrt(1 - (a-3)^2/8).
inline Matrix example2_theta(double a) {
  const double s = example2_sqrt_term(a);
  Matrix t(2, 2);
  t << 2.0 * (a - 3.0), 8.0 * s, -4.0 * s, 2.0 * (a - 3.0);
  return t;
}

// ---- Example 3: three components, pairwise versus full ----

inline MixtureProblem example3(const SymMat& target) {
  return make_problem(target, {sym2(18.0, 0.0, 9.0), sym2(9.0, 0.0, 9.0), sym2(9.0, 0.0, 18.0)},
                      {1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0});
}

inline MixtureProblem example3_diag(double s11, double s22) { return example3(sym2(s11, 0.0, s22)); }

inline double example3_s(double a) { return example2_sqrt_term(a); }

inline double example3_f(double a) {
  return std::sqrt((a + 2.0 * kSqrt2 - 3.0) / (4.0 * kSqrt2));
}

inline Matrix example3_theta(double a) {
  const double s = example3_s(a);
  Matrix t(2, 2);
  t << 4.5 * (a - 3.0), 18.0 * s, -9.0 * s, 4.5 * (a - 3.0);
  return t;
}

inline Matrix example3_theta_tilde(double x) {
  const double c = std::sqrt(std::max(0.0, 1.0 - x * x));
  Matrix t(2, 2);
  t << 9.0 * kSqrt2 * x, 9.0 * kSqrt2 * c, -9.0 * c, 9.0 * x;
  return t;
}

inline Matrix example3_theta_hat(double x) {
  const double c = std::sqrt(std::max(0.0, 1.0 - x * x));
  Matrix t(2, 2);
  t << 9.0 * x, -9.0 * c, 9.0 * kSqrt2 * c, 9.0 * kSqrt2 * x;
  return t;
}

/// [[S1, Tt, T], [Tt^T, S2, Th^T], [T^T, Th, S3]].
inline Matrix example3_gamma(double a, double x) {
  const MixtureProblem p = example3_diag(1.0, 1.0);
  Matrix g(6, 6);
  g.block(0, 0, 2, 2) = p.cov(0).mat();
  g.block(2, 2, 2, 2) = p.cov(1).mat();
  g.block(4, 4, 2, 2) = p.cov(2).mat();
  const Matrix tt = example3_theta_tilde(x);
  const Matrix t = example3_theta(a);
  const Matrix th = example3_theta_hat(x);
  g.block(0, 2, 2, 2) = tt;
  g.block(2, 0, 2, 2) = tt.transpose();
  g.block(0, 4, 2, 2) = t;
  g.block(4, 0, 2, 2) = t.transpose();
  g.block(2, 4, 2, 2) = th.transpose();
  g.block(4, 2, 2, 2) = th;
  return g;
}

/// Sigma(a, x): diagonal 1 + a + 2(1 + sqrt 2) x, off-diagonal
/// s(a) + 2(sqrt 2 - 1) sqrt(1 - x^2).
inline SymMat example3_target(double a, double x) {
  const double diag = 1.0 + a + 2.0 * (1.0 + kSqrt2) * x;
  const double off = example3_s(a) + 2.0 * (kSqrt2 - 1.0) * std::sqrt(std::max(0.0, 1.0 - x * x));
  return sym2(diag, off, diag);
}

}  // namespace gmcvx::gallery
