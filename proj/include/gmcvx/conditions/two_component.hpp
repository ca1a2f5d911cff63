#pragma once

// n = 2: condition (3) with a prescribed cross-covariance Theta.

#include "gmcvx/psdfeas.hpp"

namespace gmcvx {

/// Gamma = [[Sigma_1, Theta], [Theta^T, Sigma_2]].
inline Matrix gamma_from_theta(const MixtureProblem& prob, const Matrix& theta) {
  const Index d = prob.d;
  Matrix g(2 * d, 2 * d);
  g.topLeftCorner(d, d) = prob.cov(0).mat();
  g.bottomRightCorner(d, d) = prob.cov(1).mat();
  g.topRightCorner(d, d) = theta;
  g.bottomLeftCorner(d, d) = theta.transpose();
  return g;
}

/// Checks that the 2d x 2d block matrix is PSD (equivalently
/// (x' Theta y)^2 <= x' Sigma_1 x y' Sigma_2 y) and that
/// Sigma <= p1^2 Sigma_1 + p2^2 Sigma_2 + p1 p2 (Theta + Theta^T).
inline Verdict check_n2_theta(const MixtureProblem& prob, const Matrix& theta,
                              double eps = Tolerances{}.eps_psd) {
  if (prob.n() != 2) throw Error(ErrorCode::DimensionMismatch, "check_n2_theta needs n = 2");
  if (theta.rows() != prob.d || theta.cols() != prob.d) {
    throw Error(ErrorCode::DimensionMismatch, "Theta must be d x d");
  }
  const Matrix g = gamma_from_theta(prob, theta);
  const GammaCheck chk = check_gamma(prob, g, ConeKind::FullPSD, eps);
  Verdict v;
  v.margin = chk.margin();
  v.diagnostics["block_min_eigenvalue"] = chk.cone_min_eigenvalue;
  v.diagnostics["slack_min_eigenvalue"] = chk.slack_min_eigenvalue;
  v.witness = GammaWitness{g, prob.d};
  v.status = chk.ok ? Status::Holds : Status::Fails;
  v.boundary = std::abs(v.margin) <= -chk.threshold;
  if (!chk.ok) v.notes.push_back(chk.reason);
  return v;
}

}  // namespace gmcvx
