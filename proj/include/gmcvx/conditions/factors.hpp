#pragma once

// From a coupling Gamma to orthogonal factors: with Theta_i the rows of
// Gamma^{1/2} belonging to component i (zero-padded to q columns) and
// sigma_i = Sigma_i^{1/2} padded likewise, sigma_i O_i = Theta_i, hence
// (sum p_i sigma_i O_i)(sum p_i sigma_i O_i)^T = A Gamma A^T >= Sigma.

#include <vector>

#include "gmcvx/psdfeas.hpp"

namespace gmcvx {

struct OrthogonalFactors {
  std::vector<Matrix> o;             // q x q each
  double orthogonality_error = 0.0;  // max_i ||O_i O_i^T - I||_F
  double min_eigenvalue = 0.0;       // lambda_min(F F^T - Sigma)
  bool ok = false;
};

inline OrthogonalFactors orthogonal_factors_from_gamma(const MixtureProblem& prob, const GammaWitness& gw,
                                                       Index q, const Tolerances& tol = {}) {
  const Index d = prob.d;
  const Index n = prob.n();
  if (q < n * d) throw Error(ErrorCode::DimensionMismatch, "q must be at least n d");
  if (gw.gamma.rows() != n * d) throw Error(ErrorCode::DimensionMismatch, "Gamma shape");
  const Matrix g = enforce_blocks(prob, gw.gamma);
  const Matrix root = sqrt_psd(SymMat::from_upper(g), 10 * tol.eps_psd).mat();

  OrthogonalFactors out;
  Matrix f = Matrix::Zero(d, q);
  for (Index i = 0; i < n; ++i) {
    Matrix theta = Matrix::Zero(d, q);
    theta.leftCols(n * d) = root.middleRows(i * d, d);
    Matrix o = polar_factor(theta, prob.cov(i), tol);
    out.orthogonality_error =
        std::max(out.orthogonality_error, (o * o.transpose() - Matrix::Identity(q, q)).norm());
    Matrix sigma = Matrix::Zero(d, q);
    sigma.leftCols(d) = sqrt_psd(prob.cov(i), tol.eps_psd).mat();
    f += prob.weight(i) * sigma * o;
    out.o.push_back(std::move(o));
  }
  out.min_eigenvalue = min_eigenvalue(SymMat::from_upper(f * f.transpose()) - prob.target);
  out.ok = out.orthogonality_error <= 1e-8 && out.min_eigenvalue >= -1e-7 * (1.0 + prob.scale());
  return out;
}

}  // namespace gmcvx
