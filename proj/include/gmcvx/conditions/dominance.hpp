#pragma once

// Reverse order: sum p_i N(0, Sigma_i) <=cx N(0, Sigma) iff Sigma_i <= Sigma
// for every i.

#include "gmcvx/problem.hpp"
#include "gmcvx/verdict.hpp"

namespace gmcvx {

inline void require_zero_means(const MixtureProblem& prob, double tol = 1e-12) {
  for (const auto& x : prob.means) {
    if (x.size() && x.cwiseAbs().maxCoeff() > tol) {
      throw Error(ErrorCode::NonCenteredMeans, "components must have zero means");
    }
  }
}

/// Fails names the component with the largest violation and the direction
/// where xi' Sigma_i xi exceeds xi' Sigma xi.
inline Verdict check_dominated_by_single(const MixtureProblem& prob,
                                         double eps = Tolerances{}.eps_psd) {
  require_zero_means(prob);
  const double threshold = -eps * (1.0 + prob.scale());
  Verdict v;
  v.margin = std::numeric_limits<double>::infinity();
  IndexWitness worst;
  for (Index i = 0; i < prob.n(); ++i) {
    const SpectralDecomp e = eigen_sym(prob.target - prob.cov(i));
    if (e.min_eigenvalue() < v.margin) {
      v.margin = e.min_eigenvalue();
      worst = IndexWitness{i, e.eigenvectors.col(0), -e.min_eigenvalue()};
    }
  }
  v.boundary = std::abs(v.margin) <= -threshold;
  if (v.margin >= threshold) {
    v.status = Status::Holds;
  } else {
    v.status = Status::Fails;
    v.witness = worst;
  }
  return v;
}

}  // namespace gmcvx
