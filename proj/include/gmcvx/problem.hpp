#pragma once

// N(0, Sigma) against the mixture sum_i p_i N(x_i, Sigma_i).

#include <cmath>
#include <string>
#include <vector>

#include "gmcvx/matcore.hpp"

namespace gmcvx {

struct MixtureProblem {
  Index d = 0;
  std::vector<double> p;
  std::vector<Vector> means;
  std::vector<SymMat> covs;
  SymMat target;

  Index n() const { return static_cast<Index>(covs.size()); }

  /// Largest spectral norm over Sigma and the Sigma_i; all relative
  /// tolerances of the checkers are taken against it.
  double scale() const {
    double s = spectral_norm(target);
    for (const auto& c : covs) s = std::max(s, spectral_norm(c));
    return s;
  }

  Vector mean_of_mixture() const {
    Vector m = Vector::Zero(d);
    for (Index i = 0; i < n(); ++i) m += p[static_cast<size_t>(i)] * means[static_cast<size_t>(i)];
    return m;
  }

  bool centered(double tol = 1e-10) const { return mean_of_mixture().norm() <= tol; }

  bool zero_means() const {
    for (const auto& x : means) {
      if (x.cwiseAbs().maxCoeff() != 0.0) return false;
    }
    return true;
  }

  double weight(Index i) const { return p[static_cast<size_t>(i)]; }
  const SymMat& cov(Index i) const { return covs[static_cast<size_t>(i)]; }
};

/// Convenience constructor with zero means.
inline MixtureProblem make_problem(const SymMat& target, std::vector<SymMat> covs,
                                   std::vector<double> p) {
  MixtureProblem prob;
  prob.d = target.dim();
  prob.target = target;
  prob.covs = std::move(covs);
  prob.p = std::move(p);
  prob.means.assign(prob.covs.size(), Vector::Zero(prob.d));
  return prob;
}

/// Checks the structural invariants; throws InvalidProblem / DimensionMismatch
/// / NotPSD. `weight_tol` bounds |sum p - 1|.
inline void validate(const MixtureProblem& prob, double weight_tol = 1e-12,
                     double eps = Tolerances{}.eps_psd) {
  if (prob.d < 1) throw Error(ErrorCode::InvalidProblem, "dimension must be positive");
  if (prob.n() < 1) throw Error(ErrorCode::InvalidProblem, "no components");
  if (prob.p.size() != prob.covs.size() || prob.means.size() != prob.covs.size()) {
    throw Error(ErrorCode::DimensionMismatch, "weights, means and covariances differ in count");
  }
  if (prob.target.dim() != prob.d) throw Error(ErrorCode::DimensionMismatch, "target size");
  double total = 0.0;
  for (double w : prob.p) {
    if (!(w > 0.0 && w <= 1.0) || !std::isfinite(w)) {
      throw Error(ErrorCode::InvalidProblem, "weights must lie in (0, 1]");
    }
    total += w;
  }
  if (std::abs(total - 1.0) > weight_tol) {
    throw Error(ErrorCode::InvalidProblem, "weights sum to " + std::to_string(total));
  }
  for (Index i = 0; i < prob.n(); ++i) {
    const auto k = static_cast<size_t>(i);
    if (prob.covs[k].dim() != prob.d || prob.means[k].size() != prob.d) {
      throw Error(ErrorCode::DimensionMismatch, "component " + std::to_string(i + 1) + " size");
    }
    if (!prob.means[k].allFinite()) throw Error(ErrorCode::InvalidMatrix, "non-finite mean");
    if (!is_psd(prob.covs[k], eps).psd) {
      throw Error(ErrorCode::NotPSD, "component covariance " + std::to_string(i + 1));
    }
  }
  if (!is_psd(prob.target, eps).psd) throw Error(ErrorCode::NotPSD, "target covariance");
}

/// The problem seen through x -> M x: Sigma -> M Sigma M^T, x_i -> M x_i.
inline MixtureProblem transformed(const MixtureProblem& prob, const Matrix& m) {
  MixtureProblem out = prob;
  out.target = congruence(m, prob.target);
  for (Index i = 0; i < prob.n(); ++i) {
    const auto k = static_cast<size_t>(i);
    out.covs[k] = congruence(m, prob.covs[k]);
    out.means[k] = m * prob.means[k];
  }
  return out;
}

// ---- block helpers for nd x nd matrices ----

/// A Gamma A^T with A = (p_1 I, ..., p_n I).
inline SymMat a_gamma_at(const Matrix& gamma, const std::vector<double>& p, Index d) {
  const Index n = static_cast<Index>(p.size());
  Matrix acc = Matrix::Zero(d, d);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < n; ++j) {
      acc += p[static_cast<size_t>(i)] * p[static_cast<size_t>(j)] * gamma.block(i * d, j * d, d, d);
    }
  }
  return SymMat::from_upper(0.5 * (acc + acc.transpose()));
}

/// nd x d stack B with B_i = b_i (d x d each); helper for B C B^T style builds.
inline Matrix stack_blocks(const std::vector<Matrix>& blocks) {
  const Index d = blocks.front().rows();
  Matrix out(d * static_cast<Index>(blocks.size()), blocks.front().cols());
  for (size_t i = 0; i < blocks.size(); ++i) out.middleRows(static_cast<Index>(i) * d, d) = blocks[i];
  return out;
}

inline Matrix block_diagonal(const std::vector<SymMat>& blocks) {
  const Index d = blocks.front().dim();
  const Index n = static_cast<Index>(blocks.size());
  Matrix out = Matrix::Zero(n * d, n * d);
  for (Index i = 0; i < n; ++i) out.block(i * d, i * d, d, d) = blocks[static_cast<size_t>(i)].mat();
  return out;
}

}  // namespace gmcvx
