#pragma once

// Gaussian-coupling condition (3) and its pairwise relaxation.

#include <cmath>
#include <numbers>
#include <optional>
#include <vector>

#include "gmcvx/conditions/directional.hpp"
#include "gmcvx/gaussian_blocks.hpp"
#include "gmcvx/psdfeas.hpp"
#include "gmcvx/rng.hpp"

namespace gmcvx {

struct InecovConfig {
  InegsqrtConfig directional;
  FeasibilityConfig engine;
  bool rotation_scan = true;
  int rotation_grid = 720;       // d = 2: angles per orthogonal factor
  int rotation_samples = 64;     // d > 2: random orthogonal draws per factor
  int rotation_sweeps = 3;       // coordinate passes over the factors
  std::uint64_t seed = 0xfeed;
};

/// Full condition (3) check of a candidate Gamma.
inline GammaCheck validate_gamma(const MixtureProblem& prob, const Matrix& gamma,
                                 double eps = Tolerances{}.eps_psd) {
  return check_gamma(prob, gamma, ConeKind::FullPSD, eps);
}

/// Pairwise relaxation check: every 2d x 2d pair block PSD and Sigma <= A Gamma A^T.
inline GammaCheck validate_pairwise(const MixtureProblem& prob, const Matrix& gamma,
                                    double eps = Tolerances{}.eps_psd) {
  return check_gamma(prob, gamma, ConeKind::PairwisePSD, eps);
}

/// True when each 2d x 2d pair block of Gamma is PSD within is_psd's
/// relative tolerance (no reference to a target).
inline bool pair_blocks_psd(const Matrix& gamma, Index d, double eps = Tolerances{}.eps_psd) {
  const Index n = gamma.rows() / d;
  for (Index i = 0; i < n; ++i) {
    for (Index j = i + 1; j < n; ++j) {
      if (!is_psd(pair_block(gamma, d, i, j), eps).psd) return false;
    }
  }
  return true;
}

namespace detail {

inline Matrix planar_orthogonal(double angle, bool reflect) {
  const double c = std::cos(angle);
  const double s = std::sin(angle);
  Matrix o(2, 2);
  if (reflect) o << c, s, s, -c;
  else o << c, -s, s, c;
  return o;
}

// Coordinate search over Gamma = B B^T, B_i = Sigma_i^{1/2} O_i, maximizing
// lambda_min(A B B^T A^T - Sigma). O_1 stays fixed at the identity.
struct RotationScan {
  const MixtureProblem& prob;
  std::vector<Matrix> roots;
  std::vector<Matrix> ortho;

  explicit RotationScan(const MixtureProblem& p) : prob(p) {
    for (const auto& c : p.covs) roots.push_back(sqrt_psd(c).mat());
    ortho.assign(roots.size(), Matrix::Identity(p.d, p.d));
  }

  double objective_with(size_t i, const Matrix& oi) const {
    Matrix f = Matrix::Zero(prob.d, prob.d);
    for (size_t k = 0; k < roots.size(); ++k) f += prob.p[k] * roots[k] * (k == i ? oi : ortho[k]);
    return eigen_raw(f * f.transpose() - prob.target.mat()).min_eigenvalue();
  }

  double objective() const { return objective_with(0, ortho[0]); }

  Matrix gamma() const {
    std::vector<Matrix> b;
    for (size_t k = 0; k < roots.size(); ++k) b.push_back(roots[k] * ortho[k]);
    return gamma_from_factors(prob, stack_blocks(b));
  }

  // d = 2: exhaustive angle grid over rotations and reflections, then golden
  // refinement around the best cell. Returns the best value.
  double improve_planar(size_t i, int grid) {
    double best = objective_with(i, ortho[i]);
    const double step = 2.0 * std::numbers::pi / grid;
    for (int refl = 0; refl < 2; ++refl) {
      int best_k = -1;
      double local = -std::numeric_limits<double>::infinity();
      for (int k = 0; k < grid; ++k) {
        const double v = objective_with(i, planar_orthogonal(k * step, refl != 0));
        if (v > local) {
          local = v;
          best_k = k;
        }
      }
      double arg = best_k * step;
      const double refined = -golden_section_min(
          [&](double t) { return -objective_with(i, planar_orthogonal(t, refl != 0)); },
          (best_k - 1) * step, (best_k + 1) * step, 80, &arg);
      if (refined < local) arg = best_k * step;
      const Matrix cand = planar_orthogonal(arg, refl != 0);
      const double v = objective_with(i, cand);
      if (v > best) {
        best = v;
        ortho[i] = cand;
      }
    }
    return best;
  }

  double improve_random(size_t i, int samples, CounterRng& rng) {
    double best = objective_with(i, ortho[i]);
    for (int k = 0; k < samples; ++k) {
      const Matrix cand = random_orthogonal(prob.d, rng);
      const double v = objective_with(i, cand);
      if (v > best) {
        best = v;
        ortho[i] = cand;
      }
    }
    // Local perturbations around the incumbent.
    double radius = 0.5;
    for (int k = 0; k < 4 * samples; ++k) {
      Matrix g(prob.d, prob.d);
      for (Index r = 0; r < prob.d; ++r) {
        for (Index c = 0; c < prob.d; ++c) g(r, c) = rng.normal();
      }
      const Matrix skew = radius * 0.25 * (g - g.transpose());
      const Matrix eye = Matrix::Identity(prob.d, prob.d);
      const Matrix cayley = (eye - skew).partialPivLu().solve(eye + skew);
      const Matrix cand = ortho[i] * cayley;
      const double v = objective_with(i, cand);
      if (v > best) {
        best = v;
        ortho[i] = cand;
      } else {
        radius *= 0.97;
      }
    }
    return best;
  }
};

}  // namespace detail

/// Candidate couplings tried before (and as starts for) the projection engine.
inline std::vector<Matrix> inecov_candidates(const MixtureProblem& prob, const InecovConfig& cfg = {}) {
  const Index n = prob.n();
  std::vector<Matrix> out;
  std::vector<Matrix> roots;
  for (const auto& c : prob.covs) roots.push_back(sqrt_psd(c).mat());
  out.push_back(gamma_from_factors(prob, stack_blocks(roots)));  // common noise

  // Wasserstein coupling of every component with the largest nonsingular one.
  {
    int ref = -1;
    for (Index i = 0; i < n; ++i) {
      if (!detail::nonsingular(prob.cov(i), Tolerances{})) continue;
      if (ref < 0 || prob.cov(i).mat().trace() > prob.cov(ref).mat().trace()) ref = static_cast<int>(i);
    }
    if (ref >= 0) {
      std::vector<Matrix> b(static_cast<size_t>(n));
      for (Index i = 0; i < n; ++i) {
        b[static_cast<size_t>(i)] =
            i == ref ? roots[static_cast<size_t>(i)] : wasserstein_blocks(prob.cov(ref), prob.cov(i)).second;
      }
      out.push_back(gamma_from_factors(prob, stack_blocks(b)));
    }
  }

  try {
    std::vector<Matrix> l;
    for (const auto& c : prob.covs) l.push_back(cholesky_lower(c));
    out.push_back(gamma_from_factors(prob, stack_blocks(l)));
  } catch (const Error&) {
  }

  if (cfg.rotation_scan && n >= 2) {
    detail::RotationScan scan(prob);
    CounterRng rng(cfg.seed, 11);
    double prev = scan.objective();
    for (int sweep = 0; sweep < cfg.rotation_sweeps; ++sweep) {
      double cur = prev;
      for (size_t i = 1; i < static_cast<size_t>(n); ++i) {
        cur = prob.d == 2 ? scan.improve_planar(i, cfg.rotation_grid)
                          : scan.improve_random(i, cfg.rotation_samples, rng);
      }
      out.push_back(scan.gamma());
      if (n == 2 && prob.d == 2) break;  // single factor: one pass is exact up to the grid
      if (cur <= prev + 1e-12 * (1.0 + std::abs(prev))) break;
      prev = cur;
    }
    // The planar optimum averaged with its counterpart using O_2^T; for
    // targets symmetric under the sign of the off-diagonal this lands inside
    // the convex region rather than on its boundary.
    if (n == 2 && prob.d == 2) {
      detail::RotationScan alt(prob);
      alt.ortho[1] = scan.ortho[1].transpose();
      out.push_back(0.5 * (scan.gamma() + alt.gamma()));
    }
  }
  return out;
}

namespace detail {

inline Verdict feasibility_verdict(const MixtureProblem& prob, ConeKind cone, const InecovConfig& cfg,
                                   const Verdict& directional, const std::vector<Matrix>& extra) {
  if (directional.status == Status::Fails) {
    Verdict v = directional;
    v.notes.push_back("refuted by the square-root condition (necessary)");
    return v;
  }
  std::vector<Matrix> candidates = inecov_candidates(prob, cfg);
  candidates.insert(candidates.end(), extra.begin(), extra.end());
  const FeasibilityOutcome res = solve(FeasibilityTask{prob, cone}, cfg.engine, candidates);
  Verdict v;
  v.diagnostics["iterations"] = res.iterations;
  v.diagnostics["cone_distance"] = res.cone_distance;
  v.diagnostics["affine_distance"] = res.affine_distance;
  v.diagnostics["warm_start"] = res.warm_start_index;
  v.diagnostics["directional_margin"] = directional.margin;
  // Gamma is often singular at optimum, so the slack is the informative margin.
  v.margin = res.check.slack_min_eigenvalue;
  v.diagnostics["gamma_min_eigenvalue"] = res.check.cone_min_eigenvalue;
  if (res.status == FeasibilityStatus::Feasible) {
    v.status = Status::Holds;
    v.witness = *res.gamma;
    v.boundary = directional.boundary;
  } else {
    v.status = Status::Unknown;
    v.witness = res.last;
    v.notes.push_back(res.stalled ? "projection engine stalled" : "projection engine hit the iteration cap");
  }
  return v;
}

}  // namespace detail

/// Condition (3). Fails only through the square-root condition; otherwise
/// Holds with a validated Gamma or Unknown.
inline Verdict check_inecov(const MixtureProblem& prob, const InecovConfig& cfg = {},
                            const std::vector<Matrix>& extra_candidates = {},
                            const std::optional<Verdict>& directional = std::nullopt) {
  const Verdict dir = directional ? *directional : check_inegsqrt(prob, cfg.directional);
  return detail::feasibility_verdict(prob, ConeKind::FullPSD, cfg, dir, extra_candidates);
}

/// Pairwise relaxation: only 2d x 2d pair blocks need to be PSD.
inline Verdict check_inecovf(const MixtureProblem& prob, const InecovConfig& cfg = {},
                             const std::vector<Matrix>& extra_candidates = {},
                             const std::optional<Verdict>& directional = std::nullopt) {
  const Verdict dir = directional ? *directional : check_inegsqrt(prob, cfg.directional);
  return detail::feasibility_verdict(prob, ConeKind::PairwisePSD, cfg, dir, extra_candidates);
}

}  // namespace gmcvx
