#pragma once

// Feasibility of
//   Gamma symmetric nd x nd, Gamma_(ii) = Sigma_i, Gamma in K, Sigma <= A Gamma A^T
// with K the PSD cone (FullPSD) or the set where every 2d x 2d pair block is
// PSD (PairwisePSD). Solved by Dykstra's alternating projections on the pair
// (Gamma, S) with the slack S = A Gamma A^T - Sigma.
//
// In the pairwise case the off-diagonal block X_ij lives in its own 2d x 2d
// matrix [[Sigma_i, X_ij], [X_ij^T, Sigma_j]]; because the diagonal blocks are
// pinned by the affine set, the cone is an exact product of small PSD cones.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "gmcvx/gaussian_blocks.hpp"
#include "gmcvx/problem.hpp"
#include "gmcvx/verdict.hpp"

namespace gmcvx {

enum class ConeKind { FullPSD, PairwisePSD };

struct FeasibilityTask {
  MixtureProblem prob;
  ConeKind cone = ConeKind::FullPSD;

  Index n() const { return prob.n(); }
  Index d() const { return prob.d; }
};

struct FeasibilityConfig {
  int max_iter = 20000;
  double tol = 1e-8;  // relative to problem scale
  double eps_psd = Tolerances{}.eps_psd;
  int stall_start = 2000;  // stall detection begins here
  int stall_window = 500;
  double stall_ratio = 1e-3;  // required relative decrease of the gap per window
  bool record_dual = false;   // keep the per-iteration dual objective
};

struct GammaCheck {
  bool ok = false;
  bool blocks_exact = false;
  double cone_min_eigenvalue = 0.0;   // lambda_min(Gamma) or min over pair blocks
  double slack_min_eigenvalue = 0.0;  // lambda_min(A Gamma A^T - Sigma)
  double threshold = 0.0;             // both must be >= threshold
  std::string reason;

  double margin() const { return std::min(cone_min_eigenvalue, slack_min_eigenvalue); }
};

enum class FeasibilityStatus { Feasible, MaxIterations };

struct FeasibilityOutcome {
  FeasibilityStatus status = FeasibilityStatus::MaxIterations;
  std::optional<GammaWitness> gamma;  // set when Feasible
  GammaWitness last;                  // final affine iterate either way
  int iterations = 0;
  double cone_distance = 0.0;    // ||x - P_K(x)|| of the last affine iterate
  double affine_distance = 0.0;  // ||y - P_A(y)|| of the last cone iterate
  GammaCheck check;
  bool stalled = false;
  bool polished = false;      // found by the barrier fallback, not by Dykstra
  int warm_start_index = -1;  // candidate that seeded the run (-1: none)
  std::vector<double> dual_objective;
};

// ---------------------------------------------------------------------------
// validation

inline double slack_threshold(const MixtureProblem& prob, double eps) {
  return -eps * (1.0 + prob.scale());
}

/// Pair block [[G_ii, G_ij], [G_ji, G_jj]].
inline SymMat pair_block(const Matrix& gamma, Index d, Index i, Index j) {
  Matrix b(2 * d, 2 * d);
  b.topLeftCorner(d, d) = gamma.block(i * d, i * d, d, d);
  b.topRightCorner(d, d) = gamma.block(i * d, j * d, d, d);
  b.bottomLeftCorner(d, d) = gamma.block(j * d, i * d, d, d);
  b.bottomRightCorner(d, d) = gamma.block(j * d, j * d, d, d);
  return SymMat::from_upper(b);
}

/// Checks Gamma against the task: symmetric, blocks equal Sigma_i, cone
/// membership and the domination Sigma <= A Gamma A^T, all within
/// eps * (1 + problem scale).
inline GammaCheck check_gamma(const MixtureProblem& prob, const Matrix& gamma, ConeKind cone,
                              double eps = Tolerances{}.eps_psd) {
  GammaCheck out;
  const Index d = prob.d;
  const Index n = prob.n();
  const double scale = prob.scale();
  out.threshold = slack_threshold(prob, eps);
  if (gamma.rows() != n * d || gamma.cols() != n * d) {
    out.reason = "Gamma has the wrong shape";
    return out;
  }
  if (!gamma.allFinite()) {
    out.reason = "Gamma has non-finite entries";
    return out;
  }
  const double entry_tol = 1e-10 * (1.0 + scale);
  if ((gamma - gamma.transpose()).cwiseAbs().maxCoeff() > entry_tol) {
    out.reason = "Gamma is not symmetric";
    return out;
  }
  out.blocks_exact = true;
  for (Index i = 0; i < n; ++i) {
    const double dev = (gamma.block(i * d, i * d, d, d) - prob.cov(i).mat()).cwiseAbs().maxCoeff();
    if (dev > entry_tol) {
      out.blocks_exact = false;
      out.reason = "diagonal block " + std::to_string(i + 1) + " differs from Sigma_i";
      return out;
    }
  }
  // Work on the block-enforced copy so that the checked matrix is exactly
  // the witness.
  Matrix g = SymMat::from_upper(gamma).mat();
  for (Index i = 0; i < n; ++i) g.block(i * d, i * d, d, d) = prob.cov(i).mat();
  if (cone == ConeKind::FullPSD) {
    out.cone_min_eigenvalue = detail::eigen_raw(g).min_eigenvalue();
  } else {
    out.cone_min_eigenvalue = n > 1 ? std::numeric_limits<double>::infinity()
                                    : min_eigenvalue(prob.cov(0));
    for (Index i = 0; i < n; ++i) {
      for (Index j = i + 1; j < n; ++j) {
        out.cone_min_eigenvalue = std::min(out.cone_min_eigenvalue, min_eigenvalue(pair_block(g, d, i, j)));
      }
    }
  }
  out.slack_min_eigenvalue = min_eigenvalue(a_gamma_at(g, prob.p, d) - prob.target);
  out.ok = out.cone_min_eigenvalue >= out.threshold && out.slack_min_eigenvalue >= out.threshold;
  if (!out.ok) {
    out.reason = out.cone_min_eigenvalue < out.threshold ? "Gamma outside the cone"
                                                         : "Sigma not dominated by A Gamma A^T";
  }
  return out;
}

/// Copies `gamma`, mirrors its upper triangle and overwrites the diagonal
/// blocks with Sigma_i.
inline Matrix enforce_blocks(const MixtureProblem& prob, const Matrix& gamma) {
  const Index d = prob.d;
  Matrix g = SymMat::from_upper(gamma).mat();
  for (Index i = 0; i < prob.n(); ++i) g.block(i * d, i * d, d, d) = prob.cov(i).mat();
  return g;
}

/// Gamma = B B^T for an nd x q stack B (rows i*d .. i*d+d-1 are B_i);
/// diagonal blocks are then reset to Sigma_i exactly.
inline Matrix gamma_from_factors(const MixtureProblem& prob, const Matrix& b) {
  return enforce_blocks(prob, b * b.transpose());
}

// ---------------------------------------------------------------------------
// warm starts

struct WarmStart {
  Matrix gamma;
  int index = -1;
  double score = -std::numeric_limits<double>::infinity();  // min eigen margin
  GammaCheck check;
};

/// Picks the candidate with the best (largest) worst-case eigenvalue margin.
/// Candidates of the wrong shape are skipped; an empty list yields the
/// block-diagonal Gamma.
inline WarmStart warm_start_from(const FeasibilityTask& task, const std::vector<Matrix>& candidates,
                                 double eps = Tolerances{}.eps_psd) {
  const Index nd = task.n() * task.d();
  WarmStart best;
  for (size_t k = 0; k < candidates.size(); ++k) {
    const Matrix& c = candidates[k];
    if (c.rows() != nd || c.cols() != nd || !c.allFinite()) continue;
    Matrix g = enforce_blocks(task.prob, c);
    GammaCheck chk = check_gamma(task.prob, g, task.cone, eps);
    const double score = chk.margin();
    if (best.index < 0 || score > best.score || (chk.ok && !best.check.ok)) {
      best.gamma = std::move(g);
      best.index = static_cast<int>(k);
      best.score = score;
      best.check = chk;
    }
  }
  if (best.index < 0) {
    best.gamma = block_diagonal(task.prob.covs);
    best.check = check_gamma(task.prob, best.gamma, task.cone, eps);
    best.score = best.check.margin();
  }
  return best;
}

/// Canonical candidates: block-diagonal; all off-diagonal blocks equal to
/// Sigma when Sigma <= Sigma_i for every i; the quadratic-Wasserstein
/// coupling when n = 2.
inline std::vector<Matrix> default_candidates(const FeasibilityTask& task,
                                              double eps = Tolerances{}.eps_psd) {
  const MixtureProblem& prob = task.prob;
  const Index d = prob.d;
  const Index n = prob.n();
  std::vector<Matrix> out;
  out.push_back(block_diagonal(prob.covs));

  bool below_all = true;
  for (Index i = 0; i < n && below_all; ++i) below_all = is_psd(prob.cov(i) - prob.target, eps).psd;
  if (below_all) {
    Matrix g = Matrix::Zero(n * d, n * d);
    for (Index i = 0; i < n; ++i) {
      for (Index j = 0; j < n; ++j) g.block(i * d, j * d, d, d) = prob.target.mat();
    }
    out.push_back(enforce_blocks(prob, g));
  }

  if (n == 2) {
    try {
      auto [s1, s2] = wasserstein_blocks(prob.cov(0), prob.cov(1));
      out.push_back(gamma_from_factors(prob, stack_blocks({s1, s2})));
    } catch (const Error&) {
      // both singular: no Wasserstein candidate
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Dykstra engine

namespace detail {

// Iterate in the lifted space: cone blocks (one nd x nd, or one 2d x 2d per
// pair) plus the slack S.
struct LiftedPoint {
  std::vector<Matrix> blocks;
  Matrix s;

  LiftedPoint& operator+=(const LiftedPoint& o) {
    for (size_t k = 0; k < blocks.size(); ++k) blocks[k] += o.blocks[k];
    s += o.s;
    return *this;
  }
  LiftedPoint operator+(const LiftedPoint& o) const {
    LiftedPoint r = *this;
    r += o;
    return r;
  }
  LiftedPoint operator-(const LiftedPoint& o) const {
    LiftedPoint r = *this;
    for (size_t k = 0; k < blocks.size(); ++k) r.blocks[k] -= o.blocks[k];
    r.s -= o.s;
    return r;
  }
  double dot(const LiftedPoint& o) const {
    double acc = (s.array() * o.s.array()).sum();
    for (size_t k = 0; k < blocks.size(); ++k) acc += (blocks[k].array() * o.blocks[k].array()).sum();
    return acc;
  }
  double norm() const { return std::sqrt(dot(*this)); }
};

class DykstraEngine {
 public:
  DykstraEngine(const FeasibilityTask& task, double shift)
      : task_(task), d_(task.d()), n_(task.n()) {
    const auto& prob = task.prob;
    Matrix k = Matrix::Zero(d_, d_);
    for (Index i = 0; i < n_; ++i) k += prob.weight(i) * prob.weight(i) * prob.cov(i).mat();
    k -= prob.target.mat();
    k -= shift * Matrix::Identity(d_, d_);
    k_ = 0.5 * (k + k.transpose());
    double csum = 0.0;
    for (Index i = 0; i < n_; ++i) {
      for (Index j = i + 1; j < n_; ++j) {
        const double c = 2.0 * prob.weight(i) * prob.weight(j);
        pairs_.push_back({i, j, c});
        csum += c * c;
      }
    }
    denom_ = 1.0 + 0.5 * csum;
  }

  LiftedPoint lift(const Matrix& gamma) const {
    LiftedPoint pt;
    if (task_.cone == ConeKind::FullPSD) {
      pt.blocks.push_back(gamma);
    } else {
      for (const auto& pr : pairs_) pt.blocks.push_back(pair_block(gamma, d_, pr.i, pr.j).mat());
    }
    pt.s = a_gamma_at(gamma, task_.prob.p, d_).mat() - task_.prob.target.mat();
    return pt;
  }

  Matrix gamma_of(const LiftedPoint& pt) const {
    Matrix g = block_diagonal(task_.prob.covs);
    for (size_t k = 0; k < pairs_.size(); ++k) {
      const Matrix x = off_block(pt, k);
      g.block(pairs_[k].i * d_, pairs_[k].j * d_, d_, d_) = x;
      g.block(pairs_[k].j * d_, pairs_[k].i * d_, d_, d_) = x.transpose();
    }
    return g;
  }

  // Orthogonal projection onto the affine set (closed form).
  LiftedPoint project_affine(const LiftedPoint& z) const {
    const Matrix s0 = 0.5 * (z.s + z.s.transpose());
    std::vector<Matrix> y0(pairs_.size());
    std::vector<Matrix> w(pairs_.size());
    Matrix rhs = k_ - s0;
    for (size_t k = 0; k < pairs_.size(); ++k) {
      const Matrix x0 = off_block(z, k);
      y0[k] = 0.5 * (x0 + x0.transpose());
      w[k] = 0.5 * (x0 - x0.transpose());
      rhs += pairs_[k].c * y0[k];
    }
    const Matrix e = rhs / denom_;
    LiftedPoint out;
    out.s = s0 + e;
    std::vector<Matrix> xs(pairs_.size());
    for (size_t k = 0; k < pairs_.size(); ++k) xs[k] = y0[k] - 0.5 * pairs_[k].c * e + w[k];
    if (task_.cone == ConeKind::FullPSD) {
      Matrix g = block_diagonal(task_.prob.covs);
      for (size_t k = 0; k < pairs_.size(); ++k) {
        g.block(pairs_[k].i * d_, pairs_[k].j * d_, d_, d_) = xs[k];
        g.block(pairs_[k].j * d_, pairs_[k].i * d_, d_, d_) = xs[k].transpose();
      }
      out.blocks.push_back(std::move(g));
    } else {
      for (size_t k = 0; k < pairs_.size(); ++k) {
        Matrix b(2 * d_, 2 * d_);
        b.topLeftCorner(d_, d_) = task_.prob.cov(pairs_[k].i).mat();
        b.bottomRightCorner(d_, d_) = task_.prob.cov(pairs_[k].j).mat();
        b.topRightCorner(d_, d_) = xs[k];
        b.bottomLeftCorner(d_, d_) = xs[k].transpose();
        out.blocks.push_back(std::move(b));
      }
    }
    return out;
  }

  // Projection onto the cone: eigenvalue clamping per block and on S.
  LiftedPoint project_cone(const LiftedPoint& z) const {
    LiftedPoint out;
    out.blocks.reserve(z.blocks.size());
    for (const auto& b : z.blocks) out.blocks.push_back(psd_projection_raw(b));
    out.s = psd_projection_raw(z.s);
    return out;
  }

 private:
  struct Pair {
    Index i;
    Index j;
    double c;
  };

  Matrix off_block(const LiftedPoint& pt, size_t k) const {
    const auto& pr = pairs_[k];
    if (task_.cone == ConeKind::FullPSD) {
      const Matrix& g = pt.blocks.front();
      return 0.5 * (g.block(pr.i * d_, pr.j * d_, d_, d_) + g.block(pr.j * d_, pr.i * d_, d_, d_).transpose());
    }
    const Matrix& b = pt.blocks[k];
    return 0.5 * (b.topRightCorner(d_, d_) + b.bottomLeftCorner(d_, d_).transpose());
  }

  const FeasibilityTask& task_;
  Index d_;
  Index n_;
  Matrix k_;
  std::vector<Pair> pairs_;
  double denom_ = 1.0;
};

// Fallback for instances whose feasible set has no interior (Example 1 has
// exactly one Gamma, with zero slack), where Dykstra crawls at O(1/sqrt(k)).
//
// Writes Gamma = R K R^T with R = blockdiag(R_i), R_i R_i^T = Sigma_i, R_i of
// full column rank and K_ii = I. The cone condition on Gamma is then the same
// condition on K, and K = I is interior even when Sigma_i is singular. Then
// maximizes t subject to A Gamma A^T - Sigma >= t I by a log-det barrier
// Newton method, stopping as soon as t clears the acceptance threshold.
class BarrierPolish {
 public:
  BarrierPolish(const FeasibilityTask& task, double threshold) : task_(task), threshold_(threshold) {
    const auto& prob = task.prob;
    const Index d = prob.d;
    offsets_.push_back(0);
    for (Index i = 0; i < prob.n(); ++i) {
      const SpectralDecomp e = eigen_raw(prob.cov(i).mat());
      const double top = std::max(e.eigenvalues.maxCoeff(), 0.0);
      std::vector<Index> keep;
      for (Index k = 0; k < d; ++k) {
        if (e.eigenvalues(k) > 1e-12 * top) keep.push_back(k);
      }
      Matrix r(d, static_cast<Index>(keep.size()));
      for (size_t c = 0; c < keep.size(); ++c) {
        r.col(static_cast<Index>(c)) = e.eigenvectors.col(keep[c]) * std::sqrt(e.eigenvalues(keep[c]));
      }
      roots_.push_back(r);
      offsets_.push_back(offsets_.back() + r.cols());
    }
    rank_ = offsets_.back();
    base_ = -prob.target.mat();
    for (Index i = 0; i < prob.n(); ++i) base_ += prob.weight(i) * prob.weight(i) * roots_[i] * roots_[i].transpose();
    for (Index i = 0; i < prob.n(); ++i) {
      for (Index j = i + 1; j < prob.n(); ++j) {
        for (Index a = 0; a < roots_[i].cols(); ++a) {
          for (Index b = 0; b < roots_[j].cols(); ++b) {
            const Vector u = roots_[i].col(a), v = roots_[j].col(b);
            vars_.push_back({i, j, offsets_[i] + a, offsets_[j] + b,
                             prob.weight(i) * prob.weight(j) * (u * v.transpose() + v * u.transpose())});
          }
        }
        if (task.cone == ConeKind::PairwisePSD) cone_blocks_.push_back({i, j});
      }
    }
    if (task.cone == ConeKind::FullPSD) {
      std::vector<Index> all(static_cast<size_t>(prob.n()));
      std::iota(all.begin(), all.end(), Index{0});
      cone_blocks_.push_back(all);
    }
  }

  std::optional<Matrix> run() const {
    const Index m = static_cast<Index>(vars_.size());
    if (m == 0) return std::nullopt;
    const Index d = task_.prob.d;
    const double scale = std::max(task_.prob.scale(), std::numeric_limits<double>::min());
    double nu = static_cast<double>(d);
    for (const auto& blk : cone_blocks_) nu += static_cast<double>(sub_size(blk));

    Vector x = Vector::Zero(m + 1);
    x(m) = eigen_raw(base_).min_eigenvalue() - scale;  // strictly below lambda_min: interior start
    double tau = nu / scale;
    for (int outer = 0; outer < 60; ++outer) {
      for (int newton = 0; newton < 80; ++newton) {
        Vector grad;
        Matrix hess;
        if (!derivatives(x, tau, grad, hess)) return std::nullopt;
        const Vector step = -hess.ldlt().solve(grad);
        const double decrement = -grad.dot(step);
        if (!step.allFinite()) return std::nullopt;
        if (decrement <= 1e-12) break;
        const double f0 = value(x, tau);
        double alpha = 1.0;
        while (alpha > 1e-14) {
          const Vector y = x + alpha * step;
          const double f1 = value(y, tau);
          if (std::isfinite(f1) && f1 <= f0 - 0.25 * alpha * decrement) break;
          alpha *= 0.5;
        }
        if (alpha <= 1e-14) break;
        x += alpha * step;
        if (x(m) >= threshold_) return gamma_at(x);
      }
      if (x(m) >= threshold_) return gamma_at(x);
      if (nu / tau < 1e-3 * std::abs(threshold_)) break;  // optimum of t is within reach: it is below threshold
      tau *= 8.0;
    }
    if (x(m) >= 2.0 * threshold_) return gamma_at(x);  // let check_gamma decide
    return std::nullopt;
  }

 private:
  struct Var {
    Index i, j;    // components
    Index ra, rb;  // row/col in K
    Matrix slack;  // d x d image in A Gamma A^T
  };

  Index sub_size(const std::vector<Index>& blk) const {
    Index s = 0;
    for (Index c : blk) s += offsets_[c + 1] - offsets_[c];
    return s;
  }

  Matrix k_of(const Vector& x) const {
    Matrix k = Matrix::Identity(rank_, rank_);
    for (size_t v = 0; v < vars_.size(); ++v) {
      k(vars_[v].ra, vars_[v].rb) = x(static_cast<Index>(v));
      k(vars_[v].rb, vars_[v].ra) = x(static_cast<Index>(v));
    }
    return k;
  }

  Matrix slack_of(const Vector& x) const {
    const Index m = static_cast<Index>(vars_.size());
    Matrix s = base_ - x(m) * Matrix::Identity(task_.prob.d, task_.prob.d);
    for (Index v = 0; v < m; ++v) s += x(v) * vars_[static_cast<size_t>(v)].slack;
    return s;
  }

  // Rows of K belonging to the listed components, and the position of each K row in it.
  std::vector<Index> rows_of(const std::vector<Index>& blk) const {
    std::vector<Index> rows;
    for (Index c : blk) {
      for (Index r = offsets_[c]; r < offsets_[c + 1]; ++r) rows.push_back(r);
    }
    return rows;
  }

  static Matrix gather(const Matrix& k, const std::vector<Index>& rows) {
    const Index s = static_cast<Index>(rows.size());
    Matrix out(s, s);
    for (Index a = 0; a < s; ++a) {
      for (Index b = 0; b < s; ++b) out(a, b) = k(rows[a], rows[b]);
    }
    return out;
  }

  double value(const Vector& x, double tau) const {
    const Index m = static_cast<Index>(vars_.size());
    double f = -tau * x(m);
    const auto logdet = [](const Matrix& a) {
      Eigen::LLT<Matrix> llt(a);
      if (llt.info() != Eigen::Success) return std::numeric_limits<double>::quiet_NaN();
      const Vector diag = llt.matrixL().toDenseMatrix().diagonal();
      if ((diag.array() <= 0.0).any()) return std::numeric_limits<double>::quiet_NaN();
      return 2.0 * diag.array().log().sum();
    };
    f -= logdet(slack_of(x));
    const Matrix k = k_of(x);
    for (const auto& blk : cone_blocks_) f -= logdet(gather(k, rows_of(blk)));
    return f;
  }

  bool derivatives(const Vector& x, double tau, Vector& grad, Matrix& hess) const {
    const Index m = static_cast<Index>(vars_.size());
    const Index d = task_.prob.d;
    grad = Vector::Zero(m + 1);
    hess = Matrix::Zero(m + 1, m + 1);
    grad(m) = -tau;

    // -log det(S): directions F_v and F_t = -I.
    Eigen::LLT<Matrix> sl(slack_of(x));
    if (sl.info() != Eigen::Success) return false;
    const Matrix sinv = sl.solve(Matrix::Identity(d, d));
    std::vector<Matrix> w(static_cast<size_t>(m + 1));
    for (Index v = 0; v < m; ++v) w[static_cast<size_t>(v)] = sinv * vars_[static_cast<size_t>(v)].slack;
    w[static_cast<size_t>(m)] = -sinv;
    for (Index a = 0; a <= m; ++a) {
      grad(a) -= w[static_cast<size_t>(a)].trace();
      for (Index b = a; b <= m; ++b) {
        const double h = (w[static_cast<size_t>(a)].array() * w[static_cast<size_t>(b)].transpose().array()).sum();
        hess(a, b) += h;
        if (a != b) hess(b, a) += h;
      }
    }

    // -log det of each cone block of K; direction of variable v is e_ra e_rb^T + e_rb e_ra^T.
    const Matrix k = k_of(x);
    for (const auto& blk : cone_blocks_) {
      const std::vector<Index> rows = rows_of(blk);
      std::vector<Index> pos(static_cast<size_t>(rank_), -1);
      for (size_t r = 0; r < rows.size(); ++r) pos[static_cast<size_t>(rows[r])] = static_cast<Index>(r);
      Eigen::LLT<Matrix> kl(gather(k, rows));
      if (kl.info() != Eigen::Success) return false;
      const Matrix kinv = kl.solve(Matrix::Identity(static_cast<Index>(rows.size()), static_cast<Index>(rows.size())));
      std::vector<Index> local;
      for (Index v = 0; v < m; ++v) {
        const Var& var = vars_[static_cast<size_t>(v)];
        if (pos[static_cast<size_t>(var.ra)] >= 0 && pos[static_cast<size_t>(var.rb)] >= 0) local.push_back(v);
      }
      for (Index v : local) {
        const Index a = pos[static_cast<size_t>(vars_[static_cast<size_t>(v)].ra)];
        const Index b = pos[static_cast<size_t>(vars_[static_cast<size_t>(v)].rb)];
        grad(v) -= 2.0 * kinv(a, b);
      }
      // tr(K^-1 E_v K^-1 E_u) with E = e_a e_b^T + e_b e_a^T.
      for (size_t p = 0; p < local.size(); ++p) {
        const Index a = pos[static_cast<size_t>(vars_[static_cast<size_t>(local[p])].ra)];
        const Index b = pos[static_cast<size_t>(vars_[static_cast<size_t>(local[p])].rb)];
        for (size_t q = p; q < local.size(); ++q) {
          const Index c = pos[static_cast<size_t>(vars_[static_cast<size_t>(local[q])].ra)];
          const Index e = pos[static_cast<size_t>(vars_[static_cast<size_t>(local[q])].rb)];
          const double h = 2.0 * (kinv(b, c) * kinv(e, a) + kinv(b, e) * kinv(c, a));
          hess(local[p], local[q]) += h;
          if (p != q) hess(local[q], local[p]) += h;
        }
      }
    }
    return grad.allFinite() && hess.allFinite();
  }

  Matrix gamma_at(const Vector& x) const {
    const Index d = task_.prob.d;
    const Index n = task_.prob.n();
    Matrix r = Matrix::Zero(n * d, rank_);
    for (Index i = 0; i < n; ++i) r.block(i * d, offsets_[i], d, roots_[i].cols()) = roots_[i];
    const Matrix g = r * k_of(x) * r.transpose();
    return 0.5 * (g + g.transpose());
  }

  const FeasibilityTask& task_;
  double threshold_;
  std::vector<Matrix> roots_;
  std::vector<Index> offsets_;
  Index rank_ = 0;
  Matrix base_;
  std::vector<Var> vars_;
  std::vector<std::vector<Index>> cone_blocks_;
};

}  // namespace detail

/// Runs Dykstra from `start` (or the best default candidate). Feasible is
/// declared only after the affine iterate passes check_gamma.
inline FeasibilityOutcome solve(const FeasibilityTask& task, const FeasibilityConfig& cfg = {},
                                const std::vector<Matrix>& extra_candidates = {}) {
  FeasibilityOutcome out;
  const MixtureProblem& prob = task.prob;
  const Index d = prob.d;
  const double scale = std::max(prob.scale(), std::numeric_limits<double>::min());

  std::vector<Matrix> candidates = default_candidates(task, cfg.eps_psd);
  candidates.insert(candidates.end(), extra_candidates.begin(), extra_candidates.end());
  WarmStart ws = warm_start_from(task, candidates, cfg.eps_psd);
  out.warm_start_index = ws.index;
  out.last = GammaWitness{ws.gamma, d};
  out.check = ws.check;
  if (ws.check.ok) {
    out.status = FeasibilityStatus::Feasible;
    out.gamma = GammaWitness{ws.gamma, d};
    return out;
  }
  if (prob.n() < 2) return out;  // nothing to adjust

  // Aim slightly inside the slack cone so that the accepted iterate keeps a
  // little room against rounding.
  const double shift = 0.5 * cfg.eps_psd * scale;
  detail::DykstraEngine engine(task, shift);

  const detail::LiftedPoint x0 = engine.project_affine(engine.lift(ws.gamma));
  detail::LiftedPoint x = x0;
  detail::LiftedPoint p = x0 - x0;  // zero of the right shape
  detail::LiftedPoint q = p;
  const double stop = cfg.tol * scale;
  double window_gap = std::numeric_limits<double>::infinity();

  for (int it = 1; it <= cfg.max_iter; ++it) {
    const detail::LiftedPoint y = engine.project_cone(x + p);
    p = (x + p) - y;
    const detail::LiftedPoint xn = engine.project_affine(y + q);
    q = (y + q) - xn;
    out.affine_distance = (xn - y).norm();
    x = xn;
    out.iterations = it;

    if (cfg.record_dual) {
      const detail::LiftedPoint pq = p + q;
      out.dual_objective.push_back(pq.dot(x0) - 0.5 * pq.dot(pq) - q.dot(x));
    }

    const double gap = out.affine_distance;
    if (gap <= stop || it % 50 == 0) {
      const Matrix g = engine.gamma_of(x);
      GammaCheck chk = check_gamma(prob, g, task.cone, cfg.eps_psd);
      out.last = GammaWitness{g, d};
      out.check = chk;
      if (chk.ok) {
        out.status = FeasibilityStatus::Feasible;
        out.gamma = GammaWitness{g, d};
        out.cone_distance = (x - engine.project_cone(x)).norm();
        return out;
      }
    }
    if (it == cfg.stall_start) window_gap = gap;
    if (it > cfg.stall_start && (it - cfg.stall_start) % cfg.stall_window == 0) {
      if (gap > window_gap * (1.0 - cfg.stall_ratio)) {
        out.stalled = true;
        break;
      }
      window_gap = gap;
    }
  }
  const Matrix g = engine.gamma_of(x);
  out.last = GammaWitness{g, d};
  out.check = check_gamma(prob, g, task.cone, cfg.eps_psd);
  out.cone_distance = (x - engine.project_cone(x)).norm();

  // No interior, or too thin for Dykstra: try the barrier fallback.
  if (const auto polished = detail::BarrierPolish(task, 0.5 * slack_threshold(prob, cfg.eps_psd)).run()) {
    const GammaCheck chk = check_gamma(prob, *polished, task.cone, cfg.eps_psd);
    if (chk.ok) {
      out.status = FeasibilityStatus::Feasible;
      out.gamma = GammaWitness{*polished, d};
      out.last = *out.gamma;
      out.check = chk;
      out.polished = true;
    }
  }
  return out;
}

}  // namespace gmcvx
