#pragma once

// The square-root condition
//   sqrt(xi' Sigma xi) <= sum_i p_i sqrt(xi' Sigma_i xi)   for all xi,
// decided by minimizing its defect h over the unit sphere.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <vector>

#include "gmcvx/problem.hpp"
#include "gmcvx/rng.hpp"
#include "gmcvx/verdict.hpp"

namespace gmcvx {

struct InegsqrtConfig {
  int random_starts = 64;
  int grid_points = 720;      // angular grid, d = 2 only
  int subgradient_steps = 200;
  int refine_starts = 4;      // best starts handed to the line-search refinement
  int alpha_points = 400;     // n = 2 only
  double alpha_min = 1e-6;
  double alpha_max = 1e6;
  double rel_tol = 1e-10;     // decision tolerance, times sqrt(problem scale)
  std::uint64_t seed = 0x5eed;
};

/// h(xi) = sum p_i sqrt(xi' Sigma_i xi) - sqrt(xi' Sigma xi); negative values
/// refute the condition.
inline double inegsqrt_defect(const MixtureProblem& prob, const Vector& xi) {
  double acc = 0.0;
  for (Index i = 0; i < prob.n(); ++i) {
    acc += prob.weight(i) * std::sqrt(std::max(0.0, xi.dot(prob.cov(i).mat() * xi)));
  }
  return acc - std::sqrt(std::max(0.0, xi.dot(prob.target.mat() * xi)));
}

/// p1^2 S1 + p2^2 S2 + p1 p2 (alpha S1 + S2 / alpha) - Sigma; n = 2 only.
inline SymMat skew_form(const MixtureProblem& prob, double alpha) {
  const double p1 = prob.weight(0);
  const double p2 = prob.weight(1);
  return prob.cov(0) * (p1 * p1 + p1 * p2 * alpha) + prob.cov(1) * (p2 * p2 + p1 * p2 / alpha) -
         prob.target;
}

namespace detail {

struct SphereEval {
  double value;
  Vector grad;  // Euclidean subgradient, homogeneous of degree 0
};

inline SphereEval defect_with_grad(const MixtureProblem& prob, const Vector& xi) {
  SphereEval out{0.0, Vector::Zero(prob.d)};
  for (Index i = 0; i < prob.n(); ++i) {
    const Vector sx = prob.cov(i).mat() * xi;
    const double qv = xi.dot(sx);
    if (qv > 0.0) {
      const double r = std::sqrt(qv);
      out.value += prob.weight(i) * r;
      out.grad += (prob.weight(i) / r) * sx;
    }
  }
  const Vector sx = prob.target.mat() * xi;
  const double qv = xi.dot(sx);
  if (qv > 0.0) {
    const double r = std::sqrt(qv);
    out.value -= r;
    out.grad -= sx / r;
  }
  return out;
}

// Normalized subgradient steps of length c/k on the sphere; returns the best
// point visited.
inline Vector sphere_subgradient(const MixtureProblem& prob, Vector xi, int steps, double& best_val) {
  xi.normalize();
  Vector best = xi;
  best_val = inegsqrt_defect(prob, xi);
  for (int k = 1; k <= steps; ++k) {
    const SphereEval e = defect_with_grad(prob, xi);
    if (e.value < best_val) {
      best_val = e.value;
      best = xi;
    }
    Vector t = e.grad - e.grad.dot(xi) * xi;
    const double tn = t.norm();
    if (tn < 1e-15) break;
    xi = xi - (0.5 / k) * (t / tn);
    xi.normalize();
  }
  const double v = inegsqrt_defect(prob, xi);
  if (v < best_val) {
    best_val = v;
    best = xi;
  }
  return best;
}

// Riemannian gradient descent with Armijo backtracking.
inline Vector sphere_armijo(const MixtureProblem& prob, Vector xi, double& val, int iters = 200) {
  xi.normalize();
  val = inegsqrt_defect(prob, xi);
  double step = 0.5;
  for (int it = 0; it < iters; ++it) {
    const SphereEval e = defect_with_grad(prob, xi);
    const Vector t = e.grad - e.grad.dot(xi) * xi;
    const double tn2 = t.squaredNorm();
    if (tn2 < 1e-30) break;
    bool moved = false;
    for (int bt = 0; bt < 40; ++bt) {
      Vector cand = (xi - step * t).normalized();
      const double cv = inegsqrt_defect(prob, cand);
      if (cv <= val - 1e-4 * step * tn2) {
        xi = cand;
        val = cv;
        moved = true;
        step *= 2.0;
        break;
      }
      step *= 0.5;
    }
    if (!moved) break;
  }
  return xi;
}

template <class F>
double golden_section_min(F&& f, double lo, double hi, int iters = 100, double* arg = nullptr) {
  const double g = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = lo, b = hi;
  double c = b - g * (b - a), dd = a + g * (b - a);
  double fc = f(c), fd = f(dd);
  for (int it = 0; it < iters && (b - a) > 1e-15 * (1.0 + std::abs(a) + std::abs(b)); ++it) {
    if (fc < fd) {
      b = dd;
      dd = c;
      fd = fc;
      c = b - g * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = dd;
      fc = fd;
      dd = a + g * (b - a);
      fd = f(dd);
    }
  }
  const double x = fc < fd ? c : dd;
  if (arg) *arg = x;
  return std::min(fc, fd);
}

inline Vector angle_vector(double t) {
  Vector v(2);
  v << std::cos(t), std::sin(t);
  return v;
}

struct AlphaScan {
  double alpha = 1.0;
  double min_eigenvalue = std::numeric_limits<double>::infinity();
  Vector xi;
};

inline AlphaScan alpha_scan(const MixtureProblem& prob, const InegsqrtConfig& cfg) {
  AlphaScan out;
  const double l0 = std::log(cfg.alpha_min);
  const double l1 = std::log(cfg.alpha_max);
  const int m = std::max(2, cfg.alpha_points);
  int best_k = 0;
  for (int k = 0; k < m; ++k) {
    const double la = l0 + (l1 - l0) * k / (m - 1);
    const double v = min_eigenvalue(skew_form(prob, std::exp(la)));
    if (v < out.min_eigenvalue) {
      out.min_eigenvalue = v;
      best_k = k;
    }
  }
  const double h = (l1 - l0) / (m - 1);
  const double lo = l0 + h * std::max(0, best_k - 1);
  const double hi = l0 + h * std::min(m - 1, best_k + 1);
  double arg = l0 + h * best_k;
  const double refined = golden_section_min(
      [&](double la) { return min_eigenvalue(skew_form(prob, std::exp(la))); }, lo, hi, 80, &arg);
  if (refined < out.min_eigenvalue) out.min_eigenvalue = refined;
  else arg = l0 + h * best_k;
  out.alpha = std::exp(arg);
  const SpectralDecomp e = eigen_sym(skew_form(prob, out.alpha));
  out.min_eigenvalue = e.min_eigenvalue();
  out.xi = e.eigenvectors.col(0);
  return out;
}

}  // namespace detail

inline double inegsqrt_tolerance(const MixtureProblem& prob, const InegsqrtConfig& cfg = {}) {
  return cfg.rel_tol * std::sqrt(std::max(prob.scale(), 1e-300));
}

/// Decides the square-root condition. Fails carries a DirectionWitness whose
/// defect is below -tol; Holds reports the smallest defect found as margin.
inline Verdict check_inegsqrt(const MixtureProblem& prob, const InegsqrtConfig& cfg = {}) {
  const Index d = prob.d;
  const double tol = inegsqrt_tolerance(prob, cfg);

  struct Start {
    Vector xi;
    double value;
  };
  std::vector<Start> starts;
  auto add_start = [&](const Vector& v) {
    if (v.norm() < 1e-300) return;
    double val = 0.0;
    Vector best = detail::sphere_subgradient(prob, v, cfg.subgradient_steps, val);
    starts.push_back({best, val});
  };

  if (d == 1) {
    Vector one = Vector::Ones(1);
    starts.push_back({one, inegsqrt_defect(prob, one)});
  } else {
    for (const SymMat* s : [&] {
           std::vector<const SymMat*> v{&prob.target};
           for (const auto& c : prob.covs) v.push_back(&c);
           return v;
         }()) {
      const SpectralDecomp e = eigen_sym(*s);
      for (Index k = 0; k < d; ++k) add_start(e.eigenvectors.col(k));
    }
    for (int k = 0; k < cfg.random_starts; ++k) {
      CounterRng rng(cfg.seed, static_cast<std::uint64_t>(k));
      add_start(rng.unit_vector(d));
    }
  }

  auto by_value = [](const Start& a, const Start& b) { return a.value < b.value; };
  std::sort(starts.begin(), starts.end(), by_value);
  const int refine = std::min<int>(cfg.refine_starts, static_cast<int>(starts.size()));
  for (int k = 0; k < refine && d > 1; ++k) {
    double val = 0.0;
    Vector xi = detail::sphere_armijo(prob, starts[static_cast<size_t>(k)].xi, val);
    if (val < starts[static_cast<size_t>(k)].value) starts[static_cast<size_t>(k)] = {xi, val};
  }

  if (d == 2 && cfg.grid_points > 0) {
    const int m = cfg.grid_points;
    const double step = std::numbers::pi / m;
    int best_k = 0;
    double best = std::numeric_limits<double>::infinity();
    for (int k = 0; k < m; ++k) {
      const double v = inegsqrt_defect(prob, detail::angle_vector(k * step));
      if (v < best) {
        best = v;
        best_k = k;
      }
    }
    double arg = best_k * step;
    const double refined = detail::golden_section_min(
        [&](double t) { return inegsqrt_defect(prob, detail::angle_vector(t)); },
        (best_k - 1) * step, (best_k + 1) * step, 100, &arg);
    if (refined < best) starts.push_back({detail::angle_vector(arg), refined});
    else starts.push_back({detail::angle_vector(best_k * step), best});
  }
  std::sort(starts.begin(), starts.end(), by_value);

  const Start& best = starts.front();
  Verdict v;
  v.margin = best.value;
  v.diagnostics["starts"] = static_cast<double>(starts.size());
  v.diagnostics["tolerance"] = tol;

  if (best.value < -tol && inegsqrt_defect(prob, best.xi) < -tol) {
    v.status = Status::Fails;
    v.witness = DirectionWitness{best.xi, best.value};
    return v;
  }

  if (prob.n() == 2) {
    const detail::AlphaScan scan = detail::alpha_scan(prob, cfg);
    v.diagnostics["alpha"] = scan.alpha;
    v.diagnostics["alpha_min_eigenvalue"] = scan.min_eigenvalue;
    const double ltol = cfg.rel_tol * std::max(prob.scale(), 1e-300);
    if (scan.min_eigenvalue < -ltol) {
      const double hv = inegsqrt_defect(prob, scan.xi.normalized());
      if (hv < -tol) {
        v.status = Status::Fails;
        v.margin = std::min(best.value, hv);
        v.witness = DirectionWitness{scan.xi.normalized(), hv};
        v.notes.push_back("refuted by the alpha scan");
        return v;
      }
      if (best.value > tol) {
        v.status = Status::Unknown;
        v.notes.push_back("alpha scan and sphere search disagree");
        return v;
      }
    }
  }

  v.status = Status::Holds;
  v.boundary = std::abs(best.value) <= tol;
  v.witness = DirectionWitness{best.xi, best.value};
  return v;
}

}  // namespace gmcvx
