#pragma once

// Martingale kernel from a coupling Gamma: for x ~ N(0, Sigma),
//   z ~ N(x, A Gamma A^T - Sigma),  w ~ law of X ~ N(0, Gamma) given A X = z,
//   i ~ p,  y = w_i + x_i.
// Then E[y | x] = x and y follows the mixture.

#include <functional>
#include <string>
#include <vector>

#include "gmcvx/conditions/inecov.hpp"
#include "gmcvx/gaussian_blocks.hpp"
#include "gmcvx/parallel.hpp"
#include "gmcvx/rng.hpp"

namespace gmcvx {

struct MartingaleKernel {
  MixtureProblem prob;
  GammaWitness gamma;
  Matrix mean_map;        // nd x d: Gamma A^T pinv(A Gamma A^T)
  SymMat cond_cov;        // Gamma - Gamma A^T pinv(A Gamma A^T) A Gamma
  SymMat residual_cov;    // A Gamma A^T - Sigma
  Matrix cond_root;       // PSD square roots used for sampling
  Matrix residual_root;
  Matrix target_root;
  std::vector<double> cdf;  // cumulative weights
};

struct CouplingSample {
  Vector x;
  Index i = 0;  // zero-based component
  Vector y;
};

/// Throws InvalidGamma when Gamma does not satisfy condition (3) and
/// NonCenteredMeans when sum p_i x_i != 0.
inline MartingaleKernel build_kernel(const MixtureProblem& prob, const GammaWitness& gw,
                                     const Tolerances& tol = {}) {
  if (!prob.centered()) throw Error(ErrorCode::NonCenteredMeans, "sum p_i x_i must vanish");
  const GammaCheck chk = validate_gamma(prob, gw.gamma, tol.eps_psd);
  if (!chk.ok) throw Error(ErrorCode::InvalidGamma, chk.reason);

  const Index d = prob.d;
  const Index n = prob.n();
  MartingaleKernel k;
  k.prob = prob;
  k.gamma = GammaWitness{enforce_blocks(prob, gw.gamma), d};
  const Matrix& g = k.gamma.gamma;

  Matrix gat = Matrix::Zero(n * d, d);  // Gamma A^T
  for (Index j = 0; j < n; ++j) gat += prob.weight(j) * g.middleCols(j * d, d);
  const SymMat v = a_gamma_at(g, prob.p, d);
  const SymMat vinv = pinv_psd(psd_part(v), tol);
  k.mean_map = gat * vinv.mat();
  k.cond_cov = SymMat::from_upper(g - k.mean_map * gat.transpose());
  k.residual_cov = v - prob.target;

  const double threshold = -tol.eps_psd * (1.0 + prob.scale());
  if (min_eigenvalue(k.cond_cov) < threshold * 10.0) {
    throw Error(ErrorCode::InvalidGamma, "conditional covariance is not PSD");
  }
  if (min_eigenvalue(k.residual_cov) < threshold) {
    throw Error(ErrorCode::InvalidGamma, "residual covariance is not PSD");
  }
  k.cond_root = sqrt_psd(psd_part(k.cond_cov)).mat();
  k.residual_root = sqrt_psd(psd_part(k.residual_cov)).mat();
  k.target_root = sqrt_psd(psd_part(prob.target)).mat();
  double acc = 0.0;
  for (double w : prob.p) k.cdf.push_back(acc += w);
  return k;
}

/// One transition of the kernel from x.
inline CouplingSample sample(const MartingaleKernel& k, const Vector& x, CounterRng& rng) {
  const Index d = k.prob.d;
  const Vector z = x + k.residual_root * rng.normal_vector(d);
  const Vector w = k.mean_map * z + k.cond_root * rng.normal_vector(k.cond_root.rows());
  const double u = rng.uniform() * k.cdf.back();
  Index i = 0;
  while (i + 1 < static_cast<Index>(k.cdf.size()) && u > k.cdf[static_cast<size_t>(i)]) ++i;
  CouplingSample s;
  s.x = x;
  s.i = i;
  s.y = w.segment(i * d, d) + k.prob.means[static_cast<size_t>(i)];
  return s;
}

/// Joint draws (x, y) with x ~ N(0, Sigma). Sample j uses its own counter
/// stream, so the batch does not depend on the number of threads.
inline std::vector<CouplingSample> sample_batch(const MartingaleKernel& k, std::size_t count,
                                                std::uint64_t seed) {
  std::vector<CouplingSample> out(count);
  const std::size_t chunk = 1024;
  const std::size_t chunks = (count + chunk - 1) / chunk;
  parallel_for(chunks, [&](std::size_t c) {
    const std::size_t end = std::min(count, (c + 1) * chunk);
    for (std::size_t j = c * chunk; j < end; ++j) {
      CounterRng rng(seed, j);
      const Vector x = k.target_root * rng.normal_vector(k.prob.d);
      out[j] = sample(k, x, rng);
    }
  });
  return out;
}

/// Conditional draws from a fixed x.
inline std::vector<CouplingSample> sample_from(const MartingaleKernel& k, const Vector& x,
                                               std::size_t count, std::uint64_t seed) {
  std::vector<CouplingSample> out(count);
  parallel_for(count, [&](std::size_t j) {
    CounterRng rng(seed, j);
    out[j] = sample(k, x, rng);
  });
  return out;
}

/// Mean / covariance diagnostics of a joint batch: the y-moments against the
/// mixture, and martingale residuals E[(y - x) g(x)] for g = 1, x_k, x_k x_l,
/// each with its standard error.
struct CouplingDiagnostics {
  Vector y_mean;
  Matrix y_cov;
  Matrix y_cov_expected;
  Matrix y_cov_se;
  std::vector<std::string> residual_names;
  std::vector<double> residuals;
  std::vector<double> residual_se;
  double max_cov_z = 0.0;       // max |cov - expected| / se
  double max_residual_z = 0.0;  // max |residual| / se
};

inline CouplingDiagnostics coupling_diagnostics(const MixtureProblem& prob,
                                                const std::vector<CouplingSample>& batch) {
  const Index d = prob.d;
  const double m = static_cast<double>(batch.size());
  CouplingDiagnostics out;
  out.y_mean = Vector::Zero(d);
  for (const auto& s : batch) out.y_mean += s.y;
  out.y_mean /= m;
  // Covariance about the known mean 0 (sum p_i x_i = 0), with per-entry SE.
  out.y_cov = Matrix::Zero(d, d);
  Matrix sq = Matrix::Zero(d, d);
  for (const auto& s : batch) {
    const Matrix o = s.y * s.y.transpose();
    out.y_cov += o;
    sq += o.cwiseProduct(o);
  }
  out.y_cov /= m;
  out.y_cov_se = ((sq / m - out.y_cov.cwiseProduct(out.y_cov)).cwiseMax(0.0) / m).cwiseSqrt();
  out.y_cov_expected = Matrix::Zero(d, d);
  for (Index i = 0; i < prob.n(); ++i) {
    const Vector& xi = prob.means[static_cast<size_t>(i)];
    out.y_cov_expected += prob.weight(i) * (prob.cov(i).mat() + xi * xi.transpose());
  }
  for (Index r = 0; r < d; ++r) {
    for (Index c = 0; c < d; ++c) {
      const double se = std::max(out.y_cov_se(r, c), 1e-12 * (1.0 + std::abs(out.y_cov_expected(r, c))));
      out.max_cov_z = std::max(out.max_cov_z, std::abs(out.y_cov(r, c) - out.y_cov_expected(r, c)) / se);
    }
  }

  std::vector<std::pair<std::string, std::function<double(const Vector&)>>> tests;
  tests.emplace_back("1", [](const Vector&) { return 1.0; });
  for (Index a = 0; a < d; ++a) {
    tests.emplace_back("x" + std::to_string(a + 1), [a](const Vector& x) { return x(a); });
  }
  for (Index a = 0; a < d; ++a) {
    for (Index b = a; b < d; ++b) {
      tests.emplace_back("x" + std::to_string(a + 1) + "*x" + std::to_string(b + 1),
                         [a, b](const Vector& x) { return x(a) * x(b); });
    }
  }
  for (const auto& [name, g] : tests) {
    for (Index c = 0; c < d; ++c) {
      double s1 = 0.0, s2 = 0.0;
      for (const auto& s : batch) {
        const double v = (s.y(c) - s.x(c)) * g(s.x);
        s1 += v;
        s2 += v * v;
      }
      const double mean = s1 / m;
      const double se = std::sqrt(std::max(0.0, s2 / m - mean * mean) / m);
      out.residual_names.push_back("(y" + std::to_string(c + 1) + "-x" + std::to_string(c + 1) + ")*" + name);
      out.residuals.push_back(mean);
      out.residual_se.push_back(se);
      out.max_residual_z = std::max(out.max_residual_z, std::abs(mean) / std::max(se, 1e-300));
    }
  }
  return out;
}

}  // namespace gmcvx
