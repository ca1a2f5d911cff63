#pragma once

// Testing convex order with concrete convex functions: exact Gaussian
// expectations where they exist, Monte Carlo with confidence intervals
// elsewhere. A Holds from here is evidence, never proof.

#include <cmath>
#include <numbers>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "gmcvx/conditions/directional.hpp"
#include "gmcvx/conditions/dominance.hpp"
#include "gmcvx/parallel.hpp"
#include "gmcvx/problem.hpp"
#include "gmcvx/rng.hpp"
#include "gmcvx/verdict.hpp"

namespace gmcvx {

struct Gaussian {
  Vector mean;
  SymMat cov;
};

struct GaussianMixture {
  std::vector<double> p;
  std::vector<Gaussian> parts;
};

inline GaussianMixture mixture_of(const MixtureProblem& prob) {
  GaussianMixture m;
  m.p = prob.p;
  for (Index i = 0; i < prob.n(); ++i) m.parts.push_back({prob.means[static_cast<size_t>(i)], prob.cov(i)});
  return m;
}

inline Gaussian target_of(const MixtureProblem& prob) { return {Vector::Zero(prob.d), prob.target}; }

// ---- test functions ----

struct AbsLinear {  // c |xi' x|
  Vector xi;
  double c = 1.0;
};
struct ExpLinear {  // exp(lambda xi' x)
  double lambda = 1.0;
  Vector xi;
};
struct Quadratic {  // (x - x0)' M (x - x0) + c
  SymMat m;
  Vector x0;
  double c = 0.0;
};
struct MaxAffine {  // max_k (a_k' x + b_k)
  std::vector<Vector> slopes;
  std::vector<double> intercepts;
};

using TestFunction = std::variant<AbsLinear, ExpLinear, Quadratic, MaxAffine>;

inline bool has_closed_form(const TestFunction& f) { return !std::holds_alternative<MaxAffine>(f); }

inline std::string describe(const TestFunction& f) {
  struct V {
    std::string operator()(const AbsLinear&) const { return "abs-linear"; }
    std::string operator()(const ExpLinear& e) const { return "exp(lambda=" + std::to_string(e.lambda) + ")"; }
    std::string operator()(const Quadratic&) const { return "quadratic"; }
    std::string operator()(const MaxAffine& m) const {
      return "max-affine(" + std::to_string(m.slopes.size()) + ")";
    }
  };
  return std::visit(V{}, f);
}

inline double evaluate(const TestFunction& f, const Vector& x) {
  struct V {
    const Vector& x;
    double operator()(const AbsLinear& a) const { return a.c * std::abs(a.xi.dot(x)); }
    double operator()(const ExpLinear& e) const { return std::exp(e.lambda * e.xi.dot(x)); }
    double operator()(const Quadratic& q) const {
      const Vector r = x - q.x0;
      return r.dot(q.m.mat() * r) + q.c;
    }
    double operator()(const MaxAffine& m) const {
      double best = -std::numeric_limits<double>::infinity();
      for (size_t k = 0; k < m.slopes.size(); ++k) best = std::max(best, m.slopes[k].dot(x) + m.intercepts[k]);
      return best;
    }
  };
  return std::visit(V{x}, f);
}

/// E|Y| for Y ~ N(mu, s^2).
inline double abs_normal_mean(double mu, double s) {
  if (s <= 0.0) return std::abs(mu);
  return s * std::sqrt(2.0 / std::numbers::pi) * std::exp(-mu * mu / (2.0 * s * s)) +
         mu * std::erf(mu / (s * std::numbers::sqrt2));
}

/// Exact expectation under a Gaussian law; nullopt for MaxAffine.
inline std::optional<double> exact_expectation(const Gaussian& law, const TestFunction& f) {
  struct V {
    const Gaussian& g;
    std::optional<double> operator()(const AbsLinear& a) const {
      const double mu = a.xi.dot(g.mean);
      const double s = std::sqrt(std::max(0.0, a.xi.dot(g.cov.mat() * a.xi)));
      return a.c * abs_normal_mean(mu, s);
    }
    std::optional<double> operator()(const ExpLinear& e) const {
      const double mu = e.xi.dot(g.mean);
      const double v = e.xi.dot(g.cov.mat() * e.xi);
      return std::exp(e.lambda * mu + 0.5 * e.lambda * e.lambda * v);
    }
    std::optional<double> operator()(const Quadratic& q) const {
      const Vector r = g.mean - q.x0;
      return (q.m.mat() * g.cov.mat()).trace() + r.dot(q.m.mat() * r) + q.c;
    }
    std::optional<double> operator()(const MaxAffine&) const { return std::nullopt; }
  };
  return std::visit(V{law}, f);
}

/// log E exp(lambda xi' X), kept separate so large exponents compare safely.
inline double log_exp_expectation(const Gaussian& law, const ExpLinear& e) {
  return e.lambda * e.xi.dot(law.mean) + 0.5 * e.lambda * e.lambda * e.xi.dot(law.cov.mat() * e.xi);
}

inline double log_exp_expectation(const GaussianMixture& mix, const ExpLinear& e) {
  std::vector<double> terms;
  double top = -std::numeric_limits<double>::infinity();
  for (size_t i = 0; i < mix.parts.size(); ++i) {
    terms.push_back(std::log(mix.p[i]) + log_exp_expectation(mix.parts[i], e));
    top = std::max(top, terms.back());
  }
  double acc = 0.0;
  for (double t : terms) acc += std::exp(t - top);
  return top + std::log(acc);
}

inline std::optional<double> exact_expectation(const GaussianMixture& mix, const TestFunction& f) {
  double acc = 0.0;
  for (size_t i = 0; i < mix.parts.size(); ++i) {
    auto v = exact_expectation(mix.parts[i], f);
    if (!v) return std::nullopt;
    acc += mix.p[i] * *v;
  }
  return acc;
}

// ---- Monte Carlo ----

struct McConfig {
  std::size_t samples = 20000;
  std::uint64_t seed = 1;
  double z = 2.5758293035489;  // two-sided 99%
};

struct McEstimate {
  double mean = 0.0;
  double std_error = 0.0;
};

/// Spectral square root factor used for sampling (rank-truncated).
inline Matrix sampling_factor(const SymMat& cov) { return sqrt_psd(psd_part(cov)).mat(); }

inline McEstimate mc_expectation(const Gaussian& law, const TestFunction& f, std::size_t samples,
                                 CounterRng& rng) {
  const Matrix r = sampling_factor(law.cov);
  double s1 = 0.0, s2 = 0.0;
  for (std::size_t k = 0; k < samples; ++k) {
    const double v = evaluate(f, law.mean + r * rng.normal_vector(law.mean.size()));
    s1 += v;
    s2 += v * v;
  }
  const double nn = static_cast<double>(samples);
  const double mean = s1 / nn;
  const double var = std::max(0.0, s2 / nn - mean * mean);
  return {mean, std::sqrt(var / nn)};
}

inline McEstimate mc_expectation(const GaussianMixture& mix, const TestFunction& f, std::size_t samples,
                                 CounterRng& rng) {
  std::vector<Matrix> roots;
  for (const auto& part : mix.parts) roots.push_back(sampling_factor(part.cov));
  std::vector<double> cdf;
  double acc = 0.0;
  for (double w : mix.p) cdf.push_back(acc += w);
  double s1 = 0.0, s2 = 0.0;
  for (std::size_t k = 0; k < samples; ++k) {
    const double u = rng.uniform() * acc;
    size_t i = 0;
    while (i + 1 < cdf.size() && u > cdf[i]) ++i;
    const auto& part = mix.parts[i];
    const double v = evaluate(f, part.mean + roots[i] * rng.normal_vector(part.mean.size()));
    s1 += v;
    s2 += v * v;
  }
  const double nn = static_cast<double>(samples);
  const double mean = s1 / nn;
  const double var = std::max(0.0, s2 / nn - mean * mean);
  return {mean, std::sqrt(var / nn)};
}

// ---- suites ----

inline std::vector<Vector> quasi_uniform_directions(Index d, int count, std::uint64_t seed) {
  std::vector<Vector> out;
  if (d == 1) {
    out.push_back(Vector::Ones(1));
    return out;
  }
  if (d == 2) {
    for (int k = 0; k < count; ++k) out.push_back(detail::angle_vector(std::numbers::pi * k / count));
    return out;
  }
  CounterRng rng(seed, 101);
  for (int k = 0; k < count; ++k) out.push_back(rng.unit_vector(d));
  return out;
}

/// 32 |xi' x| directions, 8 exponentials along the worst of them, 8 random
/// quadratics and 10 random max-affine functions.
inline std::vector<TestFunction> default_suite(const Gaussian& lhs, const GaussianMixture& rhs,
                                               std::uint64_t seed = 7) {
  const Index d = lhs.mean.size();
  std::vector<TestFunction> suite;
  const std::vector<Vector> dirs = quasi_uniform_directions(d, 32, seed);
  Vector worst = dirs.front();
  double worst_gap = std::numeric_limits<double>::infinity();
  for (const auto& xi : dirs) {
    AbsLinear f{xi, std::sqrt(std::numbers::pi / 2.0)};
    const double gap = *exact_expectation(rhs, f) - *exact_expectation(lhs, f);
    if (gap < worst_gap) {
      worst_gap = gap;
      worst = xi;
    }
    suite.emplace_back(std::move(f));
  }
  for (double lam : {0.5, 1.0, 2.0, 4.0}) {
    suite.emplace_back(ExpLinear{lam, worst});
    suite.emplace_back(ExpLinear{-lam, worst});
  }
  CounterRng rng(seed, 202);
  for (int k = 0; k < 8; ++k) suite.emplace_back(Quadratic{random_psd(d, rng), rng.normal_vector(d), 0.0});
  for (int k = 0; k < 10; ++k) {
    MaxAffine m;
    const int pieces = 2 + k % 5;
    for (int j = 0; j < pieces; ++j) {
      m.slopes.push_back(rng.normal_vector(d));
      m.intercepts.push_back(rng.normal());
    }
    suite.emplace_back(std::move(m));
  }
  return suite;
}

/// lhs <=cx rhs tested on every function of the suite. Exact comparisons use
/// a relative tolerance of 1e-10; Monte Carlo ones need the 99% interval of
/// the difference to lie entirely on the wrong side.
inline Verdict test_convex_order(const Gaussian& lhs, const GaussianMixture& rhs,
                                 const std::vector<TestFunction>& suite, const McConfig& mc = {}) {
  struct Row {
    double gap = 0.0;  // rhs - lhs (log-domain for exponentials)
    bool violated = false;
    bool exact = true;
    double lhs = 0.0;
    double rhs = 0.0;
  };
  std::vector<Row> rows(suite.size());
  parallel_for(suite.size(), [&](std::size_t k) {
    const TestFunction& f = suite[k];
    Row& row = rows[k];
    if (const auto* e = std::get_if<ExpLinear>(&f)) {
      row.lhs = log_exp_expectation(lhs, *e);
      row.rhs = log_exp_expectation(rhs, *e);
      row.gap = row.rhs - row.lhs;
      row.violated = row.gap < -1e-10 * (1.0 + std::abs(row.lhs));
    } else if (has_closed_form(f)) {
      row.lhs = *exact_expectation(lhs, f);
      row.rhs = *exact_expectation(rhs, f);
      row.gap = row.rhs - row.lhs;
      row.violated = row.gap < -1e-10 * (1.0 + std::abs(row.lhs) + std::abs(row.rhs));
    } else {
      row.exact = false;
      CounterRng rl(mc.seed, 2 * k);
      CounterRng rr(mc.seed, 2 * k + 1);
      const McEstimate a = mc_expectation(lhs, f, mc.samples, rl);
      const McEstimate b = mc_expectation(rhs, f, mc.samples, rr);
      row.lhs = a.mean;
      row.rhs = b.mean;
      row.gap = b.mean - a.mean;
      const double se = std::hypot(a.std_error, b.std_error);
      row.violated = row.gap + mc.z * se < 0.0;
    }
  });

  Verdict v;
  v.evidence_only = true;
  v.margin = std::numeric_limits<double>::infinity();
  int exact_count = 0;
  for (size_t k = 0; k < rows.size(); ++k) {
    if (rows[k].exact) {
      ++exact_count;
      v.margin = std::min(v.margin, rows[k].gap);
    }
  }
  v.diagnostics["functions"] = static_cast<double>(suite.size());
  v.diagnostics["exact_functions"] = exact_count;
  // Exact violations take precedence over statistical ones.
  for (int pass = 0; pass < 2; ++pass) {
    for (size_t k = 0; k < rows.size(); ++k) {
      if (!rows[k].violated || rows[k].exact != (pass == 0)) continue;
      v.status = Status::Fails;
      v.evidence_only = false;
      v.margin = std::min(v.margin, rows[k].gap);
      v.witness = FunctionWitness{describe(suite[k]), rows[k].lhs, rows[k].rhs};
      v.diagnostics["function_index"] = static_cast<double>(k);
      v.diagnostics["mc_violation"] = rows[k].exact ? 0.0 : 1.0;
      return v;
    }
  }
  v.status = Status::Holds;
  v.notes.push_back("no violation on the test suite (necessary-condition evidence only)");
  return v;
}

/// Convex order N(0, Sigma) <=cx mixture tested on the default suite.
/// `extra` is appended to the default suite, e.g. |xi' x| along a direction
/// already known to be bad.
inline Verdict test_problem_order(const MixtureProblem& prob, const McConfig& mc = {},
                                  const std::vector<TestFunction>& extra = {}) {
  const Gaussian lhs = target_of(prob);
  const GaussianMixture rhs = mixture_of(prob);
  std::vector<TestFunction> suite = default_suite(lhs, rhs, mc.seed);
  suite.insert(suite.end(), extra.begin(), extra.end());
  return test_convex_order(lhs, rhs, suite, mc);
}

/// Exponential falsifier of mixture <=cx N(0, Sigma): when Sigma_i exceeds
/// Sigma along xi by `gap`, lambda = 2 sqrt(ln(1/p_i)) / sqrt(gap) gives
/// sum_j p_j e^{lambda^2 xi' Sigma_j xi / 2} > e^{lambda^2 xi' Sigma xi / 2}.
inline Verdict test_mixture_dominated(const MixtureProblem& prob, double eps = Tolerances{}.eps_psd) {
  require_zero_means(prob);
  const Verdict dom = check_dominated_by_single(prob, eps);
  Verdict v;
  v.evidence_only = true;
  v.margin = dom.margin;
  if (dom.status == Status::Holds) {
    v.status = Status::Holds;
    return v;
  }
  const IndexWitness& w = *dom.as<IndexWitness>();
  const Vector xi = w.xi.normalized();
  const double gap = xi.dot((prob.cov(w.index) - prob.target).mat() * xi);
  const double lambda = 2.0 * std::sqrt(std::log(1.0 / prob.weight(w.index))) / std::sqrt(gap);
  const ExpLinear f{lambda, xi};
  ExpWitness ew;
  ew.index = w.index;
  ew.xi = xi;
  ew.lambda = lambda;
  ew.log_lhs = log_exp_expectation(target_of(prob), f);
  ew.log_rhs = log_exp_expectation(mixture_of(prob), f);
  v.margin = ew.log_lhs - ew.log_rhs;
  v.status = ew.log_rhs > ew.log_lhs ? Status::Fails : Status::Unknown;
  v.evidence_only = false;
  v.witness = ew;
  return v;
}

// ---- radial noise ----

enum class RadialKind { Gaussian, UniformSphere, UniformBall };

struct RadialNoise {
  Index q = 1;
  RadialKind kind = RadialKind::Gaussian;

  Vector sample(CounterRng& rng) const {
    switch (kind) {
      case RadialKind::Gaussian: return rng.normal_vector(q);
      case RadialKind::UniformSphere: return rng.unit_vector(q);
      case RadialKind::UniformBall:
        return rng.unit_vector(q) * std::pow(rng.uniform(), 1.0 / static_cast<double>(q));
    }
    return rng.normal_vector(q);
  }

  /// E|Z_1|.
  std::optional<double> abs_first_moment() const {
    const double qd = static_cast<double>(q);
    const double sphere = std::exp(std::lgamma(qd / 2.0) - std::lgamma((qd + 1.0) / 2.0)) / std::sqrt(std::numbers::pi);
    switch (kind) {
      case RadialKind::Gaussian: return std::sqrt(2.0 / std::numbers::pi);
      case RadialKind::UniformSphere: return sphere;
      case RadialKind::UniformBall: return qd / (qd + 1.0) * sphere;
    }
    return std::nullopt;
  }
};

/// L(sigma Z) <=cx sum p_i L(sigma_i Z) requires the square-root condition on
/// sigma sigma^T and sigma_i sigma_i^T; that necessary part is decided
/// exactly, and E|xi' sigma Z| along the worst direction is cross-checked by
/// Monte Carlo against |sigma^T xi| E|Z_1|.
inline Verdict radial_order_check(const Matrix& sigma, const std::vector<Matrix>& sigmas,
                                  const std::vector<double>& p, const RadialNoise& noise,
                                  const McConfig& mc = {}) {
  const Index d = sigma.rows();
  if (sigma.cols() != noise.q) throw Error(ErrorCode::DimensionMismatch, "sigma must be d x q");
  MixtureProblem prob;
  prob.d = d;
  prob.p = p;
  prob.target = SymMat::from_upper(sigma * sigma.transpose());
  for (const auto& s : sigmas) {
    if (s.rows() != d || s.cols() != noise.q) throw Error(ErrorCode::DimensionMismatch, "sigma_i shape");
    prob.covs.push_back(SymMat::from_upper(s * s.transpose()));
    prob.means.push_back(Vector::Zero(d));
  }
  Verdict v = check_inegsqrt(prob);
  v.evidence_only = v.status == Status::Holds;
  const auto* dw = v.as<DirectionWitness>();
  if (!dw) return v;
  const Vector xi = dw->xi;

  CounterRng rng(mc.seed, 303);
  double lhs = 0.0, rhs = 0.0, lhs2 = 0.0, rhs2 = 0.0;
  for (std::size_t k = 0; k < mc.samples; ++k) {
    const Vector z = noise.sample(rng);
    const double a = std::abs(xi.dot(sigma * z));
    double b = 0.0;
    for (size_t i = 0; i < sigmas.size(); ++i) b += p[i] * std::abs(xi.dot(sigmas[i] * z));
    lhs += a;
    lhs2 += a * a;
    rhs += b;
    rhs2 += b * b;
  }
  const double nn = static_cast<double>(mc.samples);
  lhs /= nn;
  rhs /= nn;
  v.diagnostics["mc_lhs"] = lhs;
  v.diagnostics["mc_rhs"] = rhs;
  v.diagnostics["mc_lhs_se"] = std::sqrt(std::max(0.0, lhs2 / nn - lhs * lhs) / nn);
  v.diagnostics["mc_rhs_se"] = std::sqrt(std::max(0.0, rhs2 / nn - rhs * rhs) / nn);
  if (const auto m1 = noise.abs_first_moment()) {
    double exact_rhs = 0.0;
    for (size_t i = 0; i < sigmas.size(); ++i) exact_rhs += p[i] * (sigmas[i].transpose() * xi).norm() * *m1;
    v.diagnostics["exact_lhs"] = (sigma.transpose() * xi).norm() * *m1;
    v.diagnostics["exact_rhs"] = exact_rhs;
  }
  return v;
}

// ---- exponential minimizer ----

/// x1 -> p1 e^{l x1 + l^2 s1^2/2} + (1-p1) e^{-l p1 x1/(1-p1) + l^2 s2^2/2},
/// the exponential moment of the centered two-point mixture.
inline double exponential_mixture_moment(double x1, double lambda, double p1, double s1, double s2) {
  return p1 * std::exp(lambda * x1 + 0.5 * lambda * lambda * s1 * s1) +
         (1.0 - p1) * std::exp(-lambda * p1 * x1 / (1.0 - p1) + 0.5 * lambda * lambda * s2 * s2);
}

/// Sign of F(a) - F(b) for the function above, computed from expm1 of the
/// increments so that the comparison stays meaningful next to the minimum.
inline int exponential_moment_compare(double a, double b, double lambda, double p1, double s1, double s2) {
  const double mu = lambda * p1 / (1.0 - p1);
  const double u = std::log(p1) + lambda * b + 0.5 * lambda * lambda * s1 * s1;
  const double w = std::log(1.0 - p1) - mu * b + 0.5 * lambda * lambda * s2 * s2;
  const double top = std::max(u, w);
  const double diff = std::exp(u - top) * std::expm1(lambda * (a - b)) + std::exp(w - top) * std::expm1(-mu * (a - b));
  return (diff > 0) - (diff < 0);
}

/// Golden-section minimizer of the exponential moment.
inline double minimize_exponential_mixture(double lambda, double p1, double s1, double s2) {
  const double span = 10.0 + std::abs(lambda) * (s1 * s1 + s2 * s2);
  double a = -span, b = span;
  const double g = (std::sqrt(5.0) - 1.0) / 2.0;
  double c = b - g * (b - a), dd = a + g * (b - a);
  for (int it = 0; it < 300 && b - a > 1e-15 * span; ++it) {
    if (exponential_moment_compare(c, dd, lambda, p1, s1, s2) < 0) {
      b = dd;
      dd = c;
      c = b - g * (b - a);
    } else {
      a = c;
      c = dd;
      dd = a + g * (b - a);
    }
  }
  return 0.5 * (a + b);
}

}  // namespace gmcvx
