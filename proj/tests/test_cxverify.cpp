#include <gtest/gtest.h>

#include <numbers>

#include "gmcvx/cxverify.hpp"
#include "gmcvx/gallery.hpp"

using namespace gmcvx;
using gallery::sym2;

TEST(ExactExpectation, AbsLinearScaled) {
  CounterRng rng(1);
  const SymMat s = random_psd(3, rng);
  const Vector xi = rng.normal_vector(3);
  const Gaussian g{Vector::Zero(3), s};
  const auto e = exact_expectation(g, AbsLinear{xi, std::sqrt(std::numbers::pi / 2.0)});
  ASSERT_TRUE(e);
  EXPECT_NEAR(*e, std::sqrt(xi.dot(s.mat() * xi)), 1e-12);
}

TEST(ExactExpectation, Exponential) {
  Vector m(2), xi(2);
  m << 0.3, -1.0;
  xi << 0.6, 0.8;
  const SymMat s = sym2(2, 0.5, 1);
  const double lambda = 1.7;
  const auto e = exact_expectation(Gaussian{m, s}, ExpLinear{lambda, xi});
  ASSERT_TRUE(e);
  EXPECT_NEAR(*e, std::exp(lambda * xi.dot(m) + 0.5 * lambda * lambda * xi.dot(s.mat() * xi)), 1e-12);
}

TEST(ExactExpectation, QuadraticTrace) {
  const SymMat s = sym2(2, 0.5, 3);
  const auto e = exact_expectation(Gaussian{Vector::Zero(2), s}, Quadratic{SymMat::identity(2), Vector::Zero(2), 0.0});
  ASSERT_TRUE(e);
  EXPECT_NEAR(*e, 5.0, 1e-14);
  EXPECT_FALSE(exact_expectation(Gaussian{Vector::Zero(2), s}, MaxAffine{{Vector::Ones(2)}, {0.0}}));
}

TEST(ExactExpectation, MonteCarloAgrees) {
  Vector m(2);
  m << 0.5, -0.25;
  const Gaussian g{m, sym2(1.5, -0.4, 0.8)};
  Vector xi(2);
  xi << 1.0, 2.0;
  const std::vector<TestFunction> fs{AbsLinear{xi, 1.0}, ExpLinear{0.5, xi.normalized()},
                                     Quadratic{sym2(1, 0.2, 2), Vector::Ones(2), 0.5}};
  for (size_t k = 0; k < fs.size(); ++k) {
    CounterRng rng(77, k);
    const McEstimate est = mc_expectation(g, fs[k], 1000000, rng);
    EXPECT_LE(std::abs(est.mean - *exact_expectation(g, fs[k])), 5.0 * est.std_error) << describe(fs[k]);
  }
}

TEST(ConvexOrder, Example2Interior) {
  const MixtureProblem prob = gallery::example2(2.0, 1.0);
  const Gaussian lhs = target_of(prob);
  const GaussianMixture rhs = mixture_of(prob);
  const auto suite = default_suite(lhs, rhs, 5);
  EXPECT_GE(suite.size(), 50u);
  const Verdict v = test_convex_order(lhs, rhs, suite);
  EXPECT_EQ(v.status, Status::Holds);
  EXPECT_TRUE(v.evidence_only);
}

TEST(ConvexOrder, Example2ExteriorExactViolation) {
  const Verdict v = test_problem_order(gallery::example2(5.9, 0.0));
  ASSERT_EQ(v.status, Status::Fails);
  EXPECT_EQ(v.diagnostics.at("mc_violation"), 0.0);
  EXPECT_NE(v.as<FunctionWitness>(), nullptr);
}

TEST(ConvexOrder, IdenticalLaws) {
  const SymMat s = sym2(2, 0.5, 1);
  const Gaussian g{Vector::Zero(2), s};
  const GaussianMixture mix{{1.0}, {g}};
  const auto suite = default_suite(g, mix, 3);
  for (const auto& f : suite) {
    if (!has_closed_form(f)) continue;
    if (const auto* e = std::get_if<ExpLinear>(&f)) {
      EXPECT_NEAR(log_exp_expectation(g, *e), log_exp_expectation(mix, *e), 1e-10);
    } else {
      EXPECT_NEAR(*exact_expectation(g, f), *exact_expectation(mix, f), 1e-10);
    }
  }
  EXPECT_EQ(test_convex_order(g, mix, suite).status, Status::Holds);
}

TEST(MixtureDominated, Cases) {
  const SymMat s = sym2(2, 0.1, 1);
  EXPECT_EQ(test_mixture_dominated(make_problem(s, {s, s}, {0.5, 0.5})).status, Status::Holds);

  const MixtureProblem prob = make_problem(sym2(2, 0, 2), {sym2(1, 0, 1), sym2(1, 0, 3)}, {0.5, 0.5});
  const Verdict v = test_mixture_dominated(prob);
  ASSERT_EQ(v.status, Status::Fails);
  const auto* w = v.as<ExpWitness>();
  ASSERT_NE(w, nullptr);
  // Closed form: lambda = 2 sqrt(ln 2) along e2, gap 1.
  const double lambda = 2.0 * std::sqrt(std::log(2.0));
  EXPECT_NEAR(std::abs(w->lambda), lambda, 1e-12);
  const double lhs = std::exp(lambda * lambda * 2.0 / 2.0);
  const double rhs = 0.5 * std::exp(lambda * lambda / 2.0) + 0.5 * std::exp(lambda * lambda * 3.0 / 2.0);
  EXPECT_GT(rhs, lhs);

  const auto scalar = [](double x) { return SymMat::diagonal(Vector::Constant(1, x)); };
  EXPECT_EQ(test_mixture_dominated(make_problem(scalar(4), {scalar(1), scalar(4)}, {0.5, 0.5})).status,
            Status::Holds);
}

TEST(Radial, GaussianMatchesInegsqrt) {
  CounterRng rng(21);
  for (int t = 0; t < 10; ++t) {
    const Matrix s1 = random_psd(2, rng).mat();
    const Matrix s2 = random_psd(2, rng).mat();
    const Matrix s = (0.4 + 0.4 * rng.uniform()) * (0.5 * s1 + 0.5 * s2);
    const Verdict v = radial_order_check(s, {s1, s2}, {0.5, 0.5}, RadialNoise{2, RadialKind::Gaussian}, {2000, 1});
    MixtureProblem prob = make_problem(SymMat::from_upper(s * s.transpose()),
                                       {SymMat::from_upper(s1 * s1.transpose()), SymMat::from_upper(s2 * s2.transpose())},
                                       {0.5, 0.5});
    EXPECT_EQ(v.status, check_inegsqrt(prob).status);
  }
}

TEST(Radial, SphereEqualFactorsHold) {
  const Matrix s = sym2(1, 0.3, 2).mat();
  EXPECT_EQ(radial_order_check(s, {s, s}, {0.5, 0.5}, RadialNoise{2, RadialKind::UniformSphere}).status,
            Status::Holds);
}

TEST(Radial, ScaledSigmaFails) {
  const Matrix s = sym2(1, 0.3, 2).mat();
  const Verdict v = radial_order_check(2.0 * s, {s, s}, {0.5, 0.5}, RadialNoise{2, RadialKind::UniformBall}, {20000, 3});
  ASSERT_EQ(v.status, Status::Fails);
  EXPECT_GT(v.diagnostics.at("exact_lhs"), v.diagnostics.at("exact_rhs"));
  EXPECT_GT(v.diagnostics.at("mc_lhs"), v.diagnostics.at("mc_rhs"));
}

TEST(Radial, DirectionIsRotationInvariant) {
  // Projections of the uniform sphere direction onto two fixed orthogonal
  // unit vectors share their first two moments.
  const RadialNoise noise{3, RadialKind::UniformSphere};
  CounterRng rng(5);
  CounterRng orng(6);
  const Matrix o = random_orthogonal(3, orng);
  double m1 = 0, m2 = 0, a1 = 0, a2 = 0;
  const int n = 200000;
  for (int k = 0; k < n; ++k) {
    const Vector z = noise.sample(rng);
    const double u = z(0), v = (o * z)(0);
    m1 += std::abs(u);
    m2 += std::abs(v);
    a1 += u * u;
    a2 += v * v;
  }
  EXPECT_NEAR(m1 / n, *noise.abs_first_moment(), 0.005);
  EXPECT_NEAR(m2 / n, *noise.abs_first_moment(), 0.005);
  EXPECT_NEAR(a1 / n, 1.0 / 3.0, 0.005);
  EXPECT_NEAR(a2 / n, 1.0 / 3.0, 0.005);
}

TEST(ExponentialMinimizer, ClosedForm) {
  const double lambda = 1.3, p1 = 0.3, s1 = 0.7, s2 = 1.4;
  const double x = minimize_exponential_mixture(lambda, p1, s1, s2);
  EXPECT_NEAR(x, 0.5 * lambda * (1.0 - p1) * (s2 * s2 - s1 * s1), 1e-8);
}
