#include <gtest/gtest.h>

#include <cstdio>
#include <fstream>
#include <sstream>

#include "gmcvx/io.hpp"
#include "gmcvx/sweep.hpp"

using namespace gmcvx;

namespace {

std::string csv_of(const std::vector<RegionCell>& cells) {
  std::ostringstream os;
  write_sweep_csv(os, cells);
  return os.str();
}

}  // namespace

TEST(Sweep, SingleCellEqualsDirectCall) {
  SweepSpec spec;
  spec.make = templates::example2();
  spec.axis1 = {"a", 5.0, 5.0, 0.05};
  spec.axis2 = {"b", 0.5, 0.5, 0.05};
  spec.checkers = {"inegsqrt", "inecov"};
  const auto cells = run_sweep(spec);
  ASSERT_EQ(cells.size(), 1u);
  const MixtureProblem prob = gallery::example2(5.0, 0.5);
  InegsqrtConfig icfg;
  icfg.seed = spec.seed;
  const Verdict v = check_inegsqrt(prob, icfg);
  EXPECT_EQ(cells[0].results[0].status, to_string(v.status));
  EXPECT_EQ(cells[0].results[0].margin, v.margin);
  EXPECT_EQ(cells[0].results[1].status, "Holds");
}

TEST(Sweep, DeterministicAndOrdered) {
  SweepSpec spec;
  spec.make = templates::example2();
  spec.axis1 = {"a", 1.0, 4.0, 0.5};
  spec.axis2 = {"b", -3.0, 3.0, 0.75};
  spec.checkers = {"inegsqrt", "correl", "dominates"};
  setenv("GMCVX_THREADS", "3", 1);
  const std::string a = csv_of(run_sweep(spec));
  setenv("GMCVX_THREADS", "1", 1);
  const std::string b = csv_of(run_sweep(spec));
  unsetenv("GMCVX_THREADS");
  EXPECT_EQ(a, b);
  EXPECT_EQ(a.find('\r'), std::string::npos);
  EXPECT_EQ(a.substr(0, a.find('\n')), "param1,param2,checker,status,margin");
}

TEST(Sweep, InvalidCellsAndBadAxes) {
  SweepSpec spec;
  spec.make = templates::example2();
  spec.axis1 = {"a", 1.0, 1.0, 1.0};
  spec.axis2 = {"b", 2.0, 2.0, 1.0};  // |b| > a: target indefinite
  const auto cells = run_sweep(spec);
  EXPECT_EQ(cells[0].results[0].status, "invalid");
  spec.axis1.step = 0.0;
  EXPECT_THROW(run_sweep(spec), Error);
}

TEST(Sweep, ContiguousSymmetricIntervals) {
  SweepSpec spec;
  spec.make = templates::example2();
  spec.axis1 = {"a", 0.5, 5.5, 0.5};
  spec.axis2 = {"b", -6.0, 6.0, 0.25};
  const auto cells = run_sweep(spec);
  const std::size_t nb = spec.axis2.count();
  for (std::size_t r = 0; r < spec.axis1.count(); ++r) {
    std::vector<int> holds;
    for (std::size_t c = 0; c < nb; ++c) holds.push_back(cells[r * nb + c].results[0].status == "Holds");
    for (std::size_t c = 0; c < nb; ++c) EXPECT_EQ(holds[c], holds[nb - 1 - c]);
    int changes = 0;
    for (std::size_t c = 1; c < nb; ++c) changes += holds[c] != holds[c - 1];
    EXPECT_LE(changes, 2);
  }
}

TEST(Sweep, Example3PairwiseRegion) {
  SweepSpec spec;
  spec.make = templates::example3_ax();
  const double lo = std::pow(2.0, 1.25) / (1.0 + std::sqrt(2.0));
  spec.axis1 = {"a", 17.0 / 3.0, 3.0 + 2.0 * std::sqrt(2.0), 0.04};
  spec.axis2 = {"x", lo, 1.0, (1.0 - lo) / 3.0};
  spec.checkers = {"inecovf"};
  for (const auto& cell : run_sweep(spec)) EXPECT_EQ(cell.results[0].status, "Holds") << cell.param1 << "," << cell.param2;
}

TEST(Bisect, Thresholds) {
  auto ex2 = [](double a) { return gallery::example2(a, 0.0); };
  auto inegsqrt = [](const MixtureProblem& p) { return check_inegsqrt(p).status; };
  EXPECT_NEAR(boundary_bisect(ex2, inegsqrt, 5.0, 6.0), 3.0 + 2.0 * std::sqrt(2.0), 1e-3);

  auto ex3 = [](double s) { return gallery::example3_diag(s, s); };
  auto correl = [](const MixtureProblem& p) { return check_correl_with(p, Matrix::Identity(2, 2)).status; };
  EXPECT_NEAR(boundary_bisect(ex3, correl, 10.0, 13.0), 6.0 + 4.0 * std::sqrt(2.0), 1e-3);

  // d = 1: sigma <= sum p_i sigma_i.
  auto scalar = [](double s) {
    auto sq = [](double x) { return SymMat::diagonal(Vector::Constant(1, x * x)); };
    return make_problem(sq(s), {sq(1.0), sq(2.0), sq(4.0)}, {0.2, 0.3, 0.5});
  };
  EXPECT_NEAR(boundary_bisect(scalar, inegsqrt, 1.0, 5.0, 1e-7), 0.2 + 0.6 + 2.0, 1e-6);

  try {
    boundary_bisect(ex2, inegsqrt, 1.0, 2.0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::BracketNotSeparating);
  }
}

TEST(Io, ProblemRoundTripAndValidation) {
  const MixtureProblem prob = gallery::example3(gallery::example3_target(5.7, 0.99));
  const io::json j = io::problem_to_json(prob);
  const MixtureProblem back = io::problem_from_json(io::json::parse(j.dump()));
  EXPECT_EQ(back.target, prob.target);
  EXPECT_EQ(io::problem_digest(back), io::problem_digest(prob));

  io::json bad = j;
  bad["p"] = {0.3, 0.3, 0.3};
  EXPECT_THROW(io::problem_from_json(bad), Error);
  bad = j;
  bad["target"][0][1] = 0.5;
  EXPECT_THROW(io::problem_from_json(bad), Error);
  bad = j;
  bad.erase("target");
  EXPECT_THROW(io::problem_from_json(bad), io::FormatError);

  io::json loose = j;
  loose["p"] = {1.0 / 3.0 + 2e-11, 1.0 / 3.0, 1.0 / 3.0};
  const MixtureProblem renorm = io::problem_from_json(loose);
  EXPECT_NEAR(renorm.p[0] + renorm.p[1] + renorm.p[2], 1.0, 1e-15);
}

TEST(Io, CertificateRoundTrip) {
  const MixtureProblem prob = gallery::example2(5.0, 0.5);
  for (const Verdict& v : {check_inecov(prob), find_correl_certificate(prob)}) {
    ASSERT_EQ(v.status, Status::Holds);
    const std::string text = io::certificate_to_json(prob, v, Tolerances{}.eps_psd).dump(2);
    const io::Certificate cert = io::certificate_from_json(io::json::parse(text));
    const MixtureProblem reread = io::problem_from_json(io::json::parse(io::problem_to_json(prob).dump()));
    const Verdict w = io::revalidate(reread, cert);
    EXPECT_EQ(w.status, Status::Holds);
    EXPECT_NEAR(w.margin, v.margin, 1e-12);
  }
}

TEST(Io, CertificateBoundToProblem) {
  const MixtureProblem prob = gallery::example1(0.0);
  const Verdict v = check_inecov(prob);
  const io::Certificate cert =
      io::certificate_from_json(io::certificate_to_json(prob, v, Tolerances{}.eps_psd));
  EXPECT_THROW(io::revalidate(gallery::example1(0.5), cert), Error);
}

TEST(Io, ShortestRoundTripDoubles) {
  EXPECT_EQ(format_double(0.1), "0.1");
  EXPECT_EQ(format_double(-6.0), "-6");
  const double x = 1.0 / 3.0;
  EXPECT_EQ(std::stod(format_double(x)), x);
}
