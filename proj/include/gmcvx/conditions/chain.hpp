#pragma once

// Runs every checker on one problem and cross-checks the implications
//   (2) => (3) => pairwise => (5)   and   (3) => (4) => (5).
// A stronger condition holding while a weaker one fails beyond tolerance is
// a bug, reported as ChainViolation.

#include <string>
#include <vector>

#include "gmcvx/conditions/correl.hpp"
#include "gmcvx/conditions/directional.hpp"
#include "gmcvx/conditions/inecov.hpp"
#include "gmcvx/cxverify.hpp"

namespace gmcvx {

struct ChainConfig {
  InecovConfig inecov;
  CorrelConfig correl;
  McConfig mc{4000, 1};
  double violation_tol = 1e-7;  // relative to the problem scale of each margin
  bool run_order_suite = true;
};

struct ChainReport {
  Verdict correl;    // (2), via the certificate generators
  Verdict inecov;    // (3)
  Verdict inecovf;   // pairwise relaxation
  Verdict order;     // (4), test-suite evidence
  Verdict inegsqrt;  // (5)
  std::vector<std::string> violations;
  std::vector<std::string> near_misses;  // inversions within tolerance
};

namespace detail {

inline void chain_link(ChainReport& rep, const std::string& strong_name, const Verdict& strong,
                       const std::string& weak_name, const Verdict& weak, double tol) {
  if (strong.status != Status::Holds || weak.status != Status::Fails) return;
  const std::string msg = strong_name + " holds but " + weak_name + " fails (margin " +
                          std::to_string(weak.margin) + ")";
  if (weak.margin < -tol) rep.violations.push_back(msg);
  else rep.near_misses.push_back(msg);
}

}  // namespace detail

inline ChainReport implication_chain_report_unchecked(const MixtureProblem& prob, const ChainConfig& cfg = {}) {
  ChainReport rep;
  rep.inegsqrt = check_inegsqrt(prob, cfg.inecov.directional);
  rep.correl = find_correl_certificate(prob, cfg.correl);

  std::vector<Matrix> extra;
  if (const auto* cert = rep.correl.as<CorrelCertificate>(); cert && rep.correl.status == Status::Holds) {
    extra.push_back(gamma_from_correl(prob, *cert));
  }
  rep.inecov = check_inecov(prob, cfg.inecov, extra, rep.inegsqrt);
  if (const auto* g = rep.inecov.as<GammaWitness>(); g && rep.inecov.status == Status::Holds) {
    extra.push_back(g->gamma);
  }
  rep.inecovf = check_inecovf(prob, cfg.inecov, extra, rep.inegsqrt);

  if (cfg.run_order_suite && prob.centered()) {
    // A refuted (5) names a direction; |xi' x| along it is a convex function
    // the suite must include, or (4) would look fine on too few functions.
    std::vector<TestFunction> extra;
    if (const auto* w = rep.inegsqrt.as<DirectionWitness>(); w && rep.inegsqrt.status == Status::Fails) {
      extra.push_back(AbsLinear{w->xi, 1.0});
    }
    rep.order = test_problem_order(prob, cfg.mc, extra);
    if (rep.order.status == Status::Fails && rep.order.diagnostics["mc_violation"] == 1.0) {
      rep.order.status = Status::Unknown;
      rep.order.notes.push_back("only a Monte Carlo function disagreed; not treated as a refutation");
    }
  } else {
    rep.order.status = Status::Unknown;
    rep.order.notes.push_back(prob.centered() ? "suite disabled" : "means are not centered");
  }

  const double scale = prob.scale();
  const double eig_tol = cfg.violation_tol * (1.0 + scale);
  const double root_tol = cfg.violation_tol * (1.0 + std::sqrt(scale));
  detail::chain_link(rep, "(2)", rep.correl, "(3)", rep.inecov, eig_tol);
  detail::chain_link(rep, "(3)", rep.inecov, "pairwise", rep.inecovf, eig_tol);
  detail::chain_link(rep, "pairwise", rep.inecovf, "(5)", rep.inegsqrt, root_tol);
  detail::chain_link(rep, "(3)", rep.inecov, "(5)", rep.inegsqrt, root_tol);
  detail::chain_link(rep, "(2)", rep.correl, "(5)", rep.inegsqrt, root_tol);
  detail::chain_link(rep, "(3)", rep.inecov, "(4)", rep.order, root_tol);
  detail::chain_link(rep, "(4)", rep.order, "(5)", rep.inegsqrt, root_tol);
  return rep;
}

/// Like implication_chain_report_unchecked, but throws ChainViolation when
/// the implications are inverted beyond tolerance.
inline ChainReport implication_chain_report(const MixtureProblem& prob, const ChainConfig& cfg = {}) {
  ChainReport rep = implication_chain_report_unchecked(prob, cfg);
  if (!rep.violations.empty()) throw Error(ErrorCode::ChainViolation, rep.violations.front());
  return rep;
}

}  // namespace gmcvx
