#pragma once

// Two-parameter region maps over problem templates, written as CSV
// `param1,param2,checker,status,margin`.

#include <charconv>
#include <fstream>
#include <functional>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "gmcvx/conditions/chain.hpp"
#include "gmcvx/conditions/correl.hpp"
#include "gmcvx/conditions/directional.hpp"
#include "gmcvx/conditions/dominance.hpp"
#include "gmcvx/conditions/inecov.hpp"
#include "gmcvx/gallery.hpp"
#include "gmcvx/parallel.hpp"

namespace gmcvx {

struct SweepAxis {
  std::string name;
  double min = 0.0;
  double max = 0.0;
  double step = 1.0;

  std::size_t count() const {
    return static_cast<std::size_t>(std::floor((max - min) / step + 1e-9)) + 1;
  }
  double value(std::size_t k) const { return min + static_cast<double>(k) * step; }
};

using ProblemTemplate = std::function<MixtureProblem(double, double)>;

struct SweepSpec {
  std::string template_name;
  ProblemTemplate make;  // (param1, param2) -> problem
  SweepAxis axis1;
  SweepAxis axis2;
  std::vector<std::string> checkers{"inegsqrt"};
  std::uint64_t seed = 1;
  std::string output_path;
};

struct CellResult {
  std::string checker;
  std::string status;  // Holds | Fails | Unknown | boundary | invalid
  double margin = 0.0;
};

struct RegionCell {
  double param1 = 0.0;
  double param2 = 0.0;
  std::vector<CellResult> results;
};

/// Validates an axis; steps must be positive and ranges finite.
inline void validate_axis(const SweepAxis& a) {
  if (!(a.step > 0.0) || !std::isfinite(a.min) || !std::isfinite(a.max) || a.max < a.min) {
    throw Error(ErrorCode::InvalidProblem, "bad sweep axis '" + a.name + "'");
  }
}

/// Runs one named checker. Margins of the decision checkers (inegsqrt,
/// correl, dominates) measure the distance to the decision boundary, so
/// values within twice the tolerance are reported as "boundary".
inline CellResult run_checker(const std::string& checker, const MixtureProblem& prob, std::uint64_t seed) {
  CellResult r;
  r.checker = checker;
  Verdict v;
  double tol = 0.0;
  bool decision = true;
  if (checker == "inegsqrt") {
    InegsqrtConfig cfg;
    cfg.seed = seed;
    v = check_inegsqrt(prob, cfg);
    tol = inegsqrt_tolerance(prob, cfg);
  } else if (checker == "inecov" || checker == "inecovf") {
    InecovConfig cfg;
    cfg.seed = seed;
    cfg.directional.seed = seed;
    v = checker == "inecov" ? check_inecov(prob, cfg) : check_inecovf(prob, cfg);
    decision = false;
  } else if (checker == "correl") {
    CorrelConfig cfg;
    cfg.seed = seed;
    v = find_correl_certificate(prob, cfg);
    tol = cfg.eps_psd * (1.0 + prob.scale());
  } else if (checker == "correl_identity") {
    v = check_correl_with(prob, Matrix::Identity(prob.d, prob.d));
    tol = Tolerances{}.eps_psd * (1.0 + prob.scale());
  } else if (checker == "dominates") {
    v = check_dominated_by_single(prob);
    tol = Tolerances{}.eps_psd * (1.0 + prob.scale());
  } else {
    throw Error(ErrorCode::InvalidProblem, "unknown checker '" + checker + "'");
  }
  r.margin = v.margin;
  r.status = std::string(to_string(v.status));
  if (decision && v.status != Status::Unknown && std::abs(v.margin) <= 2.0 * tol) r.status = "boundary";
  return r;
}

/// Evaluates every cell independently; output order is (axis1, axis2)
/// row-major whatever the execution order. Cells whose problem fails
/// validation (e.g. an indefinite target) get status "invalid".
inline std::vector<RegionCell> run_sweep(const SweepSpec& spec) {
  validate_axis(spec.axis1);
  validate_axis(spec.axis2);
  const std::size_t n1 = spec.axis1.count();
  const std::size_t n2 = spec.axis2.count();
  std::vector<RegionCell> cells(n1 * n2);
  parallel_for(cells.size(), [&](std::size_t idx) {
    RegionCell& cell = cells[idx];
    cell.param1 = spec.axis1.value(idx / n2);
    cell.param2 = spec.axis2.value(idx % n2);
    std::optional<MixtureProblem> prob;
    try {
      prob = spec.make(cell.param1, cell.param2);
      validate(*prob);
    } catch (const Error&) {
      prob.reset();
    }
    for (const auto& checker : spec.checkers) {
      if (!prob) {
        cell.results.push_back({checker, "invalid", std::numeric_limits<double>::quiet_NaN()});
        continue;
      }
      cell.results.push_back(run_checker(checker, *prob, spec.seed));
    }
  });
  return cells;
}

/// Shortest round-trip decimal.
inline std::string format_double(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, res.ptr);
}

inline void write_sweep_csv(std::ostream& os, const std::vector<RegionCell>& cells) {
  os << "param1,param2,checker,status,margin\n";
  for (const auto& c : cells) {
    for (const auto& r : c.results) {
      os << format_double(c.param1) << ',' << format_double(c.param2) << ',' << r.checker << ','
         << r.status << ',' << format_double(r.margin) << '\n';
    }
  }
}

inline void write_sweep_csv(const std::string& path, const std::vector<RegionCell>& cells) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error(ErrorCode::Io, "cannot open '" + path + "' for writing");
  write_sweep_csv(os, cells);
  if (!os) throw Error(ErrorCode::Io, "write failed for '" + path + "'");
}

// ---- templates ----

namespace templates {

inline ProblemTemplate example2() {
  return [](double a, double b) { return gallery::example2(a, b); };
}

/// Example 3 with diagonal target diag(s11, s22).
inline ProblemTemplate example3_diag() {
  return [](double s11, double s22) { return gallery::example3_diag(s11, s22); };
}

/// Example 3 with target Sigma(a, x).
inline ProblemTemplate example3_ax() {
  return [](double a, double x) { return gallery::example3(gallery::example3_target(a, x)); };
}

/// base problem with target + u * d1 + v * d2.
inline ProblemTemplate affine(const MixtureProblem& base, const SymMat& d1, const SymMat& d2) {
  return [base, d1, d2](double u, double v) {
    MixtureProblem p = base;
    p.target = base.target + d1 * u + d2 * v;
    return p;
  };
}

}  // namespace templates

// ---- thresholds ----

/// Bisection on a scalar parameter between a bracket whose ends get
/// different verdicts (Holds versus anything else). Returns the midpoint of
/// the final bracket, whose width is at most `tol`.
inline double boundary_bisect(const std::function<MixtureProblem(double)>& make,
                              const std::function<Status(const MixtureProblem&)>& checker, double lo,
                              double hi, double tol = 1e-4) {
  const bool lo_holds = checker(make(lo)) == Status::Holds;
  const bool hi_holds = checker(make(hi)) == Status::Holds;
  if (lo_holds == hi_holds) {
    throw Error(ErrorCode::BracketNotSeparating, "both bracket ends give the same verdict");
  }
  while (hi - lo > tol) {
    const double mid = 0.5 * (lo + hi);
    if ((checker(make(mid)) == Status::Holds) == lo_holds) lo = mid;
    else hi = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace gmcvx
