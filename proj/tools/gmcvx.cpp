// gmcvx: command-line front end.
//
//   gmcvx check    --condition C --input FILE [--tol T] [--seed S]
//                  [--emit-certificate FILE] [--with-M FILE]
//   gmcvx sweep    --spec FILE --out FILE
//   gmcvx couple   --input FILE --gamma FILE --samples N --seed S --out FILE
//   gmcvx mcverify --input FILE --samples N --seed S
//
// Exit codes: 0 Holds, 1 Fails, 2 Unknown, 3 usage, 64 malformed JSON,
// 65 invariant violation, 74 IO error.

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>

#include "gmcvx/conditions/chain.hpp"
#include "gmcvx/conditions/dominance.hpp"
#include "gmcvx/coupling.hpp"
#include "gmcvx/io.hpp"
#include "gmcvx/sweep.hpp"

namespace {

using namespace gmcvx;
using io::json;

enum Exit : int { kHolds = 0, kFails = 1, kUnknown = 2, kUsage = 3, kDataErr = 64, kInvariant = 65, kIoErr = 74 };

int exit_for(Status s) {
  switch (s) {
    case Status::Holds: return kHolds;
    case Status::Fails: return kFails;
    case Status::Unknown: return kUnknown;
  }
  return kUnknown;
}

void print(const json& j) { std::cout << j.dump(2) << '\n'; }

std::vector<Matrix> read_m_list(const std::string& path) {
  const json j = io::read_json_file(path);
  std::vector<Matrix> out;
  // Either a single matrix or a list of matrices (optionally under "M").
  const json& body = j.is_object() && j.contains("M") ? j["M"] : j;
  if (body.is_array() && !body.empty() && body[0].is_array() && !body[0].empty() && body[0][0].is_array()) {
    for (const auto& m : body) out.push_back(io::matrix_from_json(m, "M"));
  } else {
    out.push_back(io::matrix_from_json(body, "M"));
  }
  return out;
}

struct CheckArgs {
  std::string condition;
  std::string input;
  double tol = Tolerances{}.eps_psd;
  std::uint64_t seed = 1;
  std::string certificate;
  std::string with_m;
};

int cmd_check(const CheckArgs& a) {
  const MixtureProblem prob = io::read_problem(a.input);
  std::vector<Matrix> user_m;
  if (!a.with_m.empty()) user_m = read_m_list(a.with_m);

  InecovConfig icfg;
  icfg.seed = a.seed;
  icfg.directional.seed = a.seed;
  icfg.engine.eps_psd = a.tol;
  CorrelConfig ccfg;
  ccfg.seed = a.seed;
  ccfg.eps_psd = a.tol;
  ccfg.candidate_m = user_m;

  json report = {{"schema_version", io::kSchemaVersion},
                 {"tool_version", io::kToolVersion},
                 {"condition", a.condition},
                 {"input_digest", io::problem_digest(prob)}};
  Verdict v;
  if (a.condition == "inegsqrt") {
    v = check_inegsqrt(prob, icfg.directional);
  } else if (a.condition == "inecov") {
    v = check_inecov(prob, icfg);
  } else if (a.condition == "inecovf") {
    v = check_inecovf(prob, icfg);
  } else if (a.condition == "correl") {
    if (user_m.empty()) {
      v = find_correl_certificate(prob, ccfg);
    } else {
      // Explicit M: report the best of the supplied matrices.
      for (const Matrix& m : user_m) {
        Verdict w = check_correl_with(prob, m, std::nullopt, ccfg);
        if (w.status == Status::Holds || &m == &user_m.front() || w.margin > v.margin) v = std::move(w);
        if (v.status == Status::Holds) break;
      }
    }
  } else if (a.condition == "dominates") {
    v = check_dominated_by_single(prob, a.tol);
  } else if (a.condition == "chain") {
    ChainConfig cfg;
    cfg.inecov = icfg;
    cfg.correl = ccfg;
    cfg.mc.seed = a.seed;
    const ChainReport rep = implication_chain_report(prob, cfg);
    report["chain"] = {{"correl", io::verdict_to_json(rep.correl)},
                       {"inecov", io::verdict_to_json(rep.inecov)},
                       {"inecovf", io::verdict_to_json(rep.inecovf)},
                       {"order", io::verdict_to_json(rep.order)},
                       {"inegsqrt", io::verdict_to_json(rep.inegsqrt)},
                       {"near_misses", rep.near_misses}};
    // The chain's headline verdict is the strongest condition that was decided.
    v = rep.correl.status == Status::Holds ? rep.correl : rep.inecov;
  } else {
    std::cerr << "unknown condition '" << a.condition << "'\n";
    return kUsage;
  }
  report["verdict"] = io::verdict_to_json(v);

  if (!a.certificate.empty()) {
    if (v.status == Status::Holds && (v.as<GammaWitness>() || v.as<CorrelCertificate>())) {
      io::write_text_file(a.certificate, io::certificate_to_json(prob, v, a.tol).dump(2) + "\n");
      report["certificate"] = a.certificate;
    } else {
      report["certificate"] = nullptr;
      std::cerr << "no certificate: verdict is not a certified Holds\n";
    }
  }
  print(report);
  return exit_for(v.status);
}

// ---- sweep ----

SweepAxis axis_from_json(const json& j) {
  SweepAxis a;
  a.name = j.value("name", std::string{});
  a.min = j.at("min").get<double>();
  a.max = j.at("max").get<double>();
  a.step = j.at("step").get<double>();
  return a;
}

SweepSpec spec_from_json(const json& j) {
  SweepSpec s;
  s.template_name = j.at("template").get<std::string>();
  const json& axes = j.at("axes");
  if (!axes.is_array() || axes.size() != 2) throw io::FormatError("sweep spec: 'axes' must hold two axes");
  s.axis1 = axis_from_json(axes[0]);
  s.axis2 = axis_from_json(axes[1]);
  if (j.contains("checkers")) s.checkers = j["checkers"].get<std::vector<std::string>>();
  s.seed = j.value("seed", std::uint64_t{1});
  s.output_path = j.value("output", std::string{});
  if (s.template_name == "example2") {
    s.make = templates::example2();
  } else if (s.template_name == "example3_diag") {
    s.make = templates::example3_diag();
  } else if (s.template_name == "example3_ax") {
    s.make = templates::example3_ax();
  } else if (s.template_name == "affine") {
    const MixtureProblem base = io::problem_from_json(j.at("base"));
    const json& dirs = j.at("directions");
    if (!dirs.is_array() || dirs.size() != 2) throw io::FormatError("sweep spec: 'directions' needs two matrices");
    s.make = templates::affine(base, io::symmetric_from_json(dirs[0], "direction 1"),
                               io::symmetric_from_json(dirs[1], "direction 2"));
  } else {
    throw io::FormatError("sweep spec: unknown template '" + s.template_name + "'");
  }
  for (const auto& c : s.checkers) {
    static const std::vector<std::string> known{"inegsqrt", "inecov", "inecovf", "correl", "correl_identity",
                                                "dominates"};
    if (std::find(known.begin(), known.end(), c) == known.end()) {
      throw io::FormatError("sweep spec: unknown checker '" + c + "'");
    }
  }
  return s;
}

int cmd_sweep(const std::string& spec_path, const std::string& out) {
  json j = io::read_json_file(spec_path);
  SweepSpec spec;
  try {
    spec = spec_from_json(j);
  } catch (const json::exception& e) {
    throw io::FormatError(std::string("sweep spec: ") + e.what());
  }
  if (!out.empty()) spec.output_path = out;
  if (spec.output_path.empty()) throw io::FormatError("sweep spec: no output path");
  const auto cells = run_sweep(spec);
  write_sweep_csv(spec.output_path, cells);
  std::map<std::string, std::map<std::string, int>> counts;
  for (const auto& c : cells) {
    for (const auto& r : c.results) ++counts[r.checker][r.status];
  }
  print({{"cells", cells.size()}, {"output", spec.output_path}, {"counts", counts}});
  return kHolds;
}

// ---- couple ----

Matrix read_gamma(const std::string& path) {
  const json j = io::read_json_file(path);
  if (j.is_object() && j.contains("payload")) {
    const io::Certificate cert = io::certificate_from_json(j);
    if (cert.kind != "gamma") throw io::FormatError("couple needs a gamma certificate");
    return cert.gamma;
  }
  if (j.is_object() && j.contains("gamma")) return io::matrix_from_json(j["gamma"], "gamma");
  return io::matrix_from_json(j, "gamma");
}

int cmd_couple(const std::string& input, const std::string& gamma_path, std::size_t samples, std::uint64_t seed,
               const std::string& out) {
  const MixtureProblem prob = io::read_problem(input);
  const Matrix gamma = read_gamma(gamma_path);
  if (gamma.rows() != prob.n() * prob.d || gamma.cols() != gamma.rows()) {
    throw Error(ErrorCode::DimensionMismatch, "Gamma must be nd x nd");
  }
  const MartingaleKernel k = build_kernel(prob, GammaWitness{gamma, prob.d});
  const auto batch = sample_batch(k, samples, seed);

  std::ofstream os(out, std::ios::binary);
  if (!os) throw Error(ErrorCode::Io, "cannot open '" + out + "' for writing");
  for (Index c = 0; c < prob.d; ++c) os << 'x' << c + 1 << ',';
  os << 'i';
  for (Index c = 0; c < prob.d; ++c) os << ",y" << c + 1;
  os << '\n';
  for (const auto& s : batch) {
    for (Index c = 0; c < prob.d; ++c) os << format_double(s.x(c)) << ',';
    os << s.i + 1;
    for (Index c = 0; c < prob.d; ++c) os << ',' << format_double(s.y(c));
    os << '\n';
  }
  if (!os) throw Error(ErrorCode::Io, "write failed for '" + out + "'");

  const CouplingDiagnostics diag = coupling_diagnostics(prob, batch);
  constexpr double kZ = 4.0;
  const bool pass = diag.max_cov_z <= kZ && diag.max_residual_z <= kZ;
  json residuals = json::array();
  for (size_t r = 0; r < diag.residuals.size(); ++r) {
    residuals.push_back({{"name", diag.residual_names[r]}, {"value", diag.residuals[r]}, {"se", diag.residual_se[r]}});
  }
  print({{"schema_version", io::kSchemaVersion},
         {"samples", samples},
         {"seed", seed},
         {"y_mean", io::to_json(diag.y_mean)},
         {"y_cov", io::to_json(diag.y_cov)},
         {"y_cov_expected", io::to_json(diag.y_cov_expected)},
         {"max_cov_z", diag.max_cov_z},
         {"max_residual_z", diag.max_residual_z},
         {"residuals", residuals},
         {"z_threshold", kZ},
         {"pass", pass}});
  return pass ? kHolds : kFails;
}

// ---- mcverify ----

int cmd_mcverify(const std::string& input, std::size_t samples, std::uint64_t seed) {
  const MixtureProblem prob = io::read_problem(input);
  if (!prob.centered()) throw Error(ErrorCode::NonCenteredMeans, "sum p_i x_i must vanish");
  const Verdict v = test_problem_order(prob, McConfig{samples, seed});
  print({{"schema_version", io::kSchemaVersion},
         {"tool_version", io::kToolVersion},
         {"input_digest", io::problem_digest(prob)},
         {"verdict", io::verdict_to_json(v)}});
  return exit_for(v.status);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Convex order between a Gaussian and a Gaussian mixture"};
  app.require_subcommand(1);

  CheckArgs check;
  auto* c = app.add_subcommand("check", "decide one condition for a problem file");
  c->add_option("--condition", check.condition, "inegsqrt|inecov|inecovf|correl|dominates|chain")
      ->required()
      ->check(CLI::IsMember({"inegsqrt", "inecov", "inecovf", "correl", "dominates", "chain"}));
  c->add_option("--input", check.input, "problem JSON")->required();
  c->add_option("--tol", check.tol, "PSD tolerance (relative to the problem scale)");
  c->add_option("--seed", check.seed, "seed for randomized searches");
  c->add_option("--emit-certificate", check.certificate, "write the certificate of a Holds verdict");
  c->add_option("--with-M", check.with_m, "JSON matrix (or list) of M candidates for correl");

  std::string spec_path, sweep_out;
  auto* s = app.add_subcommand("sweep", "two-parameter region map");
  s->add_option("--spec", spec_path, "sweep spec JSON")->required();
  s->add_option("--out", sweep_out, "CSV output (overrides the spec)");

  std::string couple_input, couple_gamma, couple_out;
  std::size_t couple_samples = 100000;
  std::uint64_t couple_seed = 1;
  auto* k = app.add_subcommand("couple", "sample the martingale coupling of a Gamma certificate");
  k->add_option("--input", couple_input, "problem JSON")->required();
  k->add_option("--gamma", couple_gamma, "Gamma certificate or matrix JSON")->required();
  k->add_option("--samples", couple_samples)->check(CLI::PositiveNumber);
  k->add_option("--seed", couple_seed);
  k->add_option("--out", couple_out, "sample CSV")->required();

  std::string mc_input;
  std::size_t mc_samples = 20000;
  std::uint64_t mc_seed = 1;
  auto* m = app.add_subcommand("mcverify", "convex-order test suite (exact + Monte Carlo)");
  m->add_option("--input", mc_input, "problem JSON")->required();
  m->add_option("--samples", mc_samples)->check(CLI::PositiveNumber);
  m->add_option("--seed", mc_seed);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kUsage;
  }

  try {
    if (*c) return cmd_check(check);
    if (*s) return cmd_sweep(spec_path, sweep_out);
    if (*k) return cmd_couple(couple_input, couple_gamma, couple_samples, couple_seed, couple_out);
    if (*m) return cmd_mcverify(mc_input, mc_samples, mc_seed);
  } catch (const io::FormatError& e) {
    std::cerr << "malformed input: " << e.what() << '\n';
    return kDataErr;
  } catch (const json::exception& e) {
    std::cerr << "malformed input: " << e.what() << '\n';
    return kDataErr;
  } catch (const Error& e) {
    std::cerr << e.what() << '\n';
    return e.code() == ErrorCode::Io ? kIoErr : kInvariant;
  }
  return kUsage;
}
