#pragma once

// JSON problem files, certificates and verdict reports. Needs nlohmann/json
// and OpenSSL (SHA-256 input digests); the numerical headers do not.

#include <openssl/evp.h>

#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>

#include <json.hpp>

#include "gmcvx/conditions/correl.hpp"
#include "gmcvx/conditions/inecov.hpp"
#include "gmcvx/problem.hpp"
#include "gmcvx/verdict.hpp"

namespace gmcvx::io {

using json = nlohmann::json;

inline constexpr int kSchemaVersion = 1;
inline constexpr const char* kToolVersion = "0.1.0";

/// Thrown for documents that are not valid JSON or lack required fields
/// (as opposed to Error, which flags invariant violations).
struct FormatError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// ---- matrices ----

inline json to_json(const Matrix& m) {
  json rows = json::array();
  for (Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline json to_json(const Vector& v) {
  json out = json::array();
  for (Index k = 0; k < v.size(); ++k) out.push_back(v(k));
  return out;
}

inline Matrix matrix_from_json(const json& j, const std::string& what) {
  if (!j.is_array() || j.empty()) throw FormatError(what + ": expected a non-empty array of rows");
  const auto rows = static_cast<Index>(j.size());
  if (!j[0].is_array() || j[0].empty()) throw FormatError(what + ": rows must be non-empty arrays");
  const auto cols = static_cast<Index>(j[0].size());
  Matrix m(rows, cols);
  for (Index r = 0; r < rows; ++r) {
    const json& row = j[static_cast<size_t>(r)];
    if (!row.is_array() || static_cast<Index>(row.size()) != cols) throw FormatError(what + ": ragged rows");
    for (Index c = 0; c < cols; ++c) {
      const json& x = row[static_cast<size_t>(c)];
      if (!x.is_number()) throw FormatError(what + ": entries must be numbers");
      m(r, c) = x.get<double>();
    }
  }
  return m;
}

inline Vector vector_from_json(const json& j, const std::string& what) {
  if (!j.is_array()) throw FormatError(what + ": expected an array");
  Vector v(static_cast<Index>(j.size()));
  for (size_t k = 0; k < j.size(); ++k) {
    if (!j[k].is_number()) throw FormatError(what + ": entries must be numbers");
    v(static_cast<Index>(k)) = j[k].get<double>();
  }
  return v;
}

/// Symmetric within 1e-12 (relative to the largest entry, floor 1), else InvalidMatrix.
inline SymMat symmetric_from_json(const json& j, const std::string& what) {
  const Matrix m = matrix_from_json(j, what);
  if (m.rows() != m.cols()) throw Error(ErrorCode::InvalidMatrix, what + " is not square");
  if (!m.allFinite()) throw Error(ErrorCode::InvalidMatrix, what + " has non-finite entries");
  const double tol = 1e-12 * std::max(1.0, m.cwiseAbs().maxCoeff());
  if ((m - m.transpose()).cwiseAbs().maxCoeff() > tol) {
    throw Error(ErrorCode::InvalidMatrix, what + " is not symmetric");
  }
  return SymMat::from_upper(m);
}

// ---- problems ----

inline json problem_to_json(const MixtureProblem& prob) {
  json comps = json::array();
  for (Index i = 0; i < prob.n(); ++i) {
    comps.push_back({{"cov", to_json(prob.cov(i).mat())},
                     {"mean", to_json(prob.means[static_cast<size_t>(i)])}});
  }
  return {{"d", prob.d},
          {"n", prob.n()},
          {"p", prob.p},
          {"target", to_json(prob.target.mat())},
          {"components", std::move(comps)}};
}

/// Parses and validates a problem document. Weights must be positive and
/// sum to 1 within 1e-10; they are then renormalized.
inline MixtureProblem problem_from_json(const json& j) {
  if (!j.is_object()) throw FormatError("problem: expected a JSON object");
  for (const char* key : {"d", "p", "target", "components"}) {
    if (!j.contains(key)) throw FormatError(std::string("problem: missing key '") + key + "'");
  }
  if (!j["d"].is_number_integer()) throw FormatError("problem: 'd' must be an integer");
  if (!j["p"].is_array() || !j["components"].is_array()) {
    throw FormatError("problem: 'p' and 'components' must be arrays");
  }
  MixtureProblem prob;
  prob.d = j["d"].get<Index>();
  if (prob.d < 1) throw Error(ErrorCode::InvalidProblem, "d must be positive");
  prob.target = symmetric_from_json(j["target"], "target");
  const auto& comps = j["components"];
  if (j.contains("n") && (!j["n"].is_number_integer() || j["n"].get<size_t>() != comps.size())) {
    throw Error(ErrorCode::DimensionMismatch, "'n' disagrees with the number of components");
  }
  if (j["p"].size() != comps.size()) throw Error(ErrorCode::DimensionMismatch, "one weight per component");
  double total = 0.0;
  for (const auto& w : j["p"]) {
    if (!w.is_number()) throw FormatError("problem: weights must be numbers");
    const double v = w.get<double>();
    if (!(v > 0.0) || !std::isfinite(v)) throw Error(ErrorCode::InvalidProblem, "weights must be positive");
    prob.p.push_back(v);
    total += v;
  }
  if (std::abs(total - 1.0) > 1e-10) {
    std::ostringstream os;
    os << "weights sum to " << std::setprecision(17) << total;
    throw Error(ErrorCode::InvalidProblem, os.str());
  }
  for (double& w : prob.p) w /= total;
  for (size_t i = 0; i < comps.size(); ++i) {
    const auto& c = comps[i];
    const std::string name = "component " + std::to_string(i + 1);
    if (!c.is_object() || !c.contains("cov")) throw FormatError(name + ": missing 'cov'");
    prob.covs.push_back(symmetric_from_json(c["cov"], name + " cov"));
    prob.means.push_back(c.contains("mean") ? vector_from_json(c["mean"], name + " mean")
                                            : Vector::Zero(prob.d));
  }
  validate(prob);
  return prob;
}

inline json read_json_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw FormatError(path + ": " + e.what());
  }
}

inline void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::Io, "cannot open '" + path + "' for writing");
  out << text;
  if (!out) throw Error(ErrorCode::Io, "write failed for '" + path + "'");
}

inline MixtureProblem read_problem(const std::string& path) { return problem_from_json(read_json_file(path)); }

inline std::string sha256_hex(const std::string& bytes) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr) != 1) {
    throw Error(ErrorCode::Io, "SHA-256 failed");
  }
  std::ostringstream os;
  for (unsigned int k = 0; k < len; ++k) os << std::hex << std::setw(2) << std::setfill('0') << int(md[k]);
  return os.str();
}

/// Digest of the canonical serialization (sorted keys, compact, shortest
/// round-trip numbers) of the normalized problem.
inline std::string problem_digest(const MixtureProblem& prob) { return sha256_hex(problem_to_json(prob).dump()); }

// ---- certificates ----

struct Certificate {
  std::string kind;  // "gamma" | "correl"
  Matrix gamma;      // gamma
  Matrix m;          // correl
  SymMat c;          // correl
  std::string input_digest;
  double eps_psd = Tolerances{}.eps_psd;
  std::string status;
  double margin = 0.0;
};

/// Certificate for a Holds verdict of inecov/inecovf (Gamma) or correl (M, C).
inline json certificate_to_json(const MixtureProblem& prob, const Verdict& v, double eps_psd) {
  json payload;
  std::string kind;
  if (const auto* g = v.as<GammaWitness>()) {
    kind = "gamma";
    payload = {{"gamma", to_json(g->gamma)}, {"d", g->d}};
  } else if (const auto* c = v.as<CorrelCertificate>()) {
    kind = "correl";
    payload = {{"m", to_json(c->m)}, {"c", to_json(c->c.mat())}};
  } else {
    throw Error(ErrorCode::InvalidProblem, "verdict carries no certificate");
  }
  return {{"kind", kind},
          {"schema_version", kSchemaVersion},
          {"tool_version", kToolVersion},
          {"input_digest", problem_digest(prob)},
          {"tolerances", {{"eps_psd", eps_psd}}},
          {"payload", std::move(payload)},
          {"status", std::string(to_string(v.status))},
          {"margin", v.margin}};
}

inline Certificate certificate_from_json(const json& j) {
  if (!j.is_object() || !j.contains("kind") || !j.contains("payload") || !j.contains("input_digest")) {
    throw FormatError("certificate: missing kind/payload/input_digest");
  }
  Certificate cert;
  cert.kind = j["kind"].get<std::string>();
  cert.input_digest = j["input_digest"].get<std::string>();
  if (j.contains("tolerances") && j["tolerances"].contains("eps_psd")) {
    cert.eps_psd = j["tolerances"]["eps_psd"].get<double>();
  }
  if (j.contains("status")) cert.status = j["status"].get<std::string>();
  if (j.contains("margin")) cert.margin = j["margin"].get<double>();
  const json& pl = j["payload"];
  if (cert.kind == "gamma") {
    if (!pl.contains("gamma")) throw FormatError("certificate: payload lacks 'gamma'");
    cert.gamma = matrix_from_json(pl["gamma"], "gamma");
  } else if (cert.kind == "correl") {
    if (!pl.contains("m") || !pl.contains("c")) throw FormatError("certificate: payload lacks 'm'/'c'");
    cert.m = matrix_from_json(pl["m"], "m");
    cert.c = symmetric_from_json(pl["c"], "c");
  } else {
    throw FormatError("certificate: unknown kind '" + cert.kind + "'");
  }
  return cert;
}

/// Re-validates a certificate against its problem. A digest mismatch is an
/// invariant violation; otherwise the verdict is recomputed from the
/// payload alone (Gamma check or the (M, C) test of condition (2)).
inline Verdict revalidate(const MixtureProblem& prob, const Certificate& cert) {
  if (cert.input_digest != problem_digest(prob)) {
    throw Error(ErrorCode::InvalidProblem, "certificate was issued for a different problem");
  }
  if (cert.kind == "gamma") {
    if (cert.gamma.rows() != prob.n() * prob.d || cert.gamma.cols() != prob.n() * prob.d) {
      throw Error(ErrorCode::DimensionMismatch, "Gamma must be nd x nd");
    }
    const GammaCheck chk = validate_gamma(prob, cert.gamma, cert.eps_psd);
    Verdict v = make_verdict(chk.ok ? Status::Holds : Status::Fails, chk.slack_min_eigenvalue,
                             GammaWitness{cert.gamma, prob.d});
    v.diagnostics["gamma_min_eigenvalue"] = chk.cone_min_eigenvalue;
    if (!chk.ok) v.notes.push_back(chk.reason);
    return v;
  }
  CorrelConfig cfg;
  cfg.eps_psd = cert.eps_psd;
  return check_correl_with(prob, cert.m, cert.c, cfg);
}

// ---- reports ----

inline json witness_summary(const Witness& w) {
  return std::visit(
      [](const auto& x) -> json {
        using T = std::decay_t<decltype(x)>;
        if constexpr (std::is_same_v<T, std::monostate>) {
          return nullptr;
        } else if constexpr (std::is_same_v<T, GammaWitness>) {
          return {{"type", "gamma"}, {"gamma", to_json(x.gamma)}};
        } else if constexpr (std::is_same_v<T, CorrelCertificate>) {
          return {{"type", "correl"}, {"m", to_json(x.m)}, {"c", to_json(x.c.mat())},
                  {"d", to_json(x.d)}, {"associated_with_hat", x.associated_with_hat}};
        } else if constexpr (std::is_same_v<T, DirectionWitness>) {
          return {{"type", "direction"}, {"xi", to_json(x.xi)}, {"value", x.value}};
        } else if constexpr (std::is_same_v<T, AlphaWitness>) {
          return {{"type", "alpha"}, {"alpha", x.alpha}, {"xi", to_json(x.xi)},
                  {"min_eigenvalue", x.min_eigenvalue}};
        } else if constexpr (std::is_same_v<T, IndexWitness>) {
          return {{"type", "index"}, {"index", x.index + 1}, {"xi", to_json(x.xi)}, {"gap", x.gap}};
        } else if constexpr (std::is_same_v<T, FunctionWitness>) {
          return {{"type", "function"}, {"description", x.description}, {"lhs", x.lhs}, {"rhs", x.rhs}};
        } else {
          return {{"type", "exponential"}, {"index", x.index + 1}, {"xi", to_json(x.xi)},
                  {"lambda", x.lambda}, {"log_lhs", x.log_lhs}, {"log_rhs", x.log_rhs}};
        }
      },
      w);
}

inline json verdict_to_json(const Verdict& v) {
  json diag = json::object();
  for (const auto& [k, x] : v.diagnostics) diag[k] = std::isfinite(x) ? json(x) : json(nullptr);
  return {{"status", std::string(to_string(v.status))},
          {"margin", std::isfinite(v.margin) ? json(v.margin) : json(nullptr)},
          {"boundary", v.boundary},
          {"evidence_only", v.evidence_only},
          {"witness", witness_summary(v.witness)},
          {"diagnostics", std::move(diag)},
          {"notes", v.notes}};
}

}  // namespace gmcvx::io
