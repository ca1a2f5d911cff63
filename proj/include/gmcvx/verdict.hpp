#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "gmcvx/matcore.hpp"

namespace gmcvx {

enum class Status { Holds, Fails, Unknown };

inline std::string_view to_string(Status s) {
  switch (s) {
    case Status::Holds: return "Holds";
    case Status::Fails: return "Fails";
    case Status::Unknown: return "Unknown";
  }
  return "Unknown";
}

/// Symmetric nd x nd coupling covariance; block (i, i) is Sigma_i.
struct GammaWitness {
  Matrix gamma;
  Index d = 0;

  Index n() const { return d ? gamma.rows() / d : 0; }
  Matrix block(Index i, Index j) const { return gamma.block(i * d, j * d, d, d); }
};

/// (M, C) with the derived scalings of condition (2).
struct CorrelCertificate {
  Matrix m;
  SymMat c;
  std::vector<Vector> d_i;  // diagonals of D_i
  Vector d;                 // diagonal of D = sum p_i D_i
  Matrix b;                 // nd x d stack of diagonal blocks
  bool associated_with_hat = false;  // C also a correlation of Sigma-hat
};

/// Direction where sum p_i sqrt(xi' S_i xi) - sqrt(xi' S xi) = value < 0.
struct DirectionWitness {
  Vector xi;
  double value = 0.0;
};

/// n = 2 skew witness: lambda_min(P(alpha)) < 0 with eigenvector xi.
struct AlphaWitness {
  double alpha = 0.0;
  Vector xi;
  double min_eigenvalue = 0.0;
};

/// Component i with xi' Sigma_i xi > xi' Sigma xi.
struct IndexWitness {
  Index index = 0;  // zero-based
  Vector xi;
  double gap = 0.0;
};

/// Convex test function whose expectations are out of order.
struct FunctionWitness {
  std::string description;
  double lhs = 0.0;
  double rhs = 0.0;
};

/// Exponential falsifier of reverse dominance: sum p_i e^{l^2 xi'S_i xi/2}
/// against e^{l^2 xi'S xi/2}, compared in the log domain.
struct ExpWitness {
  Index index = 0;
  Vector xi;
  double lambda = 0.0;
  double log_lhs = 0.0;  // log of the target-side expectation
  double log_rhs = 0.0;  // log of the mixture-side expectation
};

using Witness = std::variant<std::monostate, GammaWitness, CorrelCertificate, DirectionWitness,
                             AlphaWitness, IndexWitness, FunctionWitness, ExpWitness>;

struct Verdict {
  Status status = Status::Unknown;
  double margin = 0.0;
  bool boundary = false;       // |margin| within the decision tolerance
  bool evidence_only = false;  // Holds only up to a finite test suite
  Witness witness;
  std::map<std::string, double> diagnostics;
  std::vector<std::string> notes;

  template <class T>
  const T* as() const {
    return std::get_if<T>(&witness);
  }
};

inline Verdict make_verdict(Status s, double margin, Witness w = {}) {
  Verdict v;
  v.status = s;
  v.margin = margin;
  v.witness = std::move(w);
  return v;
}

}  // namespace gmcvx
