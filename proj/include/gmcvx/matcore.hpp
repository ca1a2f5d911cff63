#pragma once

// Dense symmetric matrix algebra for small dimensions (d up to a few dozen).
//
// Every routine that needs a spectrum goes through the cyclic Jacobi solver
// below; Eigen is only used for storage and products.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include "gmcvx/error.hpp"

namespace gmcvx {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

struct Tolerances {
  double eps_psd = 1e-9;    // relative slack accepted on minimum eigenvalues
  double rank_tol = 1e-10;  // eigenvalues below rank_tol * lambda_max count as zero
};

/// Symmetric matrix with mirrored storage: entry (i,j) and (j,i) are the same
/// double, bit for bit.
class SymMat {
 public:
  SymMat() = default;

  explicit SymMat(Index dim) : m_(Matrix::Zero(dim, dim)) {}

  /// Builds from the upper triangle of `m`; the lower triangle is ignored.
  static SymMat from_upper(const Matrix& m) {
    if (m.rows() != m.cols()) {
      throw Error(ErrorCode::DimensionMismatch, "symmetric matrix must be square");
    }
    SymMat s;
    s.m_ = m;
    for (Index j = 0; j < m.cols(); ++j) {
      for (Index i = j + 1; i < m.rows(); ++i) s.m_(i, j) = m(j, i);
    }
    return s;
  }

  /// Like from_upper, but rejects inputs whose asymmetry exceeds
  /// tol * (1 + max |entry|).
  static SymMat checked(const Matrix& m, double tol = 1e-12) {
    if (m.rows() != m.cols()) {
      throw Error(ErrorCode::DimensionMismatch, "symmetric matrix must be square");
    }
    if (!m.allFinite()) throw Error(ErrorCode::InvalidMatrix, "non-finite entry");
    const double scale = 1.0 + (m.size() > 0 ? m.cwiseAbs().maxCoeff() : 0.0);
    for (Index i = 0; i < m.rows(); ++i) {
      for (Index j = i + 1; j < m.cols(); ++j) {
        if (std::abs(m(i, j) - m(j, i)) > tol * scale) {
          throw Error(ErrorCode::InvalidMatrix, "matrix is not symmetric");
        }
      }
    }
    return from_upper(m);
  }

  static SymMat identity(Index dim) { return from_upper(Matrix::Identity(dim, dim)); }

  static SymMat diagonal(const Vector& diag) {
    return from_upper(Matrix(diag.asDiagonal()));
  }

  Index dim() const { return m_.rows(); }
  const Matrix& mat() const { return m_; }
  double operator()(Index i, Index j) const { return m_(i, j); }

  SymMat operator+(const SymMat& o) const { return raw(m_ + o.m_); }
  SymMat operator-(const SymMat& o) const { return raw(m_ - o.m_); }
  SymMat operator*(double s) const { return raw(m_ * s); }
  friend SymMat operator*(double s, const SymMat& a) { return a * s; }
  SymMat& operator+=(const SymMat& o) {
    m_ += o.m_;
    return *this;
  }

  bool operator==(const SymMat& o) const { return m_ == o.m_; }

 private:
  // Elementwise operations on two mirrored matrices stay mirrored.
  static SymMat raw(Matrix m) {
    SymMat s;
    s.m_ = std::move(m);
    return s;
  }

  Matrix m_;
};

/// M * S * M^T, mirrored.
inline SymMat congruence(const Matrix& m, const SymMat& s) {
  return SymMat::from_upper(m * s.mat() * m.transpose());
}

struct SpectralDecomp {
  Vector eigenvalues;   // ascending
  Matrix eigenvectors;  // columns, orthonormal

  SymMat reconstruct() const {
    return SymMat::from_upper(eigenvectors * eigenvalues.asDiagonal() * eigenvectors.transpose());
  }

  double min_eigenvalue() const { return eigenvalues.size() ? eigenvalues(0) : 0.0; }
  double max_eigenvalue() const {
    return eigenvalues.size() ? eigenvalues(eigenvalues.size() - 1) : 0.0;
  }
  double spectral_norm() const {
    return eigenvalues.size() ? std::max(std::abs(eigenvalues(0)),
                                         std::abs(eigenvalues(eigenvalues.size() - 1)))
                              : 0.0;
  }
};

namespace detail {

// Cyclic Jacobi on a symmetric matrix held in `a` (overwritten). Stops when the
// off-diagonal Frobenius norm drops to 1e-13 of the input Frobenius norm.
inline void jacobi_in_place(Matrix& a, Vector& w, Matrix& v, int max_sweeps = 100) {
  const Index n = a.rows();
  v.setIdentity(n, n);
  const double fro = a.norm();
  if (fro > 0.0) {
    const double target = 1e-13 * fro;
    for (int sweep = 0; sweep < max_sweeps; ++sweep) {
      double off = 0.0;
      for (Index p = 0; p < n; ++p) {
        for (Index q = p + 1; q < n; ++q) off += a(p, q) * a(p, q);
      }
      if (std::sqrt(2.0 * off) <= target) break;
      for (Index p = 0; p < n; ++p) {
        for (Index q = p + 1; q < n; ++q) {
          const double apq = a(p, q);
          if (apq == 0.0) continue;
          const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
          const double t = std::copysign(1.0, theta) / (std::abs(theta) + std::hypot(theta, 1.0));
          const double c = 1.0 / std::sqrt(t * t + 1.0);
          const double s = t * c;
          for (Index k = 0; k < n; ++k) {
            const double akp = a(k, p);
            const double akq = a(k, q);
            a(k, p) = c * akp - s * akq;
            a(k, q) = s * akp + c * akq;
          }
          for (Index k = 0; k < n; ++k) {
            const double apk = a(p, k);
            const double aqk = a(q, k);
            a(p, k) = c * apk - s * aqk;
            a(q, k) = s * apk + c * aqk;
          }
          a(p, q) = 0.0;
          a(q, p) = 0.0;
          for (Index k = 0; k < n; ++k) {
            const double vkp = v(k, p);
            const double vkq = v(k, q);
            v(k, p) = c * vkp - s * vkq;
            v(k, q) = s * vkp + c * vkq;
          }
        }
      }
    }
  }
  std::vector<Index> order(static_cast<size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Index x, Index y) { return a(x, x) < a(y, y); });
  w.resize(n);
  Matrix sorted(n, n);
  for (Index k = 0; k < n; ++k) {
    w(k) = a(order[static_cast<size_t>(k)], order[static_cast<size_t>(k)]);
    sorted.col(k) = v.col(order[static_cast<size_t>(k)]);
  }
  v = std::move(sorted);
}

inline void require_finite(const Matrix& m) {
  if (!m.allFinite()) throw Error(ErrorCode::InvalidMatrix, "non-finite entry");
}

// Eigen-decomposition of a symmetric matrix given as a plain Matrix; the
// lower triangle is mirrored from the upper one first.
inline SpectralDecomp eigen_raw(const Matrix& m) {
  require_finite(m);
  Matrix a = SymMat::from_upper(m).mat();
  SpectralDecomp out;
  jacobi_in_place(a, out.eigenvalues, out.eigenvectors);
  return out;
}

// Projection onto the PSD cone (Frobenius norm) of a symmetric matrix.
inline Matrix psd_projection_raw(const Matrix& m, double* min_eig = nullptr) {
  SpectralDecomp e = eigen_raw(m);
  if (min_eig) *min_eig = e.min_eigenvalue();
  Vector clamped = e.eigenvalues.cwiseMax(0.0);
  Matrix p = e.eigenvectors * clamped.asDiagonal() * e.eigenvectors.transpose();
  return SymMat::from_upper(p).mat();
}

inline double psd_threshold(double eps, double norm2) { return -eps * (1.0 + norm2); }

}  // namespace detail

inline SpectralDecomp eigen_sym(const SymMat& a) { return detail::eigen_raw(a.mat()); }

struct PsdCheck {
  bool psd = false;
  double min_eigenvalue = 0.0;
  Vector min_eigenvector;  // unit vector attaining min_eigenvalue
};

/// true iff lambda_min(A) >= -eps * (1 + ||A||_2).
inline PsdCheck is_psd(const SymMat& a, double eps = Tolerances{}.eps_psd) {
  const SpectralDecomp e = eigen_sym(a);
  PsdCheck out;
  out.min_eigenvalue = e.min_eigenvalue();
  out.min_eigenvector = e.eigenvectors.col(0);
  out.psd = out.min_eigenvalue >= detail::psd_threshold(eps, e.spectral_norm());
  return out;
}

inline double min_eigenvalue(const SymMat& a) { return eigen_sym(a).min_eigenvalue(); }

inline double spectral_norm(const SymMat& a) { return eigen_sym(a).spectral_norm(); }

/// Nearest PSD matrix in Frobenius norm (negative eigenvalues clamped).
inline SymMat psd_part(const SymMat& a) {
  return SymMat::from_upper(detail::psd_projection_raw(a.mat()));
}

namespace detail {

inline SpectralDecomp require_psd(const SymMat& a, double eps, const char* what) {
  SpectralDecomp e = eigen_sym(a);
  if (e.min_eigenvalue() < psd_threshold(eps, e.spectral_norm())) {
    throw Error(ErrorCode::NotPSD, std::string(what) + ": minimum eigenvalue " +
                                       std::to_string(e.min_eigenvalue()));
  }
  return e;
}

inline SymMat spectral_map(const SpectralDecomp& e, const Vector& values) {
  return SymMat::from_upper(e.eigenvectors * values.asDiagonal() * e.eigenvectors.transpose());
}

}  // namespace detail

/// Unique PSD square root; eigenvalues within the PSD slack below zero are
/// clamped to zero.
inline SymMat sqrt_psd(const SymMat& a, double eps = Tolerances{}.eps_psd) {
  const SpectralDecomp e = detail::require_psd(a, eps, "sqrt_psd");
  return detail::spectral_map(e, e.eigenvalues.cwiseMax(0.0).cwiseSqrt());
}

/// Moore-Penrose pseudo-inverse of a PSD matrix.
inline SymMat pinv_psd(const SymMat& a, const Tolerances& tol = {}) {
  const SpectralDecomp e = detail::require_psd(a, tol.eps_psd, "pinv_psd");
  const double cut = tol.rank_tol * std::max(e.max_eigenvalue(), 0.0);
  Vector inv(e.eigenvalues.size());
  for (Index k = 0; k < inv.size(); ++k) {
    const double l = e.eigenvalues(k);
    inv(k) = (l > cut && l > 0.0) ? 1.0 / l : 0.0;
  }
  return detail::spectral_map(e, inv);
}

/// Pseudo-inverse square root (Sigma^{+1/2}); used for whitening.
inline SymMat pinv_sqrt_psd(const SymMat& a, const Tolerances& tol = {}) {
  const SpectralDecomp e = detail::require_psd(a, tol.eps_psd, "pinv_sqrt_psd");
  const double cut = tol.rank_tol * std::max(e.max_eigenvalue(), 0.0);
  Vector inv(e.eigenvalues.size());
  for (Index k = 0; k < inv.size(); ++k) {
    const double l = e.eigenvalues(k);
    inv(k) = (l > cut && l > 0.0) ? 1.0 / std::sqrt(l) : 0.0;
  }
  return detail::spectral_map(e, inv);
}

struct CorrelationOf {
  SymMat corr;                    // unit diagonal
  Vector scales;                  // sqrt of the source diagonal
  std::vector<bool> degenerate;   // diagonal entry treated as zero
};

/// Correlation matrix associated with a PSD matrix. Rows with a (relatively)
/// vanishing diagonal get a unit diagonal and zero off-diagonal entries.
inline CorrelationOf correlation_of(const SymMat& a, double eps = Tolerances{}.eps_psd) {
  detail::require_psd(a, eps, "correlation_of");
  const Index d = a.dim();
  CorrelationOf out;
  out.scales.resize(d);
  out.degenerate.assign(static_cast<size_t>(d), false);
  const double max_diag = d ? a.mat().diagonal().maxCoeff() : 0.0;
  const double cut = eps * max_diag;
  for (Index k = 0; k < d; ++k) {
    const double akk = a(k, k);
    out.degenerate[static_cast<size_t>(k)] = !(akk > cut) || akk <= 0.0;
    out.scales(k) = out.degenerate[static_cast<size_t>(k)] ? 0.0 : std::sqrt(akk);
  }
  Matrix c = Matrix::Identity(d, d);
  for (Index k = 0; k < d; ++k) {
    for (Index l = k + 1; l < d; ++l) {
      if (out.degenerate[static_cast<size_t>(k)] || out.degenerate[static_cast<size_t>(l)]) continue;
      c(k, l) = std::clamp(a(k, l) / (out.scales(k) * out.scales(l)), -1.0, 1.0);
    }
  }
  out.corr = SymMat::from_upper(c);
  return out;
}

/// S1 - Theta * pinv(S2) * Theta^T. When S2 is singular, Theta^T must map
/// into range(S2).
inline SymMat schur_complement(const SymMat& s1, const Matrix& theta, const SymMat& s2,
                               const Tolerances& tol = {}) {
  if (theta.rows() != s1.dim() || theta.cols() != s2.dim()) {
    throw Error(ErrorCode::DimensionMismatch, "schur_complement: Theta shape");
  }
  const SymMat inv = pinv_psd(s2, tol);
  const Matrix proj = s2.mat() * inv.mat();
  const Matrix leak = theta.transpose() - proj * theta.transpose();
  const double bound = 1e-8 * (1.0 + theta.norm());
  if (leak.norm() > bound) {
    throw Error(ErrorCode::RangeViolation, "Theta^T leaves range(S2)");
  }
  return SymMat::from_upper(s1.mat() - theta * inv.mat() * theta.transpose());
}

namespace detail {

// Appends to `rows` (orthonormal rows) the Gram-Schmidt residual of `cand`
// when it is not (numerically) in their span. Returns true on success.
inline bool gram_schmidt_push(Matrix& rows, Index filled, Vector cand) {
  for (int pass = 0; pass < 2; ++pass) {
    for (Index r = 0; r < filled; ++r) cand -= rows.row(r).dot(cand) * rows.row(r).transpose();
  }
  const double nrm = cand.norm();
  if (nrm < 1e-8) return false;
  rows.row(filled) = cand.transpose() / nrm;
  return true;
}

}  // namespace detail

/// Orthogonal q x q matrix O with Sigma^{1/2} * O(0:d, :) = Theta, for a
/// d x q matrix Theta with Theta Theta^T = Sigma. Rows outside range(Sigma)
/// and the trailing q - d rows are completed by Gram-Schmidt, preferring the
/// null eigenvectors of Sigma and then the canonical basis.
inline Matrix polar_factor(const Matrix& theta, const SymMat& sigma, const Tolerances& tol = {}) {
  const Index d = sigma.dim();
  const Index q = theta.cols();
  if (theta.rows() != d || q < d) {
    throw Error(ErrorCode::DimensionMismatch, "polar_factor: Theta must be d x q with q >= d");
  }
  const Matrix gram = theta * theta.transpose();
  if ((gram - sigma.mat()).norm() > 1e-8 * (1.0 + sigma.mat().norm())) {
    throw Error(ErrorCode::FactorMismatch, "Theta Theta^T differs from Sigma");
  }
  const SpectralDecomp e = detail::require_psd(sigma, tol.eps_psd, "polar_factor");
  const double cut = tol.rank_tol * std::max(e.max_eigenvalue(), 0.0);

  // Rows expressed in the eigenbasis of Sigma: u_k^T Theta / sqrt(lambda_k)
  // on the range, completed on the kernel.
  Matrix eig_rows = Matrix::Zero(d, q);
  std::vector<Index> range_idx;
  std::vector<Index> null_idx;
  for (Index k = d - 1; k >= 0; --k) {
    const double l = e.eigenvalues(k);
    (l > cut && l > 0.0 ? range_idx : null_idx).push_back(k);
  }
  Matrix basis(q, q);
  Index filled = 0;
  for (Index k : range_idx) {
    Vector row = (e.eigenvectors.col(k).transpose() * theta).transpose() /
                 std::sqrt(e.eigenvalues(k));
    if (!detail::gram_schmidt_push(basis, filled, row)) {
      throw Error(ErrorCode::FactorMismatch, "degenerate range row in polar_factor");
    }
    eig_rows.row(k) = basis.row(filled);
    ++filled;
  }
  for (Index k : null_idx) {
    Vector cand = Vector::Zero(q);
    cand.head(d) = e.eigenvectors.col(k);
    bool ok = detail::gram_schmidt_push(basis, filled, cand);
    for (Index j = 0; !ok && j < q; ++j) {
      ok = detail::gram_schmidt_push(basis, filled, Vector::Unit(q, j));
    }
    if (!ok) throw Error(ErrorCode::FactorMismatch, "cannot complete orthonormal rows");
    eig_rows.row(k) = basis.row(filled);
    ++filled;
  }
  Matrix out(q, q);
  out.topRows(d) = e.eigenvectors * eig_rows;
  // Re-seed the basis with the rotated rows so the tail is orthogonal to them.
  Matrix tail_basis(q, q);
  tail_basis.topRows(d) = out.topRows(d);
  filled = d;
  for (Index j = 0; j < q && filled < q; ++j) {
    if (detail::gram_schmidt_push(tail_basis, filled, Vector::Unit(q, j))) ++filled;
  }
  if (filled < q) throw Error(ErrorCode::FactorMismatch, "cannot complete orthogonal matrix");
  out.bottomRows(q - d) = tail_basis.bottomRows(q - d);
  return out;
}

/// Lower-triangular L with L L^T = A and nonnegative diagonal. Rank
/// deficiencies produce zero columns.
inline Matrix cholesky_lower(const SymMat& a, double eps = Tolerances{}.eps_psd) {
  const Index n = a.dim();
  detail::require_finite(a.mat());
  const double scale = n ? a.mat().diagonal().cwiseAbs().maxCoeff() : 0.0;
  Matrix l = Matrix::Zero(n, n);
  for (Index j = 0; j < n; ++j) {
    double djj = a(j, j);
    for (Index k = 0; k < j; ++k) djj -= l(j, k) * l(j, k);
    if (djj < -eps * (1.0 + scale) * 10.0) {
      throw Error(ErrorCode::NotPSD, "cholesky_lower: negative pivot");
    }
    if (djj <= eps * (1.0 + scale)) {
      // Semidefinite pivot: the rest of the column must vanish as well.
      for (Index i = j + 1; i < n; ++i) {
        double r = a(i, j);
        for (Index k = 0; k < j; ++k) r -= l(i, k) * l(j, k);
        if (std::abs(r) > std::sqrt(eps) * (1.0 + scale)) {
          throw Error(ErrorCode::NotPSD, "cholesky_lower: indefinite at zero pivot");
        }
      }
      continue;
    }
    const double ljj = std::sqrt(djj);
    l(j, j) = ljj;
    for (Index i = j + 1; i < n; ++i) {
      double r = a(i, j);
      for (Index k = 0; k < j; ++k) r -= l(i, k) * l(j, k);
      l(i, j) = r / ljj;
    }
  }
  return l;
}

/// Extracts the d x d block (i, j) of a block matrix.
inline Matrix block_of(const Matrix& m, Index d, Index i, Index j) {
  return m.block(i * d, j * d, d, d);
}

}  // namespace gmcvx
