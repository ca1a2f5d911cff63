#include <gtest/gtest.h>

#include <Eigen/Eigenvalues>

#include "gmcvx/gallery.hpp"
#include "gmcvx/matcore.hpp"
#include "gmcvx/rng.hpp"

using namespace gmcvx;

namespace {

Matrix random_symmetric(Index n, CounterRng& rng) {
  Matrix m(n, n);
  for (Index r = 0; r < n; ++r) {
    for (Index c = 0; c < n; ++c) m(r, c) = rng.normal();
  }
  return 0.5 * (m + m.transpose());
}

}  // namespace

TEST(SymMat, MirroredStorage) {
  Matrix m(2, 2);
  m << 1, 2, 7, 3;
  const SymMat s = SymMat::from_upper(m);
  EXPECT_EQ(s(1, 0), 2.0);
  EXPECT_EQ(s(0, 1), s(1, 0));
  EXPECT_THROW(SymMat::checked(m), Error);
}

TEST(IsPsd, Identity) {
  const PsdCheck c = is_psd(SymMat::identity(2));
  EXPECT_TRUE(c.psd);
  EXPECT_NEAR(c.min_eigenvalue, 1.0, 1e-15);
}

TEST(IsPsd, IndefiniteTwoByTwo) {
  const PsdCheck c = is_psd(gallery::sym2(1, -1, -1));
  EXPECT_FALSE(c.psd);
  EXPECT_NEAR(c.min_eigenvalue, -std::sqrt(2.0), 1e-14);
}

TEST(IsPsd, Example3GammaAt17Over3) {
  const Matrix g = gallery::example3_gamma(17.0 / 3.0, 1.0);
  const PsdCheck c = is_psd(SymMat::checked(g));
  EXPECT_FALSE(c.psd);
  EXPECT_NEAR(c.min_eigenvalue, -2.58, 0.01);
}

TEST(IsPsd, NonFiniteRejected) {
  Matrix m = Matrix::Identity(2, 2);
  m(0, 0) = std::numeric_limits<double>::quiet_NaN();
  try {
    is_psd(SymMat::from_upper(m));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::InvalidMatrix);
  }
}

// Jacobi against Eigen's tridiagonal QR solver on 1000 random symmetric matrices.
TEST(EigenSym, AgreesWithIndependentSolver) {
  CounterRng rng(2024, 1);
  for (int t = 0; t < 1000; ++t) {
    const Index n = 1 + static_cast<Index>(rng.next_u64() % 6);
    const Matrix a = random_symmetric(n, rng);
    const SpectralDecomp e = eigen_sym(SymMat::from_upper(a));
    Eigen::SelfAdjointEigenSolver<Matrix> oracle(a);
    ASSERT_LE((e.eigenvalues - oracle.eigenvalues()).norm(), 1e-10 * (1 + a.norm()));
    ASSERT_LE((e.reconstruct().mat() - a).norm(), 1e-10 * (1 + a.norm()));
    ASSERT_LE((e.eigenvectors * e.eigenvectors.transpose() - Matrix::Identity(n, n)).norm(), 1e-10);
    const bool expected = oracle.eigenvalues()(0) >= -1e-9 * (1 + oracle.eigenvalues().cwiseAbs().maxCoeff());
    ASSERT_EQ(is_psd(SymMat::from_upper(a)).psd, expected);
  }
}

TEST(SqrtPsd, DiagonalAndIdentity) {
  EXPECT_TRUE(sqrt_psd(gallery::sym2(4, 0, 9)).mat().isApprox(gallery::sym2(2, 0, 3).mat(), 1e-14));
  EXPECT_TRUE(sqrt_psd(SymMat::identity(3)).mat().isApprox(Matrix::Identity(3, 3), 1e-14));
}

TEST(SqrtPsd, RandomSquaresBack) {
  CounterRng rng(5);
  for (int t = 0; t < 50; ++t) {
    const SymMat a = random_psd(3, rng);
    const Matrix s = sqrt_psd(a).mat();
    EXPECT_LE((s * s - a.mat()).norm(), 1e-9 * (1 + a.mat().norm()));
    EXPECT_TRUE(is_psd(SymMat::from_upper(s)).psd);
  }
}

TEST(SqrtPsd, RejectsIndefinite) {
  try {
    sqrt_psd(gallery::sym2(1, 0, -1));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NotPSD);
  }
}

TEST(PinvPsd, Cases) {
  EXPECT_TRUE(pinv_psd(gallery::sym2(2, 0, 0)).mat().isApprox(gallery::sym2(0.5, 0, 0).mat(), 1e-14));
  EXPECT_TRUE(pinv_psd(SymMat::identity(2)).mat().isApprox(Matrix::Identity(2, 2), 1e-14));
  Vector v(3);
  v << 1, -2, 0.5;
  const Matrix p = v * v.transpose();
  const Matrix q = pinv_psd(SymMat::from_upper(p)).mat();
  EXPECT_LE((q - p / std::pow(v.squaredNorm(), 2)).norm(), 1e-12);
  EXPECT_LE((p * q * p - p).norm(), 1e-8);
}

TEST(CorrelationOf, Cases) {
  const CorrelationOf a = correlation_of(gallery::sym2(8, 0, 4));
  EXPECT_EQ(a.corr.mat(), Matrix::Identity(2, 2));
  EXPECT_DOUBLE_EQ(a.scales(0), std::sqrt(8.0));
  EXPECT_DOUBLE_EQ(a.scales(1), 2.0);

  const CorrelationOf b = correlation_of(gallery::sym2(4, 2, 4));
  EXPECT_NEAR(b.corr(0, 1), 0.5, 1e-15);
  EXPECT_EQ(b.corr(0, 0), 1.0);

  const CorrelationOf c = correlation_of(gallery::sym2(4, 0, 0));
  EXPECT_EQ(c.corr.mat(), Matrix::Identity(2, 2));
  EXPECT_EQ(c.scales(1), 0.0);
  EXPECT_TRUE(c.degenerate[1]);
}

TEST(CorrelationOf, UnitDiagonalExactly) {
  CounterRng rng(17);
  for (int t = 0; t < 100; ++t) {
    const CorrelationOf c = correlation_of(random_psd(4, rng));
    for (Index k = 0; k < 4; ++k) ASSERT_EQ(c.corr(k, k), 1.0);
    ASSERT_TRUE(is_psd(c.corr).psd);
  }
}

TEST(SchurComplement, Cases) {
  const SymMat eye = SymMat::identity(2);
  EXPECT_TRUE(schur_complement(eye, Matrix::Zero(2, 2), eye).mat().isApprox(Matrix::Identity(2, 2)));

  CounterRng rng(3);
  const SymMat s1 = random_psd(3, rng);
  const SymMat s2 = random_psd(3, rng);
  EXPECT_LE((schur_complement(s1, Matrix::Zero(3, 3), s2).mat() - s1.mat()).norm(), 1e-12);

  // Theta = S1 S2^T with S_i S_i^T = Sigma_i makes the complement vanish.
  const Matrix r1 = sqrt_psd(s1).mat();
  const Matrix r2 = sqrt_psd(s2).mat() * random_orthogonal(3, rng);
  const SymMat z = schur_complement(s1, r1 * r2.transpose(), s2);
  EXPECT_LE(z.mat().norm(), 1e-8 * (1 + s1.mat().norm()));
}

TEST(SchurComplement, RangeViolation) {
  Matrix theta = Matrix::Zero(2, 2);
  theta(0, 1) = 1.0;  // Theta^T has a component along e2, outside range(diag(1, 0))
  try {
    schur_complement(SymMat::identity(2), theta, gallery::sym2(1, 0, 0));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::RangeViolation);
  }
}

TEST(PolarFactor, Cases) {
  CounterRng rng(11);
  const SymMat sigma = random_psd(3, rng);
  const Matrix root = sqrt_psd(sigma).mat();
  EXPECT_LE((polar_factor(root, sigma) - Matrix::Identity(3, 3)).norm(), 1e-7);

  for (int t = 0; t < 20; ++t) {
    const SymMat s = random_psd(3, rng);
    const Matrix r = random_orthogonal(3, rng);
    const Matrix sr = sqrt_psd(s).mat();
    const Matrix o = polar_factor(sr * r, s);
    EXPECT_LE((o * o.transpose() - Matrix::Identity(3, 3)).norm(), 1e-8);
    EXPECT_LE((sr * o - sr * r).norm(), 1e-7);
  }

  Matrix theta(1, 2);
  theta << 3, 4;
  Matrix s(1, 1);
  s << 25;
  const Matrix o = polar_factor(theta, SymMat::from_upper(s));
  EXPECT_NEAR(o(0, 0), 0.6, 1e-12);
  EXPECT_NEAR(o(0, 1), 0.8, 1e-12);
  EXPECT_LE((o * o.transpose() - Matrix::Identity(2, 2)).norm(), 1e-12);
}

TEST(PolarFactor, Mismatch) {
  try {
    polar_factor(Matrix::Identity(2, 2), gallery::sym2(4, 0, 1));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::FactorMismatch);
  }
}

TEST(Cholesky, Cases) {
  EXPECT_TRUE(cholesky_lower(gallery::sym2(4, 0, 9)).isApprox(gallery::sym2(2, 0, 3).mat()));
  Matrix l(2, 2);
  l << 2, 0, 1, 2;
  EXPECT_LE((cholesky_lower(gallery::sym2(4, 2, 5)) - l).norm(), 1e-14);

  CounterRng rng(23);
  for (int t = 0; t < 50; ++t) {
    const SymMat a = random_psd(4, rng, t % 2 ? 2 : -1);
    const Matrix f = cholesky_lower(a);
    EXPECT_LE((f * f.transpose() - a.mat()).norm(), 1e-9 * (1 + a.mat().norm()));
    EXPECT_GE(f.diagonal().minCoeff(), 0.0);
    EXPECT_TRUE(f.isLowerTriangular());
  }
}
