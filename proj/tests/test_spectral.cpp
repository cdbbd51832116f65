#include <gtest/gtest.h>

#include <Eigen/Eigenvalues>

#include <cmath>
#include <random>

#include "hsc/basis_cache.hpp"
#include "hsc/errors.hpp"
#include "hsc/spectral.hpp"

namespace {

using hsc::Mat;
using hsc::Vec;
using Eigen::MatrixXd;
using Eigen::VectorXd;

double closed_form_q1(Eigen::Index n, Eigen::Index j) {
  const double s = std::sin(static_cast<double>(j) * M_PI / (2.0 * static_cast<double>(n)));
  return 4.0 * s * s;
}

TEST(DifferenceOperator, FirstOrderRows) {
  const MatrixXd d = hsc::difference_operator<double>(3, 1);
  MatrixXd expected(2, 3);
  expected << -1, 1, 0, 0, -1, 1;
  EXPECT_EQ(d, expected);
}

TEST(DifferenceOperator, SecondOrderRows) {
  const MatrixXd d = hsc::difference_operator<double>(4, 2);
  MatrixXd expected(2, 4);
  expected << 1, -2, 1, 0, 0, 1, -2, 1;
  EXPECT_EQ(d, expected);
}

TEST(DifferenceOperator, RejectsShortSeries) {
  EXPECT_THROW(hsc::difference_operator<double>(2, 2), hsc::ValidationError);
}

TEST(PenaltyMatrix, ThreeByThree) {
  const MatrixXd k = hsc::penalty_matrix<double>(3, 1);
  MatrixXd expected(3, 3);
  expected << 1, -1, 0, -1, 2, -1, 0, -1, 1;
  EXPECT_EQ(k, expected);
  const auto b = hsc::spectral_basis<double>(3, 1);
  EXPECT_NEAR(b.eigenvalues(0), 0.0, 1e-14);
  EXPECT_NEAR(b.eigenvalues(1), 1.0, 1e-12);
  EXPECT_NEAR(b.eigenvalues(2), 3.0, 1e-12);
}

TEST(PenaltyMatrix, AnnihilatesPolynomials) {
  const Eigen::Index n = 12;
  VectorXd ones = VectorXd::Ones(n);
  VectorXd t(n);
  for (Eigen::Index i = 0; i < n; ++i) t(i) = static_cast<double>(i + 1);
  EXPECT_LT((hsc::penalty_matrix<double>(n, 1) * ones).norm(), 1e-14);
  EXPECT_LT((hsc::penalty_matrix<double>(n, 2) * ones).norm(), 1e-14);
  EXPECT_LT((hsc::penalty_matrix<double>(n, 2) * t).norm(), 1e-12);
}

class BasisSizes : public ::testing::TestWithParam<std::tuple<int, int>> {};

TEST_P(BasisSizes, OrthonormalAndReconstructs) {
  const auto [n, q] = GetParam();
  const auto b = hsc::spectral_basis<double>(n, q);
  const MatrixXd k = hsc::penalty_matrix<double>(n, q);
  const MatrixXd& v = b.eigenvectors;
  EXPECT_LT((v.transpose() * v - MatrixXd::Identity(n, n)).cwiseAbs().maxCoeff(), 1e-10);
  EXPECT_LT((v * b.eigenvalues.asDiagonal() * v.transpose() - k).cwiseAbs().maxCoeff(), 1e-8);
  EXPECT_LT((k * v - v * b.eigenvalues.asDiagonal()).cwiseAbs().maxCoeff(), 1e-8);
  for (Eigen::Index j = 1; j < n; ++j) EXPECT_LE(b.eigenvalues(j - 1), b.eigenvalues(j));
  EXPECT_EQ(b.null_dim, q);
}

TEST_P(BasisSizes, NullProjectorMatchesPolynomials) {
  const auto [n, q] = GetParam();
  const auto b = hsc::spectral_basis<double>(n, q);
  VectorXd t(n);
  for (Eigen::Index i = 0; i < n; ++i) t(i) = static_cast<double>(i + 1);
  const MatrixXd pp = b.orth_projector();
  EXPECT_LT((pp * VectorXd::Ones(n)).cwiseAbs().maxCoeff(), 1e-10);
  if (q == 2) EXPECT_LT((pp * t).cwiseAbs().maxCoeff(), 1e-9 * n);
  const MatrixXd p0 = b.null_projector();
  EXPECT_LT((p0 + pp - MatrixXd::Identity(n, n)).cwiseAbs().maxCoeff(), 1e-12);
}

INSTANTIATE_TEST_SUITE_P(Sizes, BasisSizes,
                         ::testing::Values(std::make_tuple(3, 1), std::make_tuple(10, 1),
                                           std::make_tuple(10, 2), std::make_tuple(80, 1),
                                           std::make_tuple(80, 2), std::make_tuple(200, 2)));

TEST(SpectralBasis, ClosedFormEigenvaluesFirstOrder) {
  for (int n : {10, 80, 200}) {
    const auto b = hsc::spectral_basis<double>(n, 1);
    for (Eigen::Index j = 0; j < n; ++j) {
      EXPECT_NEAR(b.eigenvalues(j), closed_form_q1(n, j), 1e-8) << "n=" << n << " j=" << j;
    }
  }
}

TEST(SpectralBasis, SecondOrderAgreesWithEigenSolver) {
  const Eigen::Index n = 40;
  const auto b = hsc::spectral_basis<double>(n, 2);
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(hsc::penalty_matrix<double>(n, 2));
  EXPECT_LT((b.eigenvalues - es.eigenvalues()).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(SpectralBasis, LongDoubleInstantiation) {
  const auto b = hsc::spectral_basis<long double>(12, 1);
  for (Eigen::Index j = 0; j < 12; ++j) {
    const long double s = std::sin(static_cast<long double>(j) * M_PI / 24.0L);
    EXPECT_NEAR(static_cast<double>(b.eigenvalues(j) - 4.0L * s * s), 0.0, 1e-15);
  }
}

TEST(JacobiEigen, MatchesEigenOnRandomSymmetric) {
  std::mt19937 gen(7);
  std::normal_distribution<double> nd;
  MatrixXd a(15, 15);
  for (int i = 0; i < 15; ++i)
    for (int j = 0; j < 15; ++j) a(i, j) = nd(gen);
  a = (a + a.transpose()).eval();
  const auto e = hsc::jacobi_eigen(a);
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(a);
  EXPECT_LT((e.values - es.eigenvalues()).cwiseAbs().maxCoeff(), 1e-11);
  EXPECT_LT((a * e.vectors - e.vectors * e.values.asDiagonal()).cwiseAbs().maxCoeff(), 1e-11);
}

TEST(JacobiEigen, ReportsNonConvergence) {
  const MatrixXd k = hsc::penalty_matrix<double>(30, 1);
  try {
    hsc::jacobi_eigen(k, 1);
    FAIL() << "expected NumericalError";
  } catch (const hsc::NumericalError& e) {
    EXPECT_NE(std::string(e.what()).find("1 sweeps"), std::string::npos);
  }
}

TEST(JacobiEigen, RejectsAsymmetric) {
  MatrixXd a(2, 2);
  a << 1, 2, 3, 4;
  EXPECT_THROW(hsc::jacobi_eigen(a), hsc::ValidationError);
}

TEST(Gains, EndpointsAreExact) {
  for (double mu : {0.0, 1e-3, 0.5, 2.0, 3.9}) {
    const auto g0 = hsc::gains(mu, 0.0);
    EXPECT_EQ(g0.shrink, 1.0);
    EXPECT_EQ(g0.match, mu);
    const auto g1 = hsc::gains(mu, 1.0);
    EXPECT_EQ(g1.shrink, mu == 0.0 ? 1.0 : 0.0);
    EXPECT_EQ(g1.match, mu == 0.0 ? 0.0 : 1.0);
  }
}

TEST(Gains, HarmonicIdentityAndFixedPoint) {
  for (double rho : {0.05, 0.3, 0.5, 0.77, 0.99}) {
    for (double mu : {1e-4, 0.1, 0.9, 1.7, 3.99}) {
      const auto g = hsc::gains(mu, rho);
      EXPECT_NEAR(1.0 / g.match, (1.0 - rho) / mu + rho, 1e-12 * (1.0 + 1.0 / mu));
      EXPECT_NEAR(g.shrink + rho * g.match, 1.0, 1e-14);
    }
    EXPECT_EQ(hsc::gains(1.0, rho).match, 1.0);
  }
}

TEST(Gains, ContinuityNearOne) {
  const double rho = 1.0 - 1e-6;
  for (double mu : {1e-3, 0.2, 1.0, 3.5}) {
    EXPECT_LE(std::abs(hsc::gains(mu, rho).match - 1.0), 1e-4 * (1.0 + 1.0 / mu));
  }
}

TEST(Gains, RejectsRhoOutsideUnitInterval) {
  EXPECT_THROW(hsc::gains(1.0, -0.1), hsc::ValidationError);
  EXPECT_THROW(hsc::gains(1.0, 1.5), hsc::ValidationError);
  EXPECT_THROW(hsc::gains(1.0, std::nan("")), hsc::ValidationError);
}

TEST(RhoMetric, EndpointOperators) {
  const Eigen::Index n = 20;
  for (int q : {1, 2}) {
    auto basis = hsc::cached_basis(n, q);
    const MatrixXd k = hsc::penalty_matrix<double>(n, q);
    const MatrixXd i = MatrixXd::Identity(n, n);
    const MatrixXd p0 = basis->null_projector();
    const hsc::RhoMetric<double> m0(basis, 0.0);
    const hsc::RhoMetric<double> m1(basis, 1.0);
    EXPECT_LT((m0.metric() - k).cwiseAbs().maxCoeff(), 1e-10);
    EXPECT_LT((m0.smoother() - i).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LT((m1.metric() - (i - p0)).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LT((m1.smoother() - p0).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(RhoMetric, SmootherMatchesDirectSolve) {
  const Eigen::Index n = 25;
  std::mt19937 gen(3);
  std::normal_distribution<double> nd;
  VectorXd r(n);
  for (Eigen::Index i = 0; i < n; ++i) r(i) = nd(gen);
  for (int q : {1, 2}) {
    for (double rho : {0.0, 0.2, 0.6, 0.95}) {
      const hsc::RhoMetric<double> m(hsc::cached_basis(n, q), rho);
      EXPECT_LT((m.smooth(r) - hsc::smoother_direct(r, q, rho)).cwiseAbs().maxCoeff(), 1e-10);
      // W = (I - S) / rho
      if (rho > 0.0) {
        const MatrixXd w = (MatrixXd::Identity(n, n) - m.smoother()) / rho;
        EXPECT_LT((m.metric() - w).cwiseAbs().maxCoeff(), 1e-10);
      }
    }
  }
}

TEST(RhoMetric, QuadformAndSquareRoot) {
  const Eigen::Index n = 18;
  std::mt19937 gen(5);
  std::normal_distribution<double> nd;
  VectorXd r(n);
  for (Eigen::Index i = 0; i < n; ++i) r(i) = nd(gen);
  const hsc::RhoMetric<double> m(hsc::cached_basis(n, 1), 0.4);
  EXPECT_NEAR(m.quadform(r), r.dot(m.metric() * r), 1e-10);
  const MatrixXd c = m.metric_sqrt();
  EXPECT_LT((c * c - m.metric()).cwiseAbs().maxCoeff(), 1e-12);
  const MatrixXd x = MatrixXd::Random(n, 3);
  EXPECT_LT((m.sqrt_transform(x) - c * x).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(BasisCache, ReturnsSharedInstance) {
  auto a = hsc::cached_basis(17, 1);
  auto b = hsc::cached_basis(17, 1);
  EXPECT_EQ(a.get(), b.get());
  EXPECT_NE(a.get(), hsc::cached_basis(17, 2).get());
}

}  // namespace
