#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "fmc/errors.hpp"
#include "fmc/linear.hpp"

using namespace fmc;

namespace {

// Normal equations of [X 1] solved by Gaussian elimination with partial pivoting.
std::vector<double> gauss_ols(const Eigen::MatrixXd& x, const Eigen::VectorXd& y) {
  const int n = static_cast<int>(x.rows());
  const int p = static_cast<int>(x.cols()) + 1;
  std::vector<std::vector<double>> a(static_cast<std::size_t>(p), std::vector<double>(static_cast<std::size_t>(p + 1), 0.0));
  auto col = [&](int i, int j) { return j < p - 1 ? x(i, j) : 1.0; };
  for (int r = 0; r < p; ++r) {
    for (int c = 0; c < p; ++c) {
      for (int i = 0; i < n; ++i) a[r][c] += col(i, r) * col(i, c);
    }
    for (int i = 0; i < n; ++i) a[r][p] += col(i, r) * y(i);
  }
  for (int k = 0; k < p; ++k) {
    int piv = k;
    for (int r = k + 1; r < p; ++r) {
      if (std::abs(a[r][k]) > std::abs(a[piv][k])) piv = r;
    }
    std::swap(a[k], a[piv]);
    for (int r = k + 1; r < p; ++r) {
      const double f = a[r][k] / a[k][k];
      for (int c = k; c <= p; ++c) a[r][c] -= f * a[k][c];
    }
  }
  std::vector<double> b(static_cast<std::size_t>(p));
  for (int k = p - 1; k >= 0; --k) {
    double s = a[k][p];
    for (int c = k + 1; c < p; ++c) s -= a[k][c] * b[c];
    b[k] = s / a[k][k];
  }
  return b; // coefficients then intercept
}

} // namespace

TEST(Linear, ExactLine) {
  Eigen::MatrixXd x(5, 1);
  x << -2, 0, 1, 3, 7;
  const Eigen::VectorXd y = (2.0 * x.col(0)).array() + 1.0;
  const auto m = fit_linear(x, y);
  EXPECT_NEAR(m.coeffs(0), 2.0, 1e-9);
  EXPECT_NEAR(m.intercept, 1.0, 1e-9);
}

TEST(Linear, ConstantTarget) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> nd;
  Eigen::MatrixXd x(40, 3);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = nd(rng);
  const Eigen::VectorXd y = Eigen::VectorXd::Constant(40, 12.5);
  const auto m = fit_linear(x, y);
  EXPECT_NEAR(m.coeffs.norm(), 0.0, 1e-12);
  EXPECT_NEAR(m.intercept, 12.5, 1e-12);
}

TEST(Linear, MatchesGaussianElimination) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> nd;
  for (int rep = 0; rep < 20; ++rep) {
    Eigen::MatrixXd x(200, 5);
    for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = nd(rng) * (1.0 + rep % 3);
    Eigen::VectorXd y(200);
    for (Eigen::Index i = 0; i < 200; ++i) y(i) = 3.0 + x.row(i).sum() * 0.7 + nd(rng);
    const auto m = fit_linear(x, y);
    const auto ref = gauss_ols(x, y);
    for (int j = 0; j < 5; ++j) EXPECT_NEAR(m.coeffs(j), ref[static_cast<std::size_t>(j)], 1e-8);
    EXPECT_NEAR(m.intercept, ref[5], 1e-8);
  }
}

TEST(Linear, PredictContract) {
  Eigen::MatrixXd x(4, 2);
  x << 1, 2, 3, 4, 5, 7, 0, 1;
  Eigen::VectorXd y(4);
  y << 1, 2, 3, 5;
  const auto m = fit_linear(x, y);
  const auto f = m.predict(x);
  EXPECT_EQ(f.size(), 4);
  EXPECT_TRUE(f.allFinite());
  EXPECT_THROW(m.predict(Eigen::MatrixXd(2, 3)), std::invalid_argument);
}

TEST(Linear, TooFewRowsIsSingular) {
  Eigen::MatrixXd x(3, 3);
  x.setRandom();
  EXPECT_THROW(fit_linear(x, Eigen::VectorXd::Ones(3)), SingularSystemError);
}

TEST(Linear, DuplicateColumnRescuedByJitter) {
  std::mt19937_64 rng(8);
  std::normal_distribution<double> nd;
  Eigen::MatrixXd x(50, 2);
  for (Eigen::Index i = 0; i < 50; ++i) x(i, 0) = x(i, 1) = nd(rng);
  const Eigen::VectorXd y = 4.0 * x.col(0);
  const auto m = fit_linear(x, y);
  EXPECT_NEAR(m.coeffs.sum(), 4.0, 1e-6);
  EXPECT_NEAR((m.predict(x) - y).norm(), 0.0, 1e-5);
}
