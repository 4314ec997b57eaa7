#pragma once

#include <Eigen/Core>

namespace fmc {

struct LinearModel {
  Eigen::VectorXd coeffs;
  double intercept = 0.0;

  Eigen::VectorXd predict(const Eigen::MatrixXd& x) const;
};

inline constexpr double kRidgeJitter = 1e-8;

/// Ordinary least squares through the normal equations of the centred data,
/// with a small ridge jitter on the diagonal. Throws SingularSystemError when
/// the system cannot be solved reliably.
LinearModel fit_linear(const Eigen::MatrixXd& x, const Eigen::VectorXd& y);

} // namespace fmc
