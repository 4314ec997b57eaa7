#include "fmc/linear.hpp"

#include <Eigen/Cholesky>

#include "fmc/errors.hpp"

namespace fmc {

Eigen::VectorXd LinearModel::predict(const Eigen::MatrixXd& x) const {
  if (x.cols() != coeffs.size()) throw std::invalid_argument("linear predict: feature count mismatch");
  return (x * coeffs).array() + intercept;
}

LinearModel fit_linear(const Eigen::MatrixXd& x, const Eigen::VectorXd& y) {
  const auto n = x.rows();
  const auto p = x.cols();
  if (y.size() != n) throw std::invalid_argument("fit_linear: X/y length mismatch");
  if (n < p + 1) {
    throw SingularSystemError("fit_linear: need at least " + std::to_string(p + 1) + " rows");
  }
  const Eigen::RowVectorXd x_mean = x.colwise().mean();
  const double y_mean = y.mean();
  const Eigen::MatrixXd xc = x.rowwise() - x_mean;
  const Eigen::VectorXd yc = y.array() - y_mean;

  Eigen::MatrixXd gram = xc.transpose() * xc;
  gram.diagonal().array() += kRidgeJitter;
  const Eigen::LDLT<Eigen::MatrixXd> ldlt(gram);
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive() || ldlt.rcond() < 1e-15) {
    throw SingularSystemError("fit_linear: normal equations are singular");
  }
  LinearModel m;
  m.coeffs = ldlt.solve(xc.transpose() * yc);
  if (!m.coeffs.allFinite()) throw SingularSystemError("fit_linear: non-finite solution");
  m.intercept = y_mean - x_mean.dot(m.coeffs);
  return m;
}

} // namespace fmc
