#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Core>

namespace fmc {

/// One node of a regression tree. A node is a leaf when `feature` is negative.
/// Rows with x[feature] < threshold go left.
struct TreeNode {
  int feature = -1;
  double threshold = 0.0;
  double gain = 0.0;   ///< loss reduction of the split (before subtracting gamma)
  int left = -1;
  int right = -1;
  double weight = 0.0; ///< leaf weight -G / (H + lambda); also kept for internal nodes
  double cover = 0.0;  ///< hessian sum of the training rows that reached the node

  bool is_leaf() const noexcept { return feature < 0; }
};

struct RegressionTree {
  std::vector<TreeNode> nodes; ///< nodes[0] is the root

  double leaf_value(const double* x) const;
  int depth() const;
};

struct GbtConfig {
  double learning_rate = 0.3;
  double gamma = 0.0;  ///< minimum loss reduction to split
  int max_depth = 6;
  int n_estimators = 100;
  double subsample = 1.0;
  double colsample_bytree = 1.0;
  double l2_leaf = 1.0;

  /// Throws std::invalid_argument on out-of-range values.
  void validate() const;
};

/// Candidate gains closer than this (relative) are treated as equal.
inline constexpr double kGainTieTolerance = 1e-12;

/// Splits whose net gain (gain - gamma) is not above this are pruned.
inline constexpr double kMinSplitGain = 1e-10;

struct GbtModel {
  double base_score = 0.0;
  double learning_rate = 0.3;
  std::size_t n_features = 0;
  std::vector<RegressionTree> trees;

  /// base_score + learning_rate * sum of tree outputs.
  Eigen::VectorXd predict(const Eigen::MatrixXd& x) const;
  double predict_row(const double* x) const;
};

/// Second-order boosting on squared error with exact greedy split search.
/// `round_rmse`, when given, receives the training RMSE after every round.
GbtModel gbt_fit(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const GbtConfig& cfg,
                 std::uint64_t seed, std::vector<double>* round_rmse = nullptr);

Eigen::VectorXd gbt_predict(const GbtModel& model, const Eigen::MatrixXd& x);

/// Loss reduction of splitting (G, H) into (GL, HL) and the remainder.
inline double split_gain(double gl, double hl, double g, double h, double lambda) {
  const double gr = g - gl;
  const double hr = h - hl;
  return 0.5 * (gl * gl / (hl + lambda) + gr * gr / (hr + lambda) - g * g / (h + lambda));
}

/// Threshold strictly above `lo` and at most `hi`, for lo < hi.
double split_threshold(double lo, double hi);

} // namespace fmc
