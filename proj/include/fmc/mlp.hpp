#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include <Eigen/Core>

#include "fmc/losses.hpp"

namespace fmc {

struct MlpArchitecture {
  std::size_t n_inputs = 0;
  std::size_t hidden_layers = 1; ///< N
  std::size_t width = 64;        ///< L
  double dropout = 0.0;
  double leaky_slope = 0.01;
};

inline constexpr double kBatchNormMomentum = 0.9; ///< weight kept on the running statistics
inline constexpr double kBatchNormEpsilon = 1e-5;

/// Linear -> LeakyReLU -> BatchNorm1d -> Dropout per hidden layer, then a linear head.
struct MlpModel {
  struct Hidden {
    Eigen::MatrixXd weight; ///< out x in
    Eigen::VectorXd bias;
    Eigen::VectorXd bn_scale;
    Eigen::VectorXd bn_shift;
    Eigen::VectorXd running_mean;
    Eigen::VectorXd running_var;
  };

  MlpArchitecture arch;
  std::vector<Hidden> hidden;
  Eigen::RowVectorXd head_weight;
  double head_bias = 0.0;

  /// Uniform(+-1/sqrt(fan_in)) weights and biases, unit batch-norm scale.
  static MlpModel initialize(const MlpArchitecture& arch, std::uint64_t seed);
  /// All weights and biases zero, batch norm at identity statistics.
  static MlpModel zeros(const MlpArchitecture& arch);

  std::size_t parameter_count() const;
};

enum class MlpMode { Train, Eval };

/// Predictions for the rows of `x`. Train mode uses batch statistics and
/// active dropout drawn from `rng`; eval mode uses running statistics.
Eigen::VectorXd mlp_forward(const MlpModel& model, const Eigen::MatrixXd& x, MlpMode mode,
                            std::mt19937_64* rng = nullptr);

/// Gradients laid out like the trainable parameters of MlpModel.
struct MlpGradients {
  std::vector<MlpModel::Hidden> hidden; ///< running statistics unused
  Eigen::RowVectorXd head_weight;
  double head_bias = 0.0;
};

struct MlpLossGrad {
  double loss = 0.0; ///< mean data loss + 0.5 * l2 * sum of squared weights
  MlpGradients grad;
};

/// Loss and full backpropagated gradient on one batch. In train mode the
/// batch statistics are used (running statistics are not touched); `rng`
/// drives dropout and may be null when dropout is zero.
MlpLossGrad mlp_loss_and_gradients(const MlpModel& model, const Eigen::MatrixXd& x,
                                   const Eigen::VectorXd& y, LossKind loss, MlpMode mode,
                                   double l2 = 0.0, std::mt19937_64* rng = nullptr);

/// Flat views of the trainable parameters, in a fixed order.
Eigen::VectorXd flatten_parameters(const MlpModel& model);
void assign_parameters(MlpModel& model, const Eigen::VectorXd& flat);
Eigen::VectorXd flatten_gradients(const MlpGradients& grad);

inline constexpr double kPlateauFactor = 0.1;

struct MlpTrainConfig {
  LossKind loss = LossKind::MSE;
  double learning_rate = 1e-3;
  std::size_t batch_size = 128;
  double l2_penalty = 0.0;
  std::size_t plateau_patience = 5;
  std::size_t early_stop_patience = 12;
  std::size_t max_epochs = 200;
  std::uint64_t seed = 0;
};

struct MlpFitReport {
  std::vector<double> train_loss; ///< per epoch
  std::vector<double> val_rmse;   ///< per epoch, eval mode
  std::vector<double> learning_rate;
  std::size_t best_epoch = 0;
  double best_val_rmse = 0.0;
};

/// Mini-batch training with Adam, learning-rate reduction on validation RMSE
/// plateaus and early stopping. Returns the weights of the best validation epoch.
MlpModel mlp_fit(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const Eigen::MatrixXd& x_val,
                 const Eigen::VectorXd& y_val, const MlpArchitecture& arch,
                 const MlpTrainConfig& cfg, MlpFitReport* report = nullptr);

} // namespace fmc
