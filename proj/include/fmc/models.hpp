#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Core>

#include "fmc/gbt.hpp"
#include "fmc/linear.hpp"
#include "fmc/mlp.hpp"
#include "fmc/tabular.hpp"

namespace fmc {

enum class ModelKind { LR, GBT, MLP };

std::string_view to_string(ModelKind k);
/// Accepts "lr", "gbt", "mlp" in any case.
ModelKind parse_model_kind(std::string_view s);

using AnyModel = std::variant<LinearModel, GbtModel, MlpModel>;

ModelKind kind_of(const AnyModel& m);

/// Hyperparameters for any of the three models; fields of other kinds are ignored.
struct ModelSpec {
  ModelKind kind = ModelKind::GBT;
  GbtConfig gbt;
  MlpArchitecture mlp_arch;
  MlpTrainConfig mlp_train;
};

/// Fits on (standardized) training rows. Validation rows drive MLP early stopping
/// and are otherwise unused.
AnyModel fit_model(const ModelSpec& spec, const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                   const Eigen::MatrixXd& x_val, const Eigen::VectorXd& y_val, std::uint64_t seed);

/// Shared predict contract: n x p predictors to n predictions.
Eigen::VectorXd predict(const AnyModel& model, const Eigen::MatrixXd& x);

/// A trained model together with everything needed to apply it to raw data.
struct ModelBundle {
  AnyModel model;
  StandardizerParams scaling;
  std::vector<std::string> features;
  GroupMask mask;
  std::uint64_t schema_hash = 0;
};

/// Predictions in FMC percent for every row of `ds`. Features are looked up by
/// name; throws SchemaError when the dataset lacks one or when the hash differs.
Eigen::VectorXd predict_dataset(const ModelBundle& bundle, const Dataset& ds);

std::string serialize_model(const ModelBundle& bundle);
ModelBundle deserialize_model(const std::string& text);
void save_model(const std::filesystem::path& path, const ModelBundle& bundle);
ModelBundle load_model(const std::filesystem::path& path);

} // namespace fmc
