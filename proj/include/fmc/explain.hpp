#pragma once

#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "fmc/gbt.hpp"

namespace fmc {

enum class ImportanceMethod { Permutation, SHAP, Gain };

std::string_view to_string(ImportanceMethod m);

struct ImportanceReport {
  ImportanceMethod method = ImportanceMethod::Permutation;
  std::vector<std::string> features;
  std::vector<double> scores;
  std::vector<double> std_errors; ///< empty unless the method is stochastic
  std::string warning;            ///< non-empty when the report is degenerate
};

using PredictFn = std::function<Eigen::VectorXd(const Eigen::MatrixXd&)>;

/// Mean over repeats of rmse(y, f(X with column j shuffled)) - rmse(y, f(X)).
ImportanceReport permutation_importance(const PredictFn& predict, const Eigen::MatrixXd& x,
                                        const Eigen::VectorXd& y,
                                        const std::vector<std::string>& features, int repeats,
                                        std::mt19937_64& rng);

struct ShapExplanation {
  double base_value = 0.0;
  Eigen::VectorXd contributions;
  Eigen::VectorXd std_errors; ///< sampled estimates only
};

/// Exact path-dependent Shapley values of a boosted ensemble for one row. The
/// base value is the cover-weighted expectation of the ensemble, so
/// base + sum(contributions) equals the prediction.
ShapExplanation tree_shap(const GbtModel& model, const Eigen::VectorXd& x);

/// Cover-weighted mean output of the ensemble.
double expected_value(const GbtModel& model);

/// Monte-Carlo Shapley values: each sample draws a feature permutation and a
/// background row, then switches features from background to `x` in that order.
ShapExplanation sampled_shap(const PredictFn& predict, const Eigen::VectorXd& x,
                             const Eigen::MatrixXd& background, int n_samples, std::mt19937_64& rng);

inline constexpr int kShapBackgroundRows = 256;

/// Mean |contribution| per feature over the rows of `x`.
ImportanceReport shap_importance(const GbtModel& model, const Eigen::MatrixXd& x,
                                 const std::vector<std::string>& features);
ImportanceReport shap_importance(const PredictFn& predict, const Eigen::MatrixXd& x,
                                 const Eigen::MatrixXd& background,
                                 const std::vector<std::string>& features, int n_samples,
                                 std::mt19937_64& rng);

/// Total split gain per feature, normalized to sum 1. An ensemble without
/// splits yields all zeros and a warning.
ImportanceReport gain_importance(const GbtModel& model, const std::vector<std::string>& features);

/// Scaling applied to an importance by `scale`.
ImportanceReport scaled(ImportanceReport r, double scale);

struct StackedRow {
  std::string feature;
  std::vector<double> normalized; ///< one per input report, min-max scaled to [0, 1]
  double sum = 0.0;
};

/// Per-method min-max normalization, summed per feature and sorted by the sum
/// (largest first, ties by feature order). Reports must share a feature list.
std::vector<StackedRow> stacked_importance(const std::vector<ImportanceReport>& reports);

/// Rank 1 is the largest score; ties keep feature order.
std::vector<int> ranks(const std::vector<double>& scores);

/// `feature,method,score,rank`: the raw reports, then the normalized stacked
/// scores under `<method>_normalized` and their `sum`.
void write_importance_csv(const std::filesystem::path& path,
                          const std::vector<ImportanceReport>& reports);

} // namespace fmc
