#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "fmc/climatology.hpp"
#include "fmc/evaluation.hpp"
#include "fmc/hpo.hpp"
#include "fmc/models.hpp"
#include "fmc/splitting.hpp"
#include "fmc/tabular.hpp"

namespace fmc {

/// All 31 non-empty group subsets; mask m (1..31) holds group i iff bit i is set.
std::vector<GroupMask> enumerate_group_masks();

/// The defaults the command line starts from for each model kind.
ModelSpec default_model_spec(ModelKind kind);

/// Fits one model on `train` rows (validation rows feed MLP early stopping).
/// Columns constant over the training rows are left out of the feature list;
/// the standardizer sees training rows only.
ModelBundle train_on_rows(const Dataset& ds, const ModelSpec& spec, const GroupMask& mask,
                          std::span<const std::size_t> train, std::span<const std::size_t> val,
                          std::uint64_t seed);

struct CvOptions {
  std::size_t folds = 10;
  SplitFractions fractions = kDefaultFractions;
  std::uint64_t seed = 0;
  GroupMask mask = GroupMask::all(); ///< recorded in bundles; `ds` must already be selected
  std::vector<const ClimatologyTable*> baselines;
  bool grouped = true;
  std::optional<FoldSet> fold_set; ///< reuse a persisted partition instead of drawing one
};

struct FoldResult {
  std::size_t fold = 0;
  MetricReport val;
  MetricReport test;
  std::size_t n_features = 0;
};

struct SummaryStat {
  double mean = 0.0;
  double std = 0.0; ///< sample std over folds, 0 for a single fold
};

struct CvResult {
  FoldSet fold_set;
  std::vector<FoldResult> folds;
  SummaryStat rmse;
  SummaryStat r2;
  ModelBundle first_model;       ///< fold 0
  Eigen::VectorXd first_test;    ///< fold-0 predictions on the test rows, in index order
  std::vector<GroupedMetrics> grouped; ///< fold-0 test rows by all/site/month
};

/// Per fold: standardizer and model fitted on fold-train rows, metrics on the
/// fixed test rows in FMC percent.
CvResult run_cv(const Dataset& ds, const ModelSpec& spec, SplitStrategy strategy,
                const CvOptions& options);

void write_cv_csv(const std::filesystem::path& dir, const CvResult& cv, const Dataset& ds);

struct AblationRow {
  GroupMask mask;
  std::size_t n_rows = 0;
  std::optional<SummaryStat> rmse; ///< absent when the mask leaves no usable data
  std::optional<SummaryStat> r2;
  std::string status = "ok";
};

/// select_groups then run_cv for every mask, with shared hyperparameters and seed.
std::vector<AblationRow> run_ablation(const Dataset& ds, const ModelSpec& spec,
                                      SplitStrategy strategy, const CvOptions& options);

/// Sorted by mean r2, best first; failed masks last.
void write_ablation_csv(const std::filesystem::path& path, const std::vector<AblationRow>& rows);

struct HpoRun {
  OptimizeResult search;
  ModelSpec best;
  CvResult cv;
};

/// Minimizes fold-0 validation RMSE, then cross-validates the winning configuration.
HpoRun run_hpo(const Dataset& ds, const ModelSpec& base, const ParamSpace& space,
               SplitStrategy strategy, std::size_t budget, const CvOptions& options,
               std::size_t n_random = 100, const std::filesystem::path& history_path = {});

/// Flat key/value run record written as JSON.
class RunManifest {
public:
  explicit RunManifest(std::string command);
  RunManifest& set(const std::string& key, const std::string& value);
  RunManifest& set(const std::string& key, double value);
  RunManifest& set(const std::string& key, long long value);
  RunManifest& output(const std::filesystem::path& file);
  void write(const std::filesystem::path& path) const;

private:
  std::string command_;
  std::vector<std::pair<std::string, std::string>> text_;
  std::vector<std::pair<std::string, double>> numbers_;
  std::vector<std::pair<std::string, long long>> integers_;
  std::vector<std::string> outputs_;
};

inline constexpr std::string_view kVersion = "1.0.0";

} // namespace fmc
