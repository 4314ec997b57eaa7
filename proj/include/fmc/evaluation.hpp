#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fmc/climatology.hpp"
#include "fmc/splitting.hpp"
#include "fmc/tabular.hpp"

namespace fmc {

/// sqrt(mean((y - f)^2)). Throws std::invalid_argument on length mismatch or empty input.
double rmse(std::span<const double> y, std::span<const double> f);
/// 1 - SS_res / SS_tot. Throws UndefinedR2Error when n < 2 or y is constant.
double r2(std::span<const double> y, std::span<const double> f);

struct MetricReport {
  double rmse = 0.0;
  std::optional<double> r2; ///< absent when undefined
  std::size_t n = 0;
  double ss_res = 0.0;
};

MetricReport compute_metrics(std::span<const double> y, std::span<const double> f);

struct SkillReport {
  std::optional<double> skill_rmse; ///< absent when the baseline RMSE is 0
  std::optional<double> skill_r2;   ///< absent when either r2 is undefined or the baseline r2 is 1
  ClimatologyKind baseline = ClimatologyKind::DOY;
  std::size_t n = 0;
};

/// 1 - RMSE(model)/RMSE(clim) and 1 - (1 - R2(model))/(1 - R2(clim)). Both reports
/// must come from the same rows; differing n is an AlignmentError.
SkillReport skill(const MetricReport& model, const MetricReport& clim, ClimatologyKind baseline);

/// Skill on the rows where `clim` holds a value.
SkillReport skill_on_unmasked(std::span<const double> y, std::span<const double> f,
                              std::span<const std::optional<double>> clim, ClimatologyKind baseline);

/// Baseline predictions for every dataset row.
std::vector<std::optional<double>> climatology_predictions(const ClimatologyTable& table,
                                                           const Dataset& ds);

enum class GroupKey { All, Site, Month, Label };

std::string_view to_string(GroupKey k);
GroupKey parse_group_key(std::string_view s);

struct GroupRow {
  std::string key;
  MetricReport metrics;
  std::vector<SkillReport> skills; ///< one per baseline, in the order given
};

struct GroupedMetrics {
  GroupKey key = GroupKey::All;
  std::vector<GroupRow> groups; ///< sorted by key (months numerically)
};

/// Metrics, and skill against each baseline, per group. `labels` is needed for
/// GroupKey::Label and must then have one entry per row.
GroupedMetrics grouped_metrics(const Dataset& ds, std::span<const double> predictions,
                               const std::vector<const ClimatologyTable*>& baselines, GroupKey key,
                               const std::vector<SplitLabel>* labels = nullptr);

/// Tidy rows `group_key,metric,value,n`. Besides raw r2, an `r2_display` row
/// carries r2 clipped below at zero.
void write_grouped_metrics_csv(const std::filesystem::path& path,
                               const std::vector<GroupedMetrics>& tables);

struct CorrelationMatrix {
  std::vector<std::string> names; ///< predictors then "fmc"
  std::vector<std::optional<double>> values; ///< row-major, names.size()^2
  std::size_t n_rows = 0;

  std::optional<double> at(std::size_t i, std::size_t j) const { return values[i * names.size() + j]; }
};

/// Pearson correlation among all predictors and fmc over the complete rows.
/// Constant columns give missing entries. Throws TooSmallDatasetError below 2 complete rows.
CorrelationMatrix correlation_matrix(const Dataset& ds);

/// Long form `row,column,value,n`.
void write_correlation_csv(const std::filesystem::path& path, const CorrelationMatrix& m);

} // namespace fmc
