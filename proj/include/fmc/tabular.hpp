#pragma once

#include <array>
#include <bitset>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "fmc/time.hpp"

namespace fmc {

enum class FeatureGroup : std::uint8_t { Static = 0, HRRR = 1, NWM = 2, ViirsRefl = 3, LST = 4 };

inline constexpr std::size_t kGroupCount = 5;
inline constexpr std::array<FeatureGroup, kGroupCount> kAllGroups = {
    FeatureGroup::Static, FeatureGroup::HRRR, FeatureGroup::NWM, FeatureGroup::ViirsRefl,
    FeatureGroup::LST};

std::string_view to_string(FeatureGroup g);
FeatureGroup parse_feature_group(std::string_view s);

/// How often a predictor is refreshed in time.
enum class Cadence : std::uint8_t { Static, Monthly, Hourly, Retrieval };

std::string_view to_string(Cadence c);
Cadence parse_cadence(std::string_view s);

/// Subset of predictor groups. The textual key is five 0/1 characters in the
/// order Static, HRRR, NWM, ViirsRefl, LST, e.g. "01111".
class GroupMask {
public:
  GroupMask() = default;
  GroupMask(std::initializer_list<FeatureGroup> groups);

  static GroupMask all();
  static GroupMask parse(std::string_view key);

  bool contains(FeatureGroup g) const { return bits_.test(static_cast<std::size_t>(g)); }
  GroupMask with(FeatureGroup g) const;
  GroupMask without(FeatureGroup g) const;
  bool empty() const { return bits_.none(); }
  std::size_t count() const { return bits_.count(); }
  std::string key() const;

  friend bool operator==(const GroupMask&, const GroupMask&) = default;

private:
  std::bitset<kGroupCount> bits_;
};

struct ColumnSpec {
  std::string name;
  FeatureGroup group;
  std::string units;
  Cadence cadence = Cadence::Hourly;
};

/// The 49 predictors, grouped and ordered as in the source predictor table.
const std::vector<ColumnSpec>& default_schema();

void write_schema_manifest(const std::filesystem::path& path, const std::vector<ColumnSpec>& schema);
std::vector<ColumnSpec> read_schema_manifest(const std::filesystem::path& path);

/// A column of optional reals. Missing cells are flagged in `valid` and hold NaN.
struct Column {
  std::vector<double> values;
  std::vector<std::uint8_t> valid;

  std::size_t size() const noexcept { return values.size(); }
  bool has(std::size_t i) const noexcept { return valid[i] != 0; }
  std::optional<double> operator[](std::size_t i) const {
    return valid[i] ? std::optional<double>(values[i]) : std::nullopt;
  }
  void push_back(std::optional<double> v);
};

/// Immutable columnar table of (site, timestamp, predictors, fmc).
/// Copies share storage.
class Dataset {
public:
  Dataset();
  Dataset(std::vector<ColumnSpec> schema, std::vector<std::string> sites, std::vector<UtcTime> times,
          std::vector<Column> predictors, Column fmc);

  std::size_t rows() const noexcept { return data_->sites.size(); }
  std::size_t columns() const noexcept { return data_->schema.size(); }
  const std::vector<ColumnSpec>& schema() const noexcept { return data_->schema; }
  const std::string& site(std::size_t row) const { return data_->sites[row]; }
  UtcTime time(std::size_t row) const { return data_->times[row]; }
  const std::vector<std::string>& sites() const noexcept { return data_->sites; }
  const std::vector<UtcTime>& times() const noexcept { return data_->times; }
  const Column& column(std::size_t c) const { return data_->predictors[c]; }
  const Column& fmc() const noexcept { return data_->fmc; }
  std::optional<double> value(std::size_t row, std::size_t col) const {
    return data_->predictors[col][row];
  }

  /// Index of a predictor column; throws SchemaError if absent.
  std::size_t column_index(std::string_view name) const;
  std::optional<std::size_t> find_column(std::string_view name) const;
  std::vector<std::string> column_names() const;

  /// New dataset holding the given rows, in the given order.
  Dataset take(std::span<const std::size_t> rows) const;

  /// Dense n x p predictor matrix. Throws EmptyDatasetError if any cell is missing.
  Eigen::MatrixXd predictor_matrix() const;
  /// Dense target vector. Throws EmptyDatasetError if any fmc is missing.
  Eigen::VectorXd target() const;

  /// Stable hash of the ordered predictor names.
  std::uint64_t schema_hash() const;

private:
  struct Data {
    std::vector<ColumnSpec> schema;
    std::vector<std::string> sites;
    std::vector<UtcTime> times;
    std::vector<Column> predictors;
    Column fmc;
  };
  std::shared_ptr<const Data> data_;
};

std::uint64_t schema_hash(std::span<const std::string> names);

/// Keeps only the columns whose group is in `mask` and drops every row with a
/// missing retained predictor or missing fmc.
Dataset select_groups(const Dataset& ds, const GroupMask& mask);

struct ColumnScaling {
  double mean;
  double std;
};

/// Per-column z-score parameters. The target column is stored under the name "fmc".
struct StandardizerParams {
  std::map<std::string, ColumnScaling, std::less<>> columns;

  const ColumnScaling& at(std::string_view column) const;
};

inline constexpr std::string_view kTargetColumn = "fmc";

/// Population mean/std of the finite values of each named column ("fmc" for the target).
StandardizerParams fit_standardizer(const Dataset& ds, std::span<const std::string> columns);

/// Standardizes every predictor column and the target. All must be covered by `params`.
Dataset standardize(const Dataset& ds, const StandardizerParams& params);

std::vector<double> inverse_standardize(std::span<const double> values,
                                        const StandardizerParams& params, std::string_view column);
Eigen::VectorXd inverse_standardize(const Eigen::VectorXd& values, const StandardizerParams& params,
                                    std::string_view column);

void write_dataset_csv(const std::filesystem::path& path, const Dataset& ds);
/// Reads a dataset CSV. Columns are matched by name against `schema`; any
/// header predictor absent from `schema` is a SchemaError.
Dataset read_dataset_csv(const std::filesystem::path& path,
                         const std::vector<ColumnSpec>& schema = default_schema());

} // namespace fmc
