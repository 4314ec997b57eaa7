#include "fmc/tabular.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>

#include <json.hpp>

#include "fmc/csv.hpp"
#include "fmc/errors.hpp"

namespace fmc {

namespace {
constexpr std::array<std::string_view, kGroupCount> kGroupNames = {"Static", "HRRR", "NWM",
                                                                   "ViirsRefl", "LST"};
constexpr std::array<std::string_view, 4> kCadenceNames = {"static", "monthly", "hourly",
                                                           "retrieval"};
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
} // namespace

std::string_view to_string(FeatureGroup g) { return kGroupNames[static_cast<std::size_t>(g)]; }

FeatureGroup parse_feature_group(std::string_view s) {
  for (std::size_t i = 0; i < kGroupNames.size(); ++i) {
    if (kGroupNames[i] == s) return static_cast<FeatureGroup>(i);
  }
  throw SchemaError("unknown feature group: " + std::string(s));
}

std::string_view to_string(Cadence c) { return kCadenceNames[static_cast<std::size_t>(c)]; }

Cadence parse_cadence(std::string_view s) {
  for (std::size_t i = 0; i < kCadenceNames.size(); ++i) {
    if (kCadenceNames[i] == s) return static_cast<Cadence>(i);
  }
  throw SchemaError("unknown cadence: " + std::string(s));
}

GroupMask::GroupMask(std::initializer_list<FeatureGroup> groups) {
  for (auto g : groups) bits_.set(static_cast<std::size_t>(g));
}

GroupMask GroupMask::all() {
  GroupMask m;
  m.bits_.set();
  return m;
}

GroupMask GroupMask::parse(std::string_view key) {
  if (key.size() != kGroupCount) {
    throw std::invalid_argument("group mask must have 5 characters: " + std::string(key));
  }
  GroupMask m;
  for (std::size_t i = 0; i < kGroupCount; ++i) {
    if (key[i] == '1') {
      m.bits_.set(i);
    } else if (key[i] != '0') {
      throw std::invalid_argument("group mask must be 0/1: " + std::string(key));
    }
  }
  return m;
}

GroupMask GroupMask::with(FeatureGroup g) const {
  GroupMask m = *this;
  m.bits_.set(static_cast<std::size_t>(g));
  return m;
}

GroupMask GroupMask::without(FeatureGroup g) const {
  GroupMask m = *this;
  m.bits_.reset(static_cast<std::size_t>(g));
  return m;
}

std::string GroupMask::key() const {
  std::string k(kGroupCount, '0');
  for (std::size_t i = 0; i < kGroupCount; ++i) {
    if (bits_.test(i)) k[i] = '1';
  }
  return k;
}

const std::vector<ColumnSpec>& default_schema() {
  using G = FeatureGroup;
  using C = Cadence;
  static const std::vector<ColumnSpec> schema = {
      {"canopy_fraction", G::Static, "fraction", C::Static},
      {"soil_clay_fraction", G::Static, "fraction", C::Static},
      {"urban_fraction", G::Static, "fraction", C::Static},
      {"elevation", G::Static, "m", C::Static},
      {"impermeability", G::Static, "fraction", C::Static},
      {"irrigation", G::Static, "fraction", C::Static},
      {"land_use", G::Static, "category", C::Static},
      {"soil_sand_fraction", G::Static, "fraction", C::Static},
      {"lowest_soil_category", G::Static, "category", C::Static},
      {"top_soil_category", G::Static, "category", C::Static},
      {"snow_albedo", G::Static, "fraction", C::Static},
      {"albedo_clim", G::Static, "fraction", C::Monthly},
      {"green_fraction_clim", G::Static, "fraction", C::Monthly},
      {"leaf_area_index_clim", G::Static, "m2/m2", C::Monthly},

      {"temperature_2m", G::HRRR, "K", C::Hourly},
      {"relative_humidity_2m", G::HRRR, "%", C::Hourly},
      {"soil_moisture_availability", G::HRRR, "%", C::Hourly},
      {"skin_temperature", G::HRRR, "K", C::Hourly},
      {"mean_sea_level_pressure", G::HRRR, "Pa", C::Hourly},
      {"canopy_water", G::HRRR, "kg/m2", C::Hourly},
      {"snow_cover", G::HRRR, "%", C::Hourly},
      {"snow_depth", G::HRRR, "m", C::Hourly},
      {"dew_point_2m", G::HRRR, "K", C::Hourly},
      {"specific_humidity_2m", G::HRRR, "kg/kg", C::Hourly},
      {"potential_temperature_2m", G::HRRR, "K", C::Hourly},
      {"cloud_cover", G::HRRR, "%", C::Hourly},
      {"snow_water_equivalent", G::HRRR, "kg/m2", C::Hourly},
      {"global_horizontal_irradiance", G::HRRR, "W/m2", C::Hourly},
      {"sensible_heat", G::HRRR, "W/m2", C::Hourly},
      {"latent_heat", G::HRRR, "W/m2", C::Hourly},
      {"ground_heat", G::HRRR, "W/m2", C::Hourly},
      {"precipitable_water", G::HRRR, "kg/m2", C::Hourly},
      {"precipitation", G::HRRR, "kg/m2", C::Hourly},
      {"precipitation_rate", G::HRRR, "kg/m2/s", C::Hourly},

      {"nwm_soil_moisture", G::NWM, "m3/m3", C::Hourly},
      {"evapotranspiration", G::NWM, "mm", C::Hourly},

      {"sfc_rfl_m1", G::ViirsRefl, "reflectance", C::Retrieval},
      {"sfc_rfl_m2", G::ViirsRefl, "reflectance", C::Retrieval},
      {"sfc_rfl_m3", G::ViirsRefl, "reflectance", C::Retrieval},
      {"sfc_rfl_m4", G::ViirsRefl, "reflectance", C::Retrieval},
      {"sfc_rfl_m5", G::ViirsRefl, "reflectance", C::Retrieval},
      {"sfc_rfl_m7", G::ViirsRefl, "reflectance", C::Retrieval},
      {"sfc_rfl_m8", G::ViirsRefl, "reflectance", C::Retrieval},
      {"sfc_rfl_m10", G::ViirsRefl, "reflectance", C::Retrieval},
      {"sfc_rfl_m11", G::ViirsRefl, "reflectance", C::Retrieval},
      {"sfc_rfl_i1", G::ViirsRefl, "reflectance", C::Retrieval},
      {"sfc_rfl_i2", G::ViirsRefl, "reflectance", C::Retrieval},
      {"sfc_rfl_i3", G::ViirsRefl, "reflectance", C::Retrieval},

      {"lst", G::LST, "K", C::Retrieval},
  };
  return schema;
}

void write_schema_manifest(const std::filesystem::path& path, const std::vector<ColumnSpec>& schema) {
  nlohmann::ordered_json j;
  j["columns"] = nlohmann::ordered_json::array();
  for (const auto& c : schema) {
    j["columns"].push_back({{"name", c.name},
                            {"group", std::string(to_string(c.group))},
                            {"units", c.units},
                            {"cadence", std::string(to_string(c.cadence))}});
  }
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

std::vector<ColumnSpec> read_schema_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  const auto j = nlohmann::json::parse(in);
  std::vector<ColumnSpec> schema;
  std::set<std::string> seen;
  for (const auto& c : j.at("columns")) {
    ColumnSpec spec{c.at("name").get<std::string>(),
                    parse_feature_group(c.at("group").get<std::string>()),
                    c.value("units", std::string{}),
                    parse_cadence(c.value("cadence", std::string("hourly")))};
    if (!seen.insert(spec.name).second) {
      throw SchemaError("duplicate column in manifest: " + spec.name);
    }
    schema.push_back(std::move(spec));
  }
  return schema;
}

void Column::push_back(std::optional<double> v) {
  values.push_back(v ? *v : kNaN);
  valid.push_back(v ? 1 : 0);
}

Dataset::Dataset() : data_(std::make_shared<const Data>()) {}

Dataset::Dataset(std::vector<ColumnSpec> schema, std::vector<std::string> sites,
                 std::vector<UtcTime> times, std::vector<Column> predictors, Column fmc) {
  if (schema.size() != predictors.size()) {
    throw SchemaError("schema/predictor column count mismatch");
  }
  std::set<std::string_view> names;
  for (const auto& c : schema) {
    if (!names.insert(c.name).second) throw SchemaError("duplicate column name: " + c.name);
  }
  const auto n = sites.size();
  if (times.size() != n || fmc.size() != n) throw SchemaError("row count mismatch");
  for (const auto& col : predictors) {
    if (col.size() != n || col.valid.size() != n) throw SchemaError("row count mismatch");
  }
  data_ = std::make_shared<const Data>(Data{std::move(schema), std::move(sites), std::move(times),
                                            std::move(predictors), std::move(fmc)});
}

std::optional<std::size_t> Dataset::find_column(std::string_view name) const {
  const auto& schema = data_->schema;
  for (std::size_t i = 0; i < schema.size(); ++i) {
    if (schema[i].name == name) return i;
  }
  return std::nullopt;
}

std::size_t Dataset::column_index(std::string_view name) const {
  if (auto idx = find_column(name)) return *idx;
  throw SchemaError("no such column: " + std::string(name));
}

std::vector<std::string> Dataset::column_names() const {
  std::vector<std::string> out;
  for (const auto& c : data_->schema) out.push_back(c.name);
  return out;
}

Dataset Dataset::take(std::span<const std::size_t> rows) const {
  std::vector<std::string> sites;
  std::vector<UtcTime> times;
  sites.reserve(rows.size());
  times.reserve(rows.size());
  std::vector<Column> predictors(columns());
  Column fmc;
  for (auto r : rows) {
    sites.push_back(data_->sites.at(r));
    times.push_back(data_->times[r]);
    fmc.push_back(data_->fmc[r]);
  }
  for (std::size_t c = 0; c < columns(); ++c) {
    auto& out = predictors[c];
    const auto& in = data_->predictors[c];
    out.values.reserve(rows.size());
    out.valid.reserve(rows.size());
    for (auto r : rows) {
      out.values.push_back(in.values[r]);
      out.valid.push_back(in.valid[r]);
    }
  }
  return Dataset(data_->schema, std::move(sites), std::move(times), std::move(predictors),
                 std::move(fmc));
}

Eigen::MatrixXd Dataset::predictor_matrix() const {
  Eigen::MatrixXd x(static_cast<Eigen::Index>(rows()), static_cast<Eigen::Index>(columns()));
  for (std::size_t c = 0; c < columns(); ++c) {
    const auto& col = data_->predictors[c];
    for (std::size_t r = 0; r < rows(); ++r) {
      if (!col.has(r)) {
        throw EmptyDatasetError("missing value in column " + data_->schema[c].name);
      }
      x(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = col.values[r];
    }
  }
  return x;
}

Eigen::VectorXd Dataset::target() const {
  Eigen::VectorXd y(static_cast<Eigen::Index>(rows()));
  for (std::size_t r = 0; r < rows(); ++r) {
    if (!data_->fmc.has(r)) throw EmptyDatasetError("missing fmc value");
    y(static_cast<Eigen::Index>(r)) = data_->fmc.values[r];
  }
  return y;
}

std::uint64_t schema_hash(std::span<const std::string> names) {
  // FNV-1a over the names, each followed by a unit-separator byte.
  std::uint64_t h = 14695981039346656037ull;
  for (const auto& name : names) {
    for (unsigned char ch : name) {
      h ^= ch;
      h *= 1099511628211ull;
    }
    h ^= 0x1f;
    h *= 1099511628211ull;
  }
  return h;
}

std::uint64_t Dataset::schema_hash() const {
  const auto names = column_names();
  return fmc::schema_hash(names);
}

Dataset select_groups(const Dataset& ds, const GroupMask& mask) {
  if (mask.empty()) {
    throw std::invalid_argument("select_groups: empty group mask");
  }
  std::vector<std::size_t> keep_cols;
  for (std::size_t c = 0; c < ds.columns(); ++c) {
    if (mask.contains(ds.schema()[c].group)) keep_cols.push_back(c);
  }
  std::vector<std::size_t> keep_rows;
  for (std::size_t r = 0; r < ds.rows(); ++r) {
    bool complete = ds.fmc().has(r);
    for (auto c : keep_cols) {
      if (!complete) break;
      complete = ds.column(c).has(r);
    }
    if (complete) keep_rows.push_back(r);
  }
  if (keep_rows.empty()) {
    throw EmptyDatasetError("no complete rows for group mask " + mask.key());
  }

  std::vector<ColumnSpec> schema;
  std::vector<Column> predictors;
  for (auto c : keep_cols) {
    schema.push_back(ds.schema()[c]);
    Column col;
    const auto& in = ds.column(c);
    col.values.reserve(keep_rows.size());
    col.valid.reserve(keep_rows.size());
    for (auto r : keep_rows) {
      col.values.push_back(in.values[r]);
      col.valid.push_back(1);
    }
    predictors.push_back(std::move(col));
  }
  std::vector<std::string> sites;
  std::vector<UtcTime> times;
  Column fmc;
  for (auto r : keep_rows) {
    sites.push_back(ds.site(r));
    times.push_back(ds.time(r));
    fmc.push_back(ds.fmc()[r]);
  }
  return Dataset(std::move(schema), std::move(sites), std::move(times), std::move(predictors),
                 std::move(fmc));
}

const ColumnScaling& StandardizerParams::at(std::string_view column) const {
  auto it = columns.find(column);
  if (it == columns.end()) throw MissingParamsError(std::string(column));
  return it->second;
}

StandardizerParams fit_standardizer(const Dataset& ds, std::span<const std::string> columns) {
  StandardizerParams params;
  for (const auto& name : columns) {
    const Column& col = (name == kTargetColumn) ? ds.fmc() : ds.column(ds.column_index(name));
    double sum = 0.0;
    std::size_t n = 0;
    for (std::size_t r = 0; r < col.size(); ++r) {
      if (col.has(r) && std::isfinite(col.values[r])) {
        sum += col.values[r];
        ++n;
      }
    }
    if (n < 2) throw DegenerateColumnError(name);
    const double mean = sum / static_cast<double>(n);
    double ss = 0.0;
    for (std::size_t r = 0; r < col.size(); ++r) {
      if (col.has(r) && std::isfinite(col.values[r])) {
        const double d = col.values[r] - mean;
        ss += d * d;
      }
    }
    const double sd = std::sqrt(ss / static_cast<double>(n));
    if (!(sd > 0.0)) throw DegenerateColumnError(name);
    params.columns[name] = {mean, sd};
  }
  return params;
}

namespace {
Column scale_column(const Column& in, const ColumnScaling& s) {
  Column out = in;
  for (std::size_t r = 0; r < out.size(); ++r) {
    if (out.has(r)) out.values[r] = (out.values[r] - s.mean) / s.std;
  }
  return out;
}
} // namespace

Dataset standardize(const Dataset& ds, const StandardizerParams& params) {
  std::vector<Column> predictors;
  predictors.reserve(ds.columns());
  for (std::size_t c = 0; c < ds.columns(); ++c) {
    predictors.push_back(scale_column(ds.column(c), params.at(ds.schema()[c].name)));
  }
  Column fmc = scale_column(ds.fmc(), params.at(kTargetColumn));
  return Dataset(ds.schema(), ds.sites(), ds.times(), std::move(predictors), std::move(fmc));
}

std::vector<double> inverse_standardize(std::span<const double> values,
                                        const StandardizerParams& params, std::string_view column) {
  const auto& s = params.at(column);
  std::vector<double> out(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) out[i] = values[i] * s.std + s.mean;
  return out;
}

Eigen::VectorXd inverse_standardize(const Eigen::VectorXd& values, const StandardizerParams& params,
                                    std::string_view column) {
  const auto& s = params.at(column);
  return (values.array() * s.std + s.mean).matrix();
}

void write_dataset_csv(const std::filesystem::path& path, const Dataset& ds) {
  csv::Writer w(path);
  w.field("site_id").field("timestamp");
  for (const auto& c : ds.schema()) w.field(c.name);
  w.field("fmc");
  w.end_row();
  for (std::size_t r = 0; r < ds.rows(); ++r) {
    w.field(ds.site(r)).field(format_utc(ds.time(r)));
    for (std::size_t c = 0; c < ds.columns(); ++c) w.field(ds.value(r, c));
    w.field(ds.fmc()[r]);
    w.end_row();
  }
}

Dataset read_dataset_csv(const std::filesystem::path& path, const std::vector<ColumnSpec>& schema) {
  csv::Reader reader(path);
  const auto& header = reader.header();
  if (header.size() < 3 || header.front() != "site_id" || header[1] != "timestamp" ||
      header.back() != "fmc") {
    throw SchemaError(path.string() + ": header must be site_id,timestamp,<predictors>,fmc");
  }
  std::vector<ColumnSpec> cols;
  for (std::size_t i = 2; i + 1 < header.size(); ++i) {
    auto it = std::find_if(schema.begin(), schema.end(),
                           [&](const ColumnSpec& s) { return s.name == header[i]; });
    if (it == schema.end()) throw SchemaError("column not in schema manifest: " + header[i]);
    cols.push_back(*it);
  }
  std::vector<std::string> sites;
  std::vector<UtcTime> times;
  std::vector<Column> predictors(cols.size());
  Column fmc;
  std::vector<std::string_view> fields;
  while (reader.next(fields)) {
    if (fields.size() != header.size()) {
      throw ParseError(path.string() + ":" + std::to_string(reader.line_number()) +
                       ": wrong field count");
    }
    sites.emplace_back(fields[0]);
    times.push_back(parse_utc(fields[1]));
    for (std::size_t c = 0; c < cols.size(); ++c) {
      predictors[c].push_back(csv::parse_optional(fields[c + 2]));
    }
    fmc.push_back(csv::parse_optional(fields.back()));
  }
  return Dataset(std::move(cols), std::move(sites), std::move(times), std::move(predictors),
                 std::move(fmc));
}

} // namespace fmc
