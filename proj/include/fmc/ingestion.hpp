#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "fmc/tabular.hpp"
#include "fmc/time.hpp"

namespace fmc {

struct SiteRecord {
  std::string site_id;
  double lat = 0.0;
  double lon = 0.0;
  UtcTime reported_at{};
};

struct FmcObservation {
  std::string site_id;
  UtcTime timestamp{};
  double fmc = 0.0;
  bool qc_pass = false;
};

enum class ChangeKind { LocationChanged, MissingIdentifier, InvalidLocation };

std::string_view to_string(ChangeKind k);

struct ChangelogEntry {
  std::string site_id;
  ChangeKind kind;
  /// Every record seen for the site, oldest first.
  std::vector<SiteRecord> history;
};

struct DedupeResult {
  std::vector<SiteRecord> sites;
  std::vector<ChangelogEntry> changelog;
};

/// Range check on an fmc value in percent, inclusive at 0 and 400.
bool qc_range_check(double value);

/// Makes an observation with its qc flag set from the range check.
FmcObservation make_observation(std::string site_id, UtcTime t, double fmc);

/// Keeps the most recently reported location per site. Sites whose location
/// changed are logged along with their full history; rows without an
/// identifier or with impossible coordinates are logged as rejects.
DedupeResult dedupe_sites(const std::vector<SiteRecord>& records);

/// A regular lat/lon raster. Cell (0, 0) is the south-west corner; rows run
/// north and columns run east. Cell sizes in degrees are derived from the
/// spacing in meters at the origin latitude.
struct GridField {
  std::string name;
  FeatureGroup group = FeatureGroup::Static;
  double grid_spacing = 375.0;
  double origin_lat = 0.0; ///< centre of cell (0, 0)
  double origin_lon = 0.0;
  std::size_t nrows = 0;
  std::size_t ncols = 0;
  std::vector<double> values; ///< row-major
  std::vector<std::uint8_t> valid;
  std::optional<UtcTime> valid_time; ///< hourly and retrieval fields
  std::optional<int> month;          ///< monthly climatology fields, 1..12

  double dlat() const;
  double dlon() const;
  double cell_lat(std::size_t row) const { return origin_lat + static_cast<double>(row) * dlat(); }
  double cell_lon(std::size_t col) const { return origin_lon + static_cast<double>(col) * dlon(); }
  std::optional<double> at(std::size_t row, std::size_t col) const {
    const auto i = row * ncols + col;
    return valid[i] ? std::optional<double>(values[i]) : std::nullopt;
  }
};

inline constexpr double kEarthRadiusMeters = 6371008.8;

double great_circle_meters(double lat1, double lon1, double lat2, double lon2);

/// Row-major index of the cell whose centre is nearest in great-circle
/// distance; ties go to the lowest index. Throws OutOfDomainError outside the grid.
std::size_t nearest_cell(const GridField& field, double lat, double lon);

/// Value of the nearest cell, or nullopt if that cell is invalid.
std::optional<double> nearest_neighbor_sample(const GridField& field, double lat, double lon);

/// Block-averages valid cells over factor x factor blocks. Blocks with no
/// valid cell are invalid. Partial blocks at the far edges average what they hold.
GridField coarsen(const GridField& field, std::size_t factor);

/// Linear interpolation of monthly anchors (day 15 of each month, wrapping
/// over the year end) to a 1..365 day of year.
double interpolate_monthly(const std::array<double, 12>& monthly, int doy);

struct PairingStats {
  std::size_t observations_used = 0;
  std::size_t dropped_qc = 0;
  std::size_t dropped_unknown_site = 0;
  std::size_t dropped_duplicate = 0;
};

/// Pairs QC-passing observations with gridded predictors into one row per
/// (site, hour). Fields must all be named in `schema` with a matching group.
Dataset build_training_table(const std::vector<FmcObservation>& obs,
                             const std::vector<SiteRecord>& sites,
                             const std::vector<GridField>& fields,
                             const std::vector<ColumnSpec>& schema = default_schema(),
                             PairingStats* stats = nullptr);

std::vector<FmcObservation> read_observations_csv(const std::filesystem::path& path);
void write_observations_csv(const std::filesystem::path& path, const std::vector<FmcObservation>& obs);
std::vector<SiteRecord> read_sites_csv(const std::filesystem::path& path);
void write_sites_csv(const std::filesystem::path& path, const std::vector<SiteRecord>& sites);
void write_changelog_csv(const std::filesystem::path& path, const std::vector<ChangelogEntry>& log);

/// Raster stack: one raster per line,
/// `name,group,spacing_m,origin_lat,origin_lon,nrows,ncols,valid_time,month,v0,...`
/// with empty value fields marking invalid cells.
void write_grid_fields_csv(const std::filesystem::path& path, const std::vector<GridField>& fields,
                           bool append = false);
std::vector<GridField> read_grid_fields_csv(const std::filesystem::path& path);

} // namespace fmc
