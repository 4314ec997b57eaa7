#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "fmc/ingestion.hpp"
#include "fmc/time.hpp"

namespace fmc {

enum class ClimatologyKind { DOY, DOY_HR };

std::string_view to_string(ClimatologyKind k);
ClimatologyKind parse_climatology_kind(std::string_view s);

struct ClimatologyEntry {
  std::optional<double> mean; ///< masked when n_years is below the minimum
  std::optional<double> std;
  std::size_t count = 0;
  int n_years = 0;
};

inline constexpr int kMinClimatologyYears = 6;
inline constexpr int kWindowHalfWidth = 15;

/// Per-site baseline keyed by day of year (1..365) and optionally hour.
class ClimatologyTable {
public:
  explicit ClimatologyTable(ClimatologyKind kind = ClimatologyKind::DOY) : kind_(kind) {}

  ClimatologyKind kind() const noexcept { return kind_; }
  std::size_t slots_per_site() const noexcept { return kind_ == ClimatologyKind::DOY ? 365 : 365 * 24; }

  /// Entry for (site, doy[, hour]); nullopt when nothing was pooled there or the site is unknown.
  std::optional<ClimatologyEntry> entry(const std::string& site, int doy, int hour = 0) const;
  void set(const std::string& site, int doy, int hour, const ClimatologyEntry& e);

  std::vector<std::string> sites() const;
  std::size_t size() const;

  friend bool operator==(const ClimatologyTable&, const ClimatologyTable&);

private:
  std::size_t slot(int doy, int hour) const;

  ClimatologyKind kind_;
  std::map<std::string, std::vector<ClimatologyEntry>, std::less<>> by_site_;
};

bool operator==(const ClimatologyEntry& a, const ClimatologyEntry& b);

/// The 31 days centred on `doy`, wrapping over the year end.
std::vector<int> window_days(int doy);

/// Observations strictly before `era_end` (the climatology era).
std::vector<FmcObservation> observations_before(const std::vector<FmcObservation>& obs,
                                                UtcTime era_end);

/// Pools every QC-passing observation in the 31-day window around each day
/// (and matching hour for DOY_HR) over all years. Feb 29 pools with Feb 28.
ClimatologyTable build_climatology(const std::vector<FmcObservation>& obs, ClimatologyKind kind,
                                   int min_years = kMinClimatologyYears);

std::optional<double> climatology_predict(const ClimatologyTable& table, const std::string& site,
                                          UtcTime t);

void write_climatology_csv(const std::filesystem::path& path, const ClimatologyTable& table);
ClimatologyTable read_climatology_csv(const std::filesystem::path& path);

} // namespace fmc
