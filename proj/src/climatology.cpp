#include "fmc/climatology.hpp"

#include <bitset>
#include <cmath>
#include <unordered_map>

#include "fmc/csv.hpp"
#include "fmc/errors.hpp"

namespace fmc {

namespace {
constexpr std::size_t kMaxYearSpan = 256;
}

std::string_view to_string(ClimatologyKind k) { return k == ClimatologyKind::DOY ? "DOY" : "DOY_HR"; }

ClimatologyKind parse_climatology_kind(std::string_view s) {
  if (s == "DOY" || s == "doy") return ClimatologyKind::DOY;
  if (s == "DOY_HR" || s == "doy_hr" || s == "DOY-HR") return ClimatologyKind::DOY_HR;
  throw std::invalid_argument("unknown climatology kind: " + std::string(s));
}

bool operator==(const ClimatologyEntry& a, const ClimatologyEntry& b) {
  return a.mean == b.mean && a.std == b.std && a.count == b.count && a.n_years == b.n_years;
}

bool operator==(const ClimatologyTable& a, const ClimatologyTable& b) {
  return a.kind_ == b.kind_ && a.by_site_ == b.by_site_;
}

std::size_t ClimatologyTable::slot(int doy, int hour) const {
  if (doy < 1 || doy > 365) throw std::out_of_range("doy out of range");
  if (kind_ == ClimatologyKind::DOY) return static_cast<std::size_t>(doy - 1);
  if (hour < 0 || hour > 23) throw std::out_of_range("hour out of range");
  return static_cast<std::size_t>((doy - 1) * 24 + hour);
}

std::optional<ClimatologyEntry> ClimatologyTable::entry(const std::string& site, int doy,
                                                        int hour) const {
  auto it = by_site_.find(site);
  if (it == by_site_.end()) return std::nullopt;
  const auto& e = it->second[slot(doy, hour)];
  if (e.count == 0) return std::nullopt;
  return e;
}

void ClimatologyTable::set(const std::string& site, int doy, int hour, const ClimatologyEntry& e) {
  auto& v = by_site_[site];
  if (v.empty()) v.resize(slots_per_site());
  v[slot(doy, hour)] = e;
}

std::vector<std::string> ClimatologyTable::sites() const {
  std::vector<std::string> out;
  for (const auto& [s, _] : by_site_) out.push_back(s);
  return out;
}

std::size_t ClimatologyTable::size() const {
  std::size_t n = 0;
  for (const auto& [_, v] : by_site_) {
    for (const auto& e : v) n += e.count > 0 ? 1 : 0;
  }
  return n;
}

std::vector<int> window_days(int doy) {
  if (doy < 1 || doy > 365) throw std::out_of_range("window_days: doy must be in 1..365");
  std::vector<int> out;
  out.reserve(2 * kWindowHalfWidth + 1);
  for (int k = -kWindowHalfWidth; k <= kWindowHalfWidth; ++k) {
    out.push_back(((doy - 1 + k) % 365 + 365) % 365 + 1);
  }
  return out;
}

std::vector<FmcObservation> observations_before(const std::vector<FmcObservation>& obs,
                                                UtcTime era_end) {
  std::vector<FmcObservation> out;
  for (const auto& o : obs) {
    if (o.timestamp < era_end) out.push_back(o);
  }
  return out;
}

ClimatologyTable build_climatology(const std::vector<FmcObservation>& obs, ClimatologyKind kind,
                                   int min_years) {
  if (obs.empty()) throw EmptyDatasetError("build_climatology: no observations");
  int min_year = std::numeric_limits<int>::max();
  for (const auto& o : obs) min_year = std::min(min_year, to_civil(o.timestamp).year);

  const std::size_t hours = kind == ClimatologyKind::DOY ? 1 : 24;
  struct Bucket {
    double sum = 0.0;
    double sumsq = 0.0;
    std::size_t count = 0;
    std::bitset<kMaxYearSpan> years;
  };
  // Per site, one bucket per (doy, hour) of raw observations.
  std::map<std::string, std::vector<Bucket>> buckets;
  for (const auto& o : obs) {
    if (!o.qc_pass) continue;
    const auto c = to_civil(o.timestamp);
    const auto year_offset = static_cast<std::size_t>(c.year - min_year);
    if (year_offset >= kMaxYearSpan) throw Error("observation span exceeds 256 years");
    const int doy = day_of_year_365(o.timestamp);
    const std::size_t hour = hours == 1 ? 0 : static_cast<std::size_t>(c.hour);
    auto& v = buckets[o.site_id];
    if (v.empty()) v.resize(365 * hours);
    auto& b = v[static_cast<std::size_t>(doy - 1) * hours + hour];
    b.sum += o.fmc;
    b.sumsq += o.fmc * o.fmc;
    ++b.count;
    b.years.set(year_offset);
  }
  if (buckets.empty()) throw EmptyDatasetError("build_climatology: no QC-passing observations");

  ClimatologyTable table(kind);
  for (const auto& [site, v] : buckets) {
    for (int doy = 1; doy <= 365; ++doy) {
      const auto window = window_days(doy);
      for (std::size_t h = 0; h < hours; ++h) {
        Bucket pool;
        for (int d : window) {
          const auto& b = v[static_cast<std::size_t>(d - 1) * hours + h];
          pool.sum += b.sum;
          pool.sumsq += b.sumsq;
          pool.count += b.count;
          pool.years |= b.years;
        }
        if (pool.count == 0) continue;
        ClimatologyEntry e;
        e.count = pool.count;
        e.n_years = static_cast<int>(pool.years.count());
        if (e.n_years >= min_years) {
          const double n = static_cast<double>(pool.count);
          const double mean = pool.sum / n;
          e.mean = mean;
          e.std = std::sqrt(std::max(0.0, pool.sumsq / n - mean * mean));
        }
        table.set(site, doy, static_cast<int>(h), e);
      }
    }
  }
  return table;
}

std::optional<double> climatology_predict(const ClimatologyTable& table, const std::string& site,
                                          UtcTime t) {
  const auto e = table.entry(site, day_of_year_365(t), hour_of_day(t));
  if (!e) return std::nullopt;
  return e->mean;
}

void write_climatology_csv(const std::filesystem::path& path, const ClimatologyTable& table) {
  csv::Writer w(path);
  const bool hourly = table.kind() == ClimatologyKind::DOY_HR;
  if (hourly) w.row({"site_id", "doy", "hour", "mean", "std", "count", "n_years"});
  else w.row({"site_id", "doy", "mean", "std", "count", "n_years"});
  for (const auto& site : table.sites()) {
    for (int doy = 1; doy <= 365; ++doy) {
      for (int h = 0; h < (hourly ? 24 : 1); ++h) {
        const auto e = table.entry(site, doy, h);
        if (!e) continue;
        w.field(site).field(doy);
        if (hourly) w.field(h);
        w.field(e->mean).field(e->std).field(e->count).field(e->n_years);
        w.end_row();
      }
    }
  }
}

ClimatologyTable read_climatology_csv(const std::filesystem::path& path) {
  csv::Reader reader(path);
  const bool hourly = reader.has_column("hour");
  ClimatologyTable table(hourly ? ClimatologyKind::DOY_HR : ClimatologyKind::DOY);
  const auto cs = reader.column("site_id");
  const auto cd = reader.column("doy");
  const auto cm = reader.column("mean");
  const auto csd = reader.column("std");
  const auto cc = reader.column("count");
  const auto cy = reader.column("n_years");
  const auto ch = hourly ? reader.column("hour") : 0;
  std::vector<std::string_view> f;
  while (reader.next(f)) {
    ClimatologyEntry e;
    e.mean = csv::parse_optional(f.at(cm));
    e.std = csv::parse_optional(f.at(csd));
    e.count = static_cast<std::size_t>(csv::parse_int(f.at(cc)));
    e.n_years = static_cast<int>(csv::parse_int(f.at(cy)));
    table.set(std::string(f.at(cs)), static_cast<int>(csv::parse_int(f.at(cd))),
              hourly ? static_cast<int>(csv::parse_int(f.at(ch))) : 0, e);
  }
  return table;
}

} // namespace fmc
