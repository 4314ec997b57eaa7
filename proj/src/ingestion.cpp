#include "fmc/ingestion.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <unordered_map>

#include "fmc/csv.hpp"
#include "fmc/errors.hpp"

namespace fmc {

namespace {
constexpr double kDegToRad = std::numbers::pi / 180.0;
constexpr double kMetersPerDegree = kEarthRadiusMeters * kDegToRad;
constexpr int kMonthStart[12] = {0, 31, 59, 90, 120, 151, 181, 212, 243, 273, 304, 334};
} // namespace

std::string_view to_string(ChangeKind k) {
  switch (k) {
  case ChangeKind::LocationChanged:
    return "location_changed";
  case ChangeKind::MissingIdentifier:
    return "missing_identifier";
  case ChangeKind::InvalidLocation:
    return "invalid_location";
  }
  return "unknown";
}

bool qc_range_check(double value) {
  if (!std::isfinite(value)) {
    throw InvalidObservationError("non-finite fmc value");
  }
  return value >= 0.0 && value <= 400.0;
}

FmcObservation make_observation(std::string site_id, UtcTime t, double fmc) {
  return {std::move(site_id), t, fmc, qc_range_check(fmc)};
}

DedupeResult dedupe_sites(const std::vector<SiteRecord>& records) {
  DedupeResult out;
  std::map<std::string, std::vector<SiteRecord>> by_site;
  for (const auto& rec : records) {
    if (rec.site_id.empty()) {
      out.changelog.push_back({rec.site_id, ChangeKind::MissingIdentifier, {rec}});
      continue;
    }
    if (!(rec.lat >= -90.0 && rec.lat <= 90.0 && rec.lon >= -180.0 && rec.lon <= 180.0)) {
      out.changelog.push_back({rec.site_id, ChangeKind::InvalidLocation, {rec}});
      continue;
    }
    by_site[rec.site_id].push_back(rec);
  }
  for (auto& [id, history] : by_site) {
    std::stable_sort(history.begin(), history.end(),
                     [](const SiteRecord& a, const SiteRecord& b) {
                       return a.reported_at < b.reported_at;
                     });
    out.sites.push_back(history.back());
    const bool moved = std::any_of(history.begin(), history.end(), [&](const SiteRecord& r) {
      return r.lat != history.front().lat || r.lon != history.front().lon;
    });
    if (moved) {
      out.changelog.push_back({id, ChangeKind::LocationChanged, history});
    }
  }
  return out;
}

double GridField::dlat() const { return grid_spacing / kMetersPerDegree; }

double GridField::dlon() const {
  return grid_spacing / (kMetersPerDegree * std::cos(origin_lat * kDegToRad));
}

double great_circle_meters(double lat1, double lon1, double lat2, double lon2) {
  const double p1 = lat1 * kDegToRad;
  const double p2 = lat2 * kDegToRad;
  const double dp = (lat2 - lat1) * kDegToRad;
  const double dl = (lon2 - lon1) * kDegToRad;
  const double a = std::sin(dp / 2) * std::sin(dp / 2) +
                   std::cos(p1) * std::cos(p2) * std::sin(dl / 2) * std::sin(dl / 2);
  return 2.0 * kEarthRadiusMeters * std::asin(std::min(1.0, std::sqrt(a)));
}

std::size_t nearest_cell(const GridField& field, double lat, double lon) {
  if (field.nrows == 0 || field.ncols == 0) {
    throw OutOfDomainError("empty grid " + field.name);
  }
  const double fr = (lat - field.origin_lat) / field.dlat();
  const double fc = (lon - field.origin_lon) / field.dlon();
  const double nr = static_cast<double>(field.nrows);
  const double nc = static_cast<double>(field.ncols);
  if (!(fr >= -0.5 && fr <= nr - 0.5 && fc >= -0.5 && fc <= nc - 0.5)) {
    throw OutOfDomainError("point (" + std::to_string(lat) + ", " + std::to_string(lon) +
                           ") outside grid " + field.name);
  }
  // Candidates in a small window around the index-space estimate; the
  // great-circle minimum lies inside it for any grid at desk scale.
  const long r0 = std::lround(fr);
  const long c0 = std::lround(fc);
  const long rmin = std::max(0L, r0 - 2);
  const long rmax = std::min(static_cast<long>(field.nrows) - 1, r0 + 2);
  const long cmin = std::max(0L, c0 - 2);
  const long cmax = std::min(static_cast<long>(field.ncols) - 1, c0 + 2);

  std::vector<std::pair<double, std::size_t>> cand;
  double best = std::numeric_limits<double>::infinity();
  for (long r = rmin; r <= rmax; ++r) {
    for (long c = cmin; c <= cmax; ++c) {
      const auto ur = static_cast<std::size_t>(r);
      const auto uc = static_cast<std::size_t>(c);
      const double d = great_circle_meters(lat, lon, field.cell_lat(ur), field.cell_lon(uc));
      cand.emplace_back(d, ur * field.ncols + uc);
      best = std::min(best, d);
    }
  }
  const double tol = best * 1e-12 + 1e-9;
  std::size_t pick = std::numeric_limits<std::size_t>::max();
  for (const auto& [d, idx] : cand) {
    if (d <= best + tol) pick = std::min(pick, idx);
  }
  return pick;
}

std::optional<double> nearest_neighbor_sample(const GridField& field, double lat, double lon) {
  const auto idx = nearest_cell(field, lat, lon);
  return field.valid[idx] ? std::optional<double>(field.values[idx]) : std::nullopt;
}

GridField coarsen(const GridField& field, std::size_t factor) {
  if (factor == 0) throw std::invalid_argument("coarsen: factor must be positive");
  GridField out;
  out.name = field.name;
  out.group = field.group;
  out.grid_spacing = field.grid_spacing * static_cast<double>(factor);
  out.valid_time = field.valid_time;
  out.month = field.month;
  out.nrows = (field.nrows + factor - 1) / factor;
  out.ncols = (field.ncols + factor - 1) / factor;
  // Block centre of the first block in the fine grid's index space.
  const double offset = (static_cast<double>(factor) - 1.0) / 2.0;
  out.origin_lat = field.origin_lat + offset * field.dlat();
  out.origin_lon = field.origin_lon + offset * field.dlon();
  out.values.assign(out.nrows * out.ncols, std::numeric_limits<double>::quiet_NaN());
  out.valid.assign(out.nrows * out.ncols, 0);
  for (std::size_t br = 0; br < out.nrows; ++br) {
    for (std::size_t bc = 0; bc < out.ncols; ++bc) {
      double sum = 0.0;
      std::size_t n = 0;
      for (std::size_t r = br * factor; r < std::min(field.nrows, (br + 1) * factor); ++r) {
        for (std::size_t c = bc * factor; c < std::min(field.ncols, (bc + 1) * factor); ++c) {
          const auto i = r * field.ncols + c;
          if (field.valid[i]) {
            sum += field.values[i];
            ++n;
          }
        }
      }
      if (n > 0) {
        out.values[br * out.ncols + bc] = sum / static_cast<double>(n);
        out.valid[br * out.ncols + bc] = 1;
      }
    }
  }
  return out;
}

double interpolate_monthly(const std::array<double, 12>& monthly, int doy) {
  if (doy < 1 || doy > 365) throw std::out_of_range("day of year out of range");
  // Anchor k sits at day kMonthStart[k] + 15.
  auto anchor = [](int k) { return kMonthStart[k] + 15; };
  int lo = 11;
  for (int k = 0; k < 12; ++k) {
    if (anchor(k) <= doy) lo = k;
  }
  double lo_day = anchor(lo);
  if (doy < anchor(0)) lo_day -= 365; // before Jan 15: interpolate from previous Dec 15
  const int hi = (lo + 1) % 12;
  double hi_day = anchor(hi);
  if (hi_day <= lo_day) hi_day += 365;
  const double w = (static_cast<double>(doy) - lo_day) / (hi_day - lo_day);
  return monthly[static_cast<std::size_t>(lo)] +
         w * (monthly[static_cast<std::size_t>(hi)] - monthly[static_cast<std::size_t>(lo)]);
}

namespace {

struct FieldIndex {
  Cadence cadence = Cadence::Hourly;
  const GridField* fixed = nullptr;
  std::array<const GridField*, 12> monthly{};
  std::map<UtcTime, std::vector<const GridField*>> timed;
};

} // namespace

Dataset build_training_table(const std::vector<FmcObservation>& obs,
                             const std::vector<SiteRecord>& sites,
                             const std::vector<GridField>& fields,
                             const std::vector<ColumnSpec>& schema, PairingStats* stats) {
  PairingStats local;
  std::unordered_map<std::string, std::size_t> col_of;
  for (std::size_t c = 0; c < schema.size(); ++c) col_of[schema[c].name] = c;

  std::vector<FieldIndex> index(schema.size());
  for (std::size_t c = 0; c < schema.size(); ++c) index[c].cadence = schema[c].cadence;
  for (const auto& f : fields) {
    auto it = col_of.find(f.name);
    if (it == col_of.end()) throw SchemaError("grid field not in schema: " + f.name);
    const auto& spec = schema[it->second];
    if (spec.group != f.group) {
      throw SchemaError("grid field " + f.name + " has group " + std::string(to_string(f.group)) +
                        ", schema says " + std::string(to_string(spec.group)));
    }
    auto& ix = index[it->second];
    switch (spec.cadence) {
    case Cadence::Static:
      ix.fixed = &f;
      break;
    case Cadence::Monthly:
      if (!f.month || *f.month < 1 || *f.month > 12) {
        throw SchemaError("monthly field " + f.name + " lacks a month");
      }
      ix.monthly[static_cast<std::size_t>(*f.month - 1)] = &f;
      break;
    case Cadence::Hourly:
    case Cadence::Retrieval:
      if (!f.valid_time) throw SchemaError("timed field " + f.name + " lacks valid_time");
      ix.timed[assign_nearest_hour(*f.valid_time)].push_back(&f);
      break;
    }
  }

  std::unordered_map<std::string, const SiteRecord*> site_of;
  for (const auto& s : sites) site_of[s.site_id] = &s;

  struct Key {
    const SiteRecord* site;
    UtcTime hour;
    double fmc;
  };
  std::vector<Key> keys;
  keys.reserve(obs.size());
  for (const auto& o : obs) {
    if (!o.qc_pass) {
      ++local.dropped_qc;
      continue;
    }
    auto it = site_of.find(o.site_id);
    if (it == site_of.end()) {
      ++local.dropped_unknown_site;
      continue;
    }
    keys.push_back({it->second, assign_nearest_hour(o.timestamp), o.fmc});
  }
  std::stable_sort(keys.begin(), keys.end(), [](const Key& a, const Key& b) {
    if (a.site->site_id != b.site->site_id) return a.site->site_id < b.site->site_id;
    return a.hour < b.hour;
  });
  // First observation wins within a (site, hour).
  std::vector<Key> unique;
  unique.reserve(keys.size());
  for (const auto& k : keys) {
    if (!unique.empty() && unique.back().site == k.site && unique.back().hour == k.hour) {
      ++local.dropped_duplicate;
      continue;
    }
    unique.push_back(k);
  }
  local.observations_used = unique.size();

  std::vector<std::string> site_ids;
  std::vector<UtcTime> times;
  Column fmc;
  std::vector<Column> predictors(schema.size());
  for (auto& col : predictors) {
    col.values.reserve(unique.size());
    col.valid.reserve(unique.size());
  }
  for (const auto& k : unique) {
    site_ids.push_back(k.site->site_id);
    times.push_back(k.hour);
    fmc.push_back(k.fmc);
    const double lat = k.site->lat;
    const double lon = k.site->lon;
    const int doy = day_of_year_365(k.hour);
    for (std::size_t c = 0; c < schema.size(); ++c) {
      const auto& ix = index[c];
      std::optional<double> v;
      switch (ix.cadence) {
      case Cadence::Static:
        if (ix.fixed) v = nearest_neighbor_sample(*ix.fixed, lat, lon);
        break;
      case Cadence::Monthly: {
        std::array<double, 12> monthly{};
        bool complete = true;
        for (std::size_t m = 0; m < 12 && complete; ++m) {
          if (!ix.monthly[m]) {
            complete = false;
            break;
          }
          auto s = nearest_neighbor_sample(*ix.monthly[m], lat, lon);
          if (!s) complete = false;
          else monthly[m] = *s;
        }
        if (complete) v = interpolate_monthly(monthly, doy);
        break;
      }
      case Cadence::Hourly:
      case Cadence::Retrieval: {
        auto it = ix.timed.find(k.hour);
        if (it != ix.timed.end()) {
          for (const auto* f : it->second) {
            v = nearest_neighbor_sample(*f, lat, lon);
            if (v) break;
          }
        }
        break;
      }
      }
      predictors[c].push_back(v);
    }
  }
  if (stats) *stats = local;
  return Dataset(schema, std::move(site_ids), std::move(times), std::move(predictors),
                 std::move(fmc));
}

std::vector<FmcObservation> read_observations_csv(const std::filesystem::path& path) {
  csv::Reader reader(path);
  const auto ci = reader.column("site_id");
  const auto ct = reader.column("timestamp");
  const auto cf = reader.column("fmc");
  std::vector<FmcObservation> out;
  std::vector<std::string_view> f;
  while (reader.next(f)) {
    const double v = csv::parse_double(f.at(cf));
    FmcObservation o{std::string(f.at(ci)), parse_utc(f.at(ct)), v, false};
    o.qc_pass = std::isfinite(v) && qc_range_check(v);
    out.push_back(std::move(o));
  }
  return out;
}

void write_observations_csv(const std::filesystem::path& path,
                            const std::vector<FmcObservation>& obs) {
  csv::Writer w(path);
  w.row({"site_id", "timestamp", "fmc"});
  for (const auto& o : obs) {
    w.field(o.site_id).field(format_utc(o.timestamp)).field(o.fmc);
    w.end_row();
  }
}

std::vector<SiteRecord> read_sites_csv(const std::filesystem::path& path) {
  csv::Reader reader(path);
  const auto ci = reader.column("site_id");
  const auto clat = reader.column("lat");
  const auto clon = reader.column("lon");
  const auto ct = reader.column("reported_at");
  std::vector<SiteRecord> out;
  std::vector<std::string_view> f;
  while (reader.next(f)) {
    out.push_back({std::string(f.at(ci)), csv::parse_double(f.at(clat)),
                   csv::parse_double(f.at(clon)), parse_utc(f.at(ct))});
  }
  return out;
}

void write_sites_csv(const std::filesystem::path& path, const std::vector<SiteRecord>& sites) {
  csv::Writer w(path);
  w.row({"site_id", "lat", "lon", "reported_at"});
  for (const auto& s : sites) {
    w.field(s.site_id).field(s.lat).field(s.lon).field(format_utc(s.reported_at));
    w.end_row();
  }
}

void write_changelog_csv(const std::filesystem::path& path, const std::vector<ChangelogEntry>& log) {
  csv::Writer w(path);
  w.row({"entry", "site_id", "kind", "lat", "lon", "reported_at"});
  for (std::size_t i = 0; i < log.size(); ++i) {
    for (const auto& rec : log[i].history) {
      w.field(i).field(log[i].site_id).field(to_string(log[i].kind)).field(rec.lat).field(rec.lon)
          .field(format_utc(rec.reported_at));
      w.end_row();
    }
  }
}

void write_grid_fields_csv(const std::filesystem::path& path, const std::vector<GridField>& fields,
                           bool append) {
  const bool fresh = !append || !std::filesystem::exists(path);
  std::ofstream out(path, append ? std::ios::app : std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  if (fresh) {
    out << "name,group,spacing_m,origin_lat,origin_lon,nrows,ncols,valid_time,month,values\n";
  }
  std::string line;
  for (const auto& g : fields) {
    line.clear();
    line += g.name;
    line += ',';
    line += to_string(g.group);
    line += ',';
    line += csv::format_double(g.grid_spacing);
    line += ',';
    line += csv::format_double(g.origin_lat);
    line += ',';
    line += csv::format_double(g.origin_lon);
    line += ',';
    line += std::to_string(g.nrows);
    line += ',';
    line += std::to_string(g.ncols);
    line += ',';
    if (g.valid_time) line += format_utc(*g.valid_time);
    line += ',';
    if (g.month) line += std::to_string(*g.month);
    for (std::size_t i = 0; i < g.values.size(); ++i) {
      line += ',';
      if (g.valid[i]) line += csv::format_double(g.values[i]);
    }
    line += '\n';
    out << line;
  }
}

std::vector<GridField> read_grid_fields_csv(const std::filesystem::path& path) {
  csv::Reader reader(path);
  std::vector<GridField> out;
  std::vector<std::string_view> f;
  while (reader.next(f)) {
    if (f.size() < 9) throw ParseError(path.string() + ": truncated raster line");
    GridField g;
    g.name = std::string(f[0]);
    g.group = parse_feature_group(f[1]);
    g.grid_spacing = csv::parse_double(f[2]);
    g.origin_lat = csv::parse_double(f[3]);
    g.origin_lon = csv::parse_double(f[4]);
    g.nrows = static_cast<std::size_t>(csv::parse_int(f[5]));
    g.ncols = static_cast<std::size_t>(csv::parse_int(f[6]));
    if (!f[7].empty()) g.valid_time = parse_utc(f[7]);
    if (!f[8].empty()) g.month = static_cast<int>(csv::parse_int(f[8]));
    if (!(g.grid_spacing > 0.0)) throw ParseError("grid spacing must be positive: " + g.name);
    const auto n = g.nrows * g.ncols;
    if (f.size() != 9 + n) {
      throw ParseError(path.string() + ":" + std::to_string(reader.line_number()) +
                       ": expected " + std::to_string(n) + " cell values");
    }
    g.values.resize(n);
    g.valid.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      auto v = csv::parse_optional(f[9 + i]);
      g.values[i] = v ? *v : std::numeric_limits<double>::quiet_NaN();
      g.valid[i] = v ? 1 : 0;
    }
    out.push_back(std::move(g));
  }
  return out;
}

} // namespace fmc
