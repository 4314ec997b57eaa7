#include "fmc/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>
#include <stdexcept>

namespace fmc {

void SynthConfig::validate() const {
  if (n_sites == 0) throw std::invalid_argument("synth: n_sites must be positive");
  if (years < 1) throw std::invalid_argument("synth: years must be positive");
  if (predictor_start_year < start_year || predictor_start_year >= start_year + years)
    throw std::invalid_argument("synth: predictor_start_year outside the generated years");
  for (double w : group_signal_weights)
    if (!std::isfinite(w)) throw std::invalid_argument("synth: weights must be finite");
  if (!(noise_std >= 0.0) || !(site_effect_std >= 0.0)) throw std::invalid_argument("synth: negative std");
  for (int h : viirs_hours)
    if (h < 0 || h > 23) throw std::invalid_argument("synth: viirs hour out of range");
  if (!(cloud_fraction >= 0.0 && cloud_fraction < 1.0)) throw std::invalid_argument("synth: cloud_fraction in [0,1)");
  if (!(grid_spacing > 0.0) || grid_cols == 0) throw std::invalid_argument("synth: bad grid");
  if (obs_every_hours < 1 || days_per_year < 1 || days_per_year > 365)
    throw std::invalid_argument("synth: bad observation cadence");
}

namespace {

constexpr double kColumnNoise = 0.2;
constexpr double kTwoPi = 2.0 * std::numbers::pi;

double round_to(double v, double step) { return std::round(v / step) * step; }

/// Affine image of a latent combination, in plausible-looking units.
struct ColumnMap {
  double offset;
  double scale;
  std::array<double, 3> loading; ///< on the group's latents
  bool category = false;
};

struct Latents {
  std::array<double, 3> s{}; ///< static
  double h1 = 0, h2 = 0, n1 = 0, v = 0, l = 0;
};

struct Ar1 {
  double phi;
  /// `k` unit steps at once; the k-step transition of a stationary AR(1).
  double step(double x, std::mt19937_64& rng, int k = 1) const {
    const double a = std::pow(phi, k);
    std::normal_distribution<double> nd(0.0, std::sqrt(1.0 - a * a));
    return a * x + nd(rng);
  }
};

constexpr Ar1 kHrrr{0.95}, kNwm{0.995}, kViirs{0.98}, kLst{0.9};

} // namespace

SynthOutput generate(const SynthConfig& cfg) {
  cfg.validate();
  SynthOutput out;
  std::mt19937_64 rng(cfg.seed);
  std::normal_distribution<double> z(0.0, 1.0);
  std::uniform_real_distribution<double> u01(0.0, 1.0);

  const auto& schema = default_schema();
  const std::size_t cols = cfg.grid_cols;
  const std::size_t rows = (cfg.n_sites + cols - 1) / cols;
  const std::size_t cells = rows * cols;

  GridField proto;
  proto.grid_spacing = cfg.grid_spacing;
  proto.origin_lat = cfg.origin_lat;
  proto.origin_lon = cfg.origin_lon;
  proto.nrows = rows;
  proto.ncols = cols;

  // Sites sit inside their own cell, off-centre by at most 0.3 cell.
  std::vector<std::size_t> site_cell(cfg.n_sites);
  std::vector<int> site_minute(cfg.n_sites);
  std::vector<double> site_effect(cfg.n_sites);
  const UtcTime reported = make_utc(cfg.start_year, 1, 1);
  for (std::size_t i = 0; i < cfg.n_sites; ++i) {
    const std::size_t r = i / cols, c = i % cols;
    site_cell[i] = r * cols + c;
    char id[32];
    std::snprintf(id, sizeof id, "S%03zu", i);
    const double jl = (u01(rng) - 0.5) * 0.6, jc = (u01(rng) - 0.5) * 0.6;
    out.sites.push_back({id, proto.cell_lat(r) + jl * proto.dlat(), proto.cell_lon(c) + jc * proto.dlon(),
                         reported});
    site_minute[i] = static_cast<int>(u01(rng) * 26.0);
    site_effect[i] = cfg.site_effect_std * z(rng);
  }

  std::vector<ColumnMap> maps(schema.size());
  for (std::size_t k = 0; k < schema.size(); ++k) {
    auto& m = maps[k];
    m.offset = round_to(u01(rng) * 100.0, 0.1);
    m.scale = round_to(0.5 + u01(rng) * 4.5, 0.01);
    const double angle = static_cast<double>(k) * std::numbers::pi / 7.0;
    m.loading = {std::cos(angle), std::sin(angle), 0.0};
    if (schema[k].group == FeatureGroup::Static) {
      const std::size_t which = k % 3;
      m.loading = {0.0, 0.0, 0.0};
      m.loading[which] = 1.0;
      m.category = schema[k].units == "category";
    }
  }

  std::vector<Latents> lat(cells);
  for (auto& c : lat) {
    c.s = {z(rng), z(rng), z(rng)};
    c.h1 = z(rng);
    c.h2 = z(rng);
    c.n1 = z(rng);
    c.v = z(rng);
    c.l = z(rng);
  }

  auto static_value = [&](const ColumnMap& m, const Latents& c, double noise) {
    const double x = m.loading[0] * c.s[0] + m.loading[1] * c.s[1] + m.loading[2] * c.s[2];
    if (m.category) return std::clamp(std::round(5.0 + 2.0 * x), 1.0, 16.0);
    return round_to(m.offset + m.scale * (x + kColumnNoise * noise), 1e-4);
  };

  for (std::size_t k = 0; k < schema.size(); ++k) {
    const auto& spec = schema[k];
    if (spec.group != FeatureGroup::Static) continue;
    const int n_fields = spec.cadence == Cadence::Monthly ? 12 : 1;
    for (int f = 0; f < n_fields; ++f) {
      GridField g = proto;
      g.name = spec.name;
      g.group = spec.group;
      if (spec.cadence == Cadence::Monthly) g.month = f + 1;
      for (std::size_t c = 0; c < cells; ++c) {
        g.values.push_back(static_value(maps[k], lat[c], z(rng)));
        g.valid.push_back(1);
      }
      out.fields.push_back(std::move(g));
    }
  }

  const auto& w = cfg.group_signal_weights;
  auto signal = [&](const Latents& c) {
    return w[0] * c.s[0] + w[1] * (c.h1 + 0.5 * (c.h2 * c.h2 - 1.0)) + w[2] * c.n1 + w[3] * c.v +
           w[4] * c.l;
  };

  const UtcTime begin = make_utc(cfg.start_year, 1, 1);
  const UtcTime end = make_utc(cfg.start_year + cfg.years, 1, 1);
  const UtcTime grid_begin = make_utc(cfg.predictor_start_year, 1, 1);
  std::vector<double> cell_noise(cells);
  // Latents advance only at emitted hours, jumping over the skipped ones.
  int pending = 0;
  for (UtcTime t = begin; t < end; t += std::chrono::hours(1)) {
    ++pending;
    const int hour = hour_of_day(t);
    const int doy = day_of_year_365(t);
    if (doy > cfg.days_per_year || hour % cfg.obs_every_hours != 0) continue;
    for (auto& c : lat) {
      c.h1 = kHrrr.step(c.h1, rng, pending);
      c.h2 = kHrrr.step(c.h2, rng, pending);
      c.n1 = kNwm.step(c.n1, rng, pending);
      c.v = kViirs.step(c.v, rng, pending);
      c.l = kLst.step(c.l, rng, pending);
    }
    pending = 0;

    const double clock = cfg.base_fmc + cfg.seasonal_amplitude * std::sin(kTwoPi * (doy - 80) / 365.0) +
                         cfg.diurnal_amplitude * std::cos(kTwoPi * (hour - 4) / 24.0);
    for (std::size_t i = 0; i < cfg.n_sites; ++i) {
      const double truth = clock + site_effect[i] + signal(lat[site_cell[i]]);
      const double fmc = round_to(std::clamp(truth + cfg.noise_std * z(rng), 0.0, 400.0), 0.01);
      out.observations.push_back(
          make_observation(out.sites[i].site_id, t + std::chrono::minutes(site_minute[i]), fmc));
      out.noiseless_fmc.push_back(truth);
    }

    if (t < grid_begin) continue;
    const bool retrieval =
        std::find(cfg.viirs_hours.begin(), cfg.viirs_hours.end(), hour) != cfg.viirs_hours.end();
    std::vector<std::uint8_t> clear(cells, 1);
    if (retrieval)
      for (auto& c : clear) c = u01(rng) >= cfg.cloud_fraction ? 1 : 0;
    for (std::size_t k = 0; k < schema.size(); ++k) {
      const auto& spec = schema[k];
      if (spec.cadence == Cadence::Static || spec.cadence == Cadence::Monthly) continue;
      if (spec.cadence == Cadence::Retrieval && !retrieval) continue;
      const auto& m = maps[k];
      GridField g = proto;
      g.name = spec.name;
      g.group = spec.group;
      g.valid_time = t;
      g.values.resize(cells);
      g.valid.assign(cells, 1);
      for (std::size_t c = 0; c < cells; ++c) {
        const auto& L = lat[c];
        double x = 0.0;
        switch (spec.group) {
          case FeatureGroup::HRRR: x = m.loading[0] * L.h1 + m.loading[1] * L.h2; break;
          case FeatureGroup::NWM: x = L.n1; break;
          case FeatureGroup::ViirsRefl: x = L.v; break;
          case FeatureGroup::LST: x = L.l; break;
          case FeatureGroup::Static: break;
        }
        const double noise = z(rng);
        if (spec.cadence == Cadence::Retrieval && !clear[c]) {
          g.values[c] = std::numeric_limits<double>::quiet_NaN();
          g.valid[c] = 0;
          continue;
        }
        g.values[c] = round_to(m.offset + m.scale * (x + kColumnNoise * noise), 1e-4);
      }
      out.fields.push_back(std::move(g));
    }
  }

  std::ostringstream d;
  d << "fmc = " << cfg.base_fmc << " + " << cfg.seasonal_amplitude << "*sin(2pi*(doy-80)/365) + "
    << cfg.diurnal_amplitude << "*cos(2pi*(hour-4)/24) + site_effect(sd " << cfg.site_effect_std
    << ") + " << w[0] << "*s0 + " << w[1] << "*(h1 + 0.5*(h2^2-1)) + " << w[2] << "*n1 + " << w[3]
    << "*v + " << w[4] << "*l + noise(sd " << cfg.noise_std << "), clipped to [0,400]\n"
    << "latents: s0 static per cell; h1,h2 AR(1) phi " << kHrrr.phi << "; n1 AR(1) phi " << kNwm.phi
    << "; v AR(1) phi " << kViirs.phi << "; l AR(1) phi " << kLst.phi << "; all unit variance\n"
    << "columns: offset + scale*(group latent combination + " << kColumnNoise << "*noise)\n";
  out.description = d.str();
  return out;
}

void write_synth(const std::filesystem::path& dir, const SynthOutput& out) {
  std::filesystem::create_directories(dir);
  write_sites_csv(dir / "sites.csv", out.sites);
  write_observations_csv(dir / "observations.csv", out.observations);
  write_grid_fields_csv(dir / "grid.csv", out.fields);
  std::ofstream t(dir / "truth.txt");
  t << out.description;
}

} // namespace fmc
