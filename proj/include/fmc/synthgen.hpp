#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "fmc/ingestion.hpp"
#include "fmc/tabular.hpp"

namespace fmc {

struct SynthConfig {
  std::size_t n_sites = 20;
  int start_year = 2013;
  int years = 7;
  /// Gridded predictors cover [predictor_start_year, start_year + years). Earlier
  /// years only carry observations (the climatology era).
  int predictor_start_year = 2019;
  std::uint64_t seed = 0;
  /// Indexed by FeatureGroup.
  std::array<double, kGroupCount> group_signal_weights = {1.0, 3.0, 1.0, 2.0, 1.0};
  double noise_std = 1.0;
  std::vector<int> viirs_hours = {2, 14};
  double site_effect_std = 1.0;
  double base_fmc = 15.0;
  double seasonal_amplitude = 3.0;
  double diurnal_amplitude = 1.0;
  double cloud_fraction = 0.1; ///< share of invalid retrieval cells
  double grid_spacing = 375.0;
  double origin_lat = 40.0;
  double origin_lon = -105.0;
  std::size_t grid_cols = 5;
  /// Observation cadence in hours.
  int obs_every_hours = 1;
  /// Days per year with observations, counted from Jan 1; 365 covers the year.
  int days_per_year = 365;

  /// Throws std::invalid_argument on inconsistent settings.
  void validate() const;
};

struct SynthOutput {
  std::vector<SiteRecord> sites;
  std::vector<FmcObservation> observations;
  std::vector<GridField> fields;
  std::vector<double> noiseless_fmc; ///< aligned with observations, before clipping
  std::string description;           ///< the generating function in words
};

/// Group signals, each zero-mean with unit scale:
///   Static    s0 (per-cell static latent)
///   HRRR      h1 + 0.5 (h2^2 - 1)
///   NWM       n1
///   ViirsRefl v
///   LST       l
/// FMC = base + seasonal sin(2 pi (doy - 80) / 365) + diurnal cos(2 pi (hour - 4) / 24)
///       + site effect + sum_g w_g f_g + noise, clipped to [0, 400].
/// Predictor columns are noisy affine images of their own group's latents only.
SynthOutput generate(const SynthConfig& cfg);

/// sites.csv, observations.csv, grid.csv and truth.txt under `dir`.
void write_synth(const std::filesystem::path& dir, const SynthOutput& out);

} // namespace fmc
