#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <limits>
#include <map>
#include <random>
#include <set>

#include "fmc/errors.hpp"
#include "fmc/ingestion.hpp"

using namespace fmc;

namespace {

GridField make_grid(std::string name, FeatureGroup g, std::size_t nr, std::size_t nc,
                    double fill = 0.0) {
  GridField f;
  f.name = std::move(name);
  f.group = g;
  f.grid_spacing = 375.0;
  f.origin_lat = 40.0;
  f.origin_lon = -105.0;
  f.nrows = nr;
  f.ncols = nc;
  f.values.assign(nr * nc, fill);
  f.valid.assign(nr * nc, 1);
  return f;
}

// Exhaustive scan; exact ties keep the first index.
std::size_t scan_nearest(const GridField& f, double lat, double lon) {
  std::size_t best = 0;
  double bd = std::numeric_limits<double>::infinity();
  for (std::size_t r = 0; r < f.nrows; ++r) {
    for (std::size_t c = 0; c < f.ncols; ++c) {
      const double d = great_circle_meters(lat, lon, f.cell_lat(r), f.cell_lon(c));
      if (d < bd) {
        bd = d;
        best = r * f.ncols + c;
      }
    }
  }
  return best;
}

SiteRecord rec(std::string id, double lat, double lon, UtcTime t) { return {std::move(id), lat, lon, t}; }

} // namespace

TEST(Qc, RangeIsInclusive) {
  EXPECT_TRUE(qc_range_check(12.5));
  EXPECT_TRUE(qc_range_check(0.0));
  EXPECT_TRUE(qc_range_check(400.0));
  EXPECT_FALSE(qc_range_check(400.01));
  EXPECT_FALSE(qc_range_check(-0.5));
  EXPECT_THROW(qc_range_check(std::numeric_limits<double>::quiet_NaN()), InvalidObservationError);
  EXPECT_THROW(qc_range_check(std::numeric_limits<double>::infinity()), InvalidObservationError);
}

TEST(Qc, ObservationFlagMatchesRange) {
  const auto t = make_utc(2020, 1, 1);
  EXPECT_TRUE(make_observation("A", t, 25.0).qc_pass);
  EXPECT_FALSE(make_observation("A", t, 401.0).qc_pass);
}

TEST(Dedupe, MostRecentLocationKept) {
  const auto r = dedupe_sites({rec("S", 40, -105, make_utc(2010, 1, 1)),
                               rec("S", 41, -105, make_utc(2011, 1, 1))});
  ASSERT_EQ(r.sites.size(), 1u);
  EXPECT_EQ(r.sites[0].lat, 41.0);
  ASSERT_EQ(r.changelog.size(), 1u);
  EXPECT_EQ(r.changelog[0].kind, ChangeKind::LocationChanged);
  EXPECT_EQ(r.changelog[0].history.size(), 2u);
}

TEST(Dedupe, OrderOfInputDoesNotMatter) {
  const auto r = dedupe_sites({rec("S", 41, -105, make_utc(2011, 1, 1)),
                               rec("S", 40, -105, make_utc(2010, 1, 1))});
  ASSERT_EQ(r.sites.size(), 1u);
  EXPECT_EQ(r.sites[0].lat, 41.0);
}

TEST(Dedupe, SingleRecordVerbatim) {
  const auto one = rec("Q", 39.5, -104.25, make_utc(2015, 6, 1));
  const auto r = dedupe_sites({one});
  ASSERT_EQ(r.sites.size(), 1u);
  EXPECT_EQ(r.sites[0].site_id, "Q");
  EXPECT_EQ(r.sites[0].lat, 39.5);
  EXPECT_EQ(r.sites[0].lon, -104.25);
  EXPECT_EQ(r.sites[0].reported_at, one.reported_at);
  EXPECT_TRUE(r.changelog.empty());
}

TEST(Dedupe, SameLocationTwiceIsNotAChange) {
  const auto r = dedupe_sites({rec("S", 40, -105, make_utc(2010, 1, 1)),
                               rec("S", 40, -105, make_utc(2012, 1, 1))});
  EXPECT_EQ(r.sites.size(), 1u);
  EXPECT_TRUE(r.changelog.empty());
}

TEST(Dedupe, RejectsAreLogged) {
  const auto r = dedupe_sites({rec("", 40, -105, make_utc(2010, 1, 1)),
                               rec("B", 95, -105, make_utc(2010, 1, 1)),
                               rec("C", 40, -105, make_utc(2010, 1, 1))});
  EXPECT_EQ(r.sites.size(), 1u);
  ASSERT_EQ(r.changelog.size(), 2u);
  EXPECT_EQ(r.changelog[0].kind, ChangeKind::MissingIdentifier);
  EXPECT_EQ(r.changelog[1].kind, ChangeKind::InvalidLocation);
}

TEST(Dedupe, PropertyUniqueIdsAndChangeCount) {
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<int> site(0, 14);
  std::uniform_int_distribution<int> loc(0, 2);
  std::uniform_int_distribution<int> day(0, 3000);
  for (int rep = 0; rep < 50; ++rep) {
    std::vector<SiteRecord> in;
    std::map<std::string, std::set<std::pair<double, double>>> locs;
    for (int i = 0; i < 40; ++i) {
      const std::string id = "S" + std::to_string(site(rng));
      const double lat = 40.0 + loc(rng);
      in.push_back(rec(id, lat, -105.0, make_utc(2000, 1, 1) + std::chrono::days(day(rng))));
      locs[id].insert({lat, -105.0});
    }
    const auto r = dedupe_sites(in);
    std::set<std::string> ids;
    for (const auto& s : r.sites) ids.insert(s.site_id);
    EXPECT_EQ(ids.size(), r.sites.size());
    EXPECT_EQ(ids.size(), locs.size());
    std::size_t moved = 0;
    for (const auto& [id, l] : locs) moved += l.size() >= 2;
    std::size_t logged = 0;
    for (const auto& e : r.changelog) logged += e.kind == ChangeKind::LocationChanged;
    EXPECT_EQ(logged, moved);
  }
}

TEST(NearestNeighbor, CellCentreReturnsThatCell) {
  auto f = make_grid("elevation", FeatureGroup::Static, 4, 5);
  for (std::size_t i = 0; i < f.values.size(); ++i) f.values[i] = static_cast<double>(i);
  EXPECT_EQ(*nearest_neighbor_sample(f, f.cell_lat(2), f.cell_lon(3)), 13.0);
  EXPECT_EQ(*nearest_neighbor_sample(f, f.cell_lat(0), f.cell_lon(0)), 0.0);
}

TEST(NearestNeighbor, EquidistantGoesToLowerIndex) {
  auto f = make_grid("elevation", FeatureGroup::Static, 3, 3);
  for (std::size_t i = 0; i < f.values.size(); ++i) f.values[i] = static_cast<double>(i);
  // Midway between columns 0 and 1 on row 1: equal distance by symmetry.
  const double lat = f.cell_lat(1);
  const double lon = 0.5 * (f.cell_lon(0) + f.cell_lon(1));
  const double d0 = great_circle_meters(lat, lon, f.cell_lat(1), f.cell_lon(0));
  const double d1 = great_circle_meters(lat, lon, f.cell_lat(1), f.cell_lon(1));
  ASSERT_NEAR(d0, d1, 1e-6);
  EXPECT_EQ(nearest_cell(f, lat, lon), 3u);
}

TEST(NearestNeighbor, InvalidCellGivesMissing) {
  auto f = make_grid("lst", FeatureGroup::LST, 2, 2, 300.0);
  f.valid[3] = 0;
  EXPECT_FALSE(nearest_neighbor_sample(f, f.cell_lat(1), f.cell_lon(1)).has_value());
  EXPECT_TRUE(nearest_neighbor_sample(f, f.cell_lat(0), f.cell_lon(1)).has_value());
}

TEST(NearestNeighbor, OutsideGridThrows) {
  const auto f = make_grid("elevation", FeatureGroup::Static, 3, 3);
  EXPECT_THROW(nearest_cell(f, 39.0, -105.0), OutOfDomainError);
  EXPECT_THROW(nearest_cell(f, 40.0, -104.0), OutOfDomainError);
}

TEST(NearestNeighbor, AgreesWithExhaustiveScan) {
  std::mt19937_64 rng(17);
  for (std::size_t n : {1u, 2u, 7u, 23u, 50u}) {
    auto f = make_grid("elevation", FeatureGroup::Static, n, n + 1);
    f.grid_spacing = n == 50 ? 2250.0 : 375.0;
    std::uniform_real_distribution<double> ur(-0.5, static_cast<double>(f.nrows) - 0.5);
    std::uniform_real_distribution<double> uc(-0.5, static_cast<double>(f.ncols) - 0.5);
    for (int k = 0; k < 400; ++k) {
      const double lat = f.origin_lat + ur(rng) * f.dlat();
      const double lon = f.origin_lon + uc(rng) * f.dlon();
      EXPECT_EQ(nearest_cell(f, lat, lon), scan_nearest(f, lat, lon)) << n << " " << k;
    }
  }
}

TEST(Coarsen, BlockAverageOfValidCells) {
  auto f = make_grid("sfc_rfl_m1", FeatureGroup::ViirsRefl, 3, 3);
  for (std::size_t i = 0; i < 9; ++i) f.values[i] = static_cast<double>(i + 1);
  f.valid[0] = 0;
  const auto c = coarsen(f, 2);
  ASSERT_EQ(c.nrows, 2u);
  ASSERT_EQ(c.ncols, 2u);
  EXPECT_DOUBLE_EQ(*c.at(0, 0), (2.0 + 4.0 + 5.0) / 3.0);
  EXPECT_DOUBLE_EQ(*c.at(0, 1), (3.0 + 6.0) / 2.0);
  EXPECT_DOUBLE_EQ(*c.at(1, 0), (7.0 + 8.0) / 2.0);
  EXPECT_DOUBLE_EQ(*c.at(1, 1), 9.0);
  EXPECT_EQ(c.grid_spacing, 750.0);

  auto dead = make_grid("sfc_rfl_m1", FeatureGroup::ViirsRefl, 2, 2);
  dead.valid.assign(4, 0);
  EXPECT_FALSE(coarsen(dead, 2).at(0, 0).has_value());
}

TEST(MonthlyInterpolation, AnchorsAndJanuary31) {
  std::array<double, 12> m{};
  for (std::size_t k = 0; k < 12; ++k) m[k] = 10.0 * static_cast<double>(k + 1);
  EXPECT_DOUBLE_EQ(interpolate_monthly(m, 15), 10.0);
  EXPECT_DOUBLE_EQ(interpolate_monthly(m, 46), 20.0);
  EXPECT_NEAR(interpolate_monthly(m, 31), 10.0 + 16.0 / 31.0 * 10.0, 1e-12);
  // Dec 15 anchor (day 349) to Jan 15 of the next year wraps over 31 days.
  EXPECT_DOUBLE_EQ(interpolate_monthly(m, 349), 120.0);
  EXPECT_NEAR(interpolate_monthly(m, 365), 120.0 + 16.0 / 31.0 * (10.0 - 120.0), 1e-12);
  EXPECT_NEAR(interpolate_monthly(m, 1), 120.0 + 17.0 / 31.0 * (10.0 - 120.0), 1e-12);
}

namespace {

// Every schema column on a 3x3 grid around the site. Retrieval fields exist
// only at 02 and 14 UTC of `day`; hourly fields exist at every hour.
std::vector<GridField> full_field_set(UtcTime day, bool retrieval_every_hour) {
  std::vector<GridField> out;
  double v = 1.0;
  for (const auto& c : default_schema()) {
    auto base = make_grid(c.name, c.group, 3, 3);
    switch (c.cadence) {
    case Cadence::Static:
      base.values.assign(9, v);
      out.push_back(base);
      break;
    case Cadence::Monthly:
      for (int m = 1; m <= 12; ++m) {
        auto f = base;
        f.month = m;
        f.values.assign(9, v * m);
        out.push_back(f);
      }
      break;
    case Cadence::Hourly:
    case Cadence::Retrieval:
      for (int h = 0; h < 24; ++h) {
        if (c.cadence == Cadence::Retrieval && !retrieval_every_hour && h != 2 && h != 14) continue;
        auto f = base;
        f.valid_time = day + std::chrono::hours(h);
        f.values.assign(9, v + 1000.0 * h);
        out.push_back(f);
      }
      break;
    }
    v += 1.0;
  }
  return out;
}

} // namespace

TEST(Pairing, OneSiteOneHourAllValid) {
  const auto day = make_utc(2020, 6, 10);
  const auto fields = full_field_set(day, true);
  const SiteRecord site{"A", 40.0 + 1 * 375.0 / 111195.0, -105.0, day};
  const auto ds = build_training_table({make_observation("A", day + std::chrono::hours(9), 12.0)},
                                       {site}, fields);
  ASSERT_EQ(ds.rows(), 1u);
  ASSERT_EQ(ds.columns(), 49u);
  for (std::size_t c = 0; c < ds.columns(); ++c) EXPECT_TRUE(ds.column(c).has(0)) << c;
  EXPECT_EQ(*ds.fmc()[0], 12.0);
}

TEST(Pairing, RetrievalOnlyAtTwoHoursLeavesThirteenMissing) {
  const auto day = make_utc(2020, 6, 10);
  const auto fields = full_field_set(day, false);
  const SiteRecord site{"A", 40.0, -105.0, day};
  const auto ds = build_training_table({make_observation("A", day + std::chrono::hours(9), 12.0),
                                        make_observation("A", day + std::chrono::hours(14), 13.0)},
                                       {site}, fields);
  ASSERT_EQ(ds.rows(), 2u);
  std::size_t missing9 = 0;
  std::size_t missing14 = 0;
  for (std::size_t c = 0; c < ds.columns(); ++c) {
    missing9 += !ds.column(c).has(0);
    missing14 += !ds.column(c).has(1);
    if (!ds.column(c).has(0)) {
      EXPECT_EQ(ds.schema()[c].cadence, Cadence::Retrieval);
    }
  }
  EXPECT_EQ(missing9, 13u);
  EXPECT_EQ(missing14, 0u);
}

TEST(Pairing, ValuesTraceToTheirSource) {
  const auto day = make_utc(2020, 1, 31);
  const auto fields = full_field_set(day, true);
  const SiteRecord site{"A", 40.0, -105.0, day};
  const auto ds = build_training_table({make_observation("A", day + std::chrono::minutes(5 * 60 + 40), 9.0)},
                                       {site}, fields);
  ASSERT_EQ(ds.rows(), 1u);
  EXPECT_EQ(ds.time(0), day + std::chrono::hours(6));
  const auto& s = ds.schema();
  for (std::size_t c = 0; c < s.size(); ++c) {
    const double v = static_cast<double>(c + 1);
    switch (s[c].cadence) {
    case Cadence::Static:
      EXPECT_EQ(*ds.value(0, c), v);
      break;
    case Cadence::Monthly:
      // Jan-31 between the Jan (v) and Feb (2v) anchors.
      EXPECT_NEAR(*ds.value(0, c), v + 16.0 / 31.0 * v, 1e-12);
      break;
    default:
      EXPECT_EQ(*ds.value(0, c), v + 6000.0);
    }
  }
}

TEST(Pairing, DropsQcFailuresUnknownSitesAndDuplicates) {
  const auto day = make_utc(2020, 6, 10);
  const auto fields = full_field_set(day, true);
  const SiteRecord site{"A", 40.0, -105.0, day};
  PairingStats st;
  const auto ds = build_training_table({make_observation("A", day + std::chrono::hours(3), 12.0),
                                        make_observation("A", day + std::chrono::minutes(3 * 60 + 10), 13.0),
                                        make_observation("A", day + std::chrono::hours(4), 500.0),
                                        make_observation("B", day + std::chrono::hours(4), 10.0)},
                                       {site}, fields, default_schema(), &st);
  EXPECT_EQ(ds.rows(), 1u);
  EXPECT_EQ(*ds.fmc()[0], 12.0);
  EXPECT_EQ(st.observations_used, 1u);
  EXPECT_EQ(st.dropped_duplicate, 1u);
  EXPECT_EQ(st.dropped_qc, 1u);
  EXPECT_EQ(st.dropped_unknown_site, 1u);
}

TEST(Pairing, SchemaMismatchThrows) {
  const auto day = make_utc(2020, 6, 10);
  const SiteRecord site{"A", 40.0, -105.0, day};
  auto bogus = make_grid("not_a_predictor", FeatureGroup::HRRR, 2, 2);
  bogus.valid_time = day;
  EXPECT_THROW(build_training_table({make_observation("A", day, 1.0)}, {site}, {bogus}), SchemaError);
  auto wrong_group = make_grid("lst", FeatureGroup::HRRR, 2, 2);
  wrong_group.valid_time = day;
  EXPECT_THROW(build_training_table({make_observation("A", day, 1.0)}, {site}, {wrong_group}),
               SchemaError);
}

TEST(IngestionIo, CsvRoundTrips) {
  const auto dir = std::filesystem::temp_directory_path() / "fmc_ingest_io";
  std::filesystem::create_directories(dir);
  const auto day = make_utc(2020, 6, 10);
  std::vector<SiteRecord> sites = {{"A", 40.125, -105.5, day}, {"B", 41.0, -104.0, day}};
  write_sites_csv(dir / "s.csv", sites);
  const auto s2 = read_sites_csv(dir / "s.csv");
  ASSERT_EQ(s2.size(), 2u);
  EXPECT_EQ(s2[1].site_id, "B");
  EXPECT_EQ(s2[0].lat, 40.125);

  std::vector<FmcObservation> obs = {make_observation("A", day, 11.25), make_observation("B", day, 450.0)};
  write_observations_csv(dir / "o.csv", obs);
  const auto o2 = read_observations_csv(dir / "o.csv");
  ASSERT_EQ(o2.size(), 2u);
  EXPECT_EQ(o2[0].fmc, 11.25);
  EXPECT_FALSE(o2[1].qc_pass);

  auto fields = full_field_set(day, false);
  fields[0].valid[4] = 0;
  write_grid_fields_csv(dir / "g.csv", fields);
  const auto f2 = read_grid_fields_csv(dir / "g.csv");
  ASSERT_EQ(f2.size(), fields.size());
  for (std::size_t i = 0; i < fields.size(); ++i) {
    EXPECT_EQ(f2[i].name, fields[i].name);
    EXPECT_EQ(f2[i].valid, fields[i].valid);
    EXPECT_EQ(f2[i].valid_time, fields[i].valid_time);
    EXPECT_EQ(f2[i].month, fields[i].month);
    for (std::size_t k = 0; k < fields[i].values.size(); ++k) {
      if (fields[i].valid[k]) {
        EXPECT_EQ(f2[i].values[k], fields[i].values[k]);
      }
    }
  }
  std::filesystem::remove_all(dir);
}
