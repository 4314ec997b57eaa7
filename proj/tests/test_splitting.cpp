#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <map>
#include <random>
#include <set>

#include "fixtures.hpp"
#include "fmc/errors.hpp"
#include "fmc/splitting.hpp"

using namespace fmc;
using fmc::testing::make_dataset;
using fmc::testing::schema_subset;

namespace {

// `sizes[s]` rows for site s; fmc uniform within a site-dependent range.
Dataset sites_fixture(const std::vector<std::size_t>& sizes, std::uint64_t seed) {
  const auto schema = schema_subset(GroupMask{FeatureGroup::NWM});
  std::vector<std::size_t> site_of;
  for (std::size_t s = 0; s < sizes.size(); ++s) site_of.insert(site_of.end(), sizes[s], s);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<std::string> sites;
  std::vector<UtcTime> times;
  std::vector<Column> cols(schema.size());
  Column fmc;
  for (std::size_t i = 0; i < site_of.size(); ++i) {
    sites.push_back("S" + std::to_string(site_of[i]));
    times.push_back(make_utc(2020, 1, 1) + std::chrono::hours(i));
    for (auto& c : cols) c.push_back(u(rng));
    fmc.push_back(5.0 + 3.0 * static_cast<double>(site_of[i] % 7) + 4.0 * u(rng));
  }
  return Dataset(schema, sites, times, cols, fmc);
}

std::set<std::string> sites_with(const Dataset& ds, const std::vector<SplitLabel>& labels,
                                 SplitLabel l) {
  std::set<std::string> out;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] == l) out.insert(ds.site(i));
  }
  return out;
}

bool disjoint(const std::set<std::string>& a, const std::set<std::string>& b) {
  for (const auto& x : a) {
    if (b.count(x)) return false;
  }
  return true;
}

Dataset uniform_rows(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 100.0);
  return make_dataset(
      schema_subset(GroupMask{FeatureGroup::NWM}), n,
      [&](std::size_t, std::size_t) -> std::optional<double> { return u(rng); },
      [&](std::size_t) -> std::optional<double> { return u(rng); }, 7);
}

} // namespace

TEST(RandomSplit, ThousandRowsCounts) {
  const auto ds = uniform_rows(1000, 1);
  const auto s = stratified_random_split(ds, kDefaultFractions, 42);
  ASSERT_EQ(s.labels.size(), 1000u);
  EXPECT_NEAR(static_cast<double>(s.count(SplitLabel::Train)), 800.0, 10.0);
  EXPECT_NEAR(static_cast<double>(s.count(SplitLabel::Val)), 100.0, 10.0);
  EXPECT_NEAR(static_cast<double>(s.count(SplitLabel::Test)), 100.0, 10.0);
  EXPECT_EQ(s.count(SplitLabel::Train) + s.count(SplitLabel::Val) + s.count(SplitLabel::Test), 1000u);
}

TEST(RandomSplit, EveryDecileBinIsStratified) {
  const auto ds = uniform_rows(1000, 2);
  const auto s = stratified_random_split(ds, kDefaultFractions, 9);
  // Oracle deciles by rank.
  std::vector<std::size_t> order(ds.rows());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(),
            [&](auto a, auto b) { return ds.fmc().values[a] < ds.fmc().values[b]; });
  for (std::size_t bin = 0; bin < 10; ++bin) {
    std::size_t test = 0;
    for (std::size_t k = bin * 100; k < (bin + 1) * 100; ++k) test += s.labels[order[k]] == SplitLabel::Test;
    EXPECT_GE(test, 5u) << bin;
    EXPECT_LE(test, 15u) << bin;
  }
}

TEST(RandomSplit, DeterministicAndSeedSensitive) {
  const auto ds = uniform_rows(500, 3);
  const auto a = stratified_random_split(ds, kDefaultFractions, 5);
  const auto b = stratified_random_split(ds, kDefaultFractions, 5);
  const auto c = stratified_random_split(ds, kDefaultFractions, 6);
  EXPECT_EQ(a.labels, b.labels);
  EXPECT_NE(a.labels, c.labels);
}

TEST(RandomSplit, FractionsWithinTwoPercentAcrossSizes) {
  for (std::size_t n : {1000u, 2345u, 10000u}) {
    const auto ds = uniform_rows(n, n);
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      const auto s = stratified_random_split(ds, kDefaultFractions, seed);
      for (std::size_t l = 0; l < 3; ++l) {
        const double frac = static_cast<double>(s.count(static_cast<SplitLabel>(l))) / static_cast<double>(n);
        EXPECT_NEAR(frac, kDefaultFractions[l], 0.02) << n << " " << l;
      }
    }
  }
}

TEST(RandomSplit, Errors) {
  EXPECT_THROW(stratified_random_split(uniform_rows(9, 1), kDefaultFractions, 0), TooSmallDatasetError);
  EXPECT_THROW(stratified_random_split(uniform_rows(100, 1), {0.5, 0.2, 0.2}, 0), std::invalid_argument);
}

TEST(SiteSplit, TenEqualSitesGiveEightOneOne) {
  const auto ds = sites_fixture(std::vector<std::size_t>(10, 50), 1);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto s = site_holdout_split(ds, kDefaultFractions, seed);
    EXPECT_EQ(sites_with(ds, s.labels, SplitLabel::Train).size(), 8u);
    EXPECT_EQ(sites_with(ds, s.labels, SplitLabel::Val).size(), 1u);
    EXPECT_EQ(sites_with(ds, s.labels, SplitLabel::Test).size(), 1u);
  }
}

TEST(SiteSplit, ThreeSitesEightyTenTenIsExact) {
  const auto ds = sites_fixture({80, 10, 10}, 2);
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto s = site_holdout_split(ds, kDefaultFractions, seed);
    EXPECT_EQ(s.count(SplitLabel::Train), 80u);
    EXPECT_EQ(s.count(SplitLabel::Val), 10u);
    EXPECT_EQ(s.count(SplitLabel::Test), 10u);
  }
}

TEST(SiteSplit, DisjointSitesOverManySeeds) {
  std::mt19937_64 rng(4);
  std::uniform_int_distribution<std::size_t> size(5, 60);
  std::vector<std::size_t> sizes(50);
  for (auto& s : sizes) s = size(rng);
  const auto ds = sites_fixture(sizes, 3);
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    const auto s = site_holdout_split(ds, kDefaultFractions, seed);
    const auto tr = sites_with(ds, s.labels, SplitLabel::Train);
    const auto va = sites_with(ds, s.labels, SplitLabel::Val);
    const auto te = sites_with(ds, s.labels, SplitLabel::Test);
    EXPECT_TRUE(disjoint(tr, va) && disjoint(tr, te) && disjoint(va, te));
    EXPECT_FALSE(va.empty());
    EXPECT_FALSE(te.empty());
    EXPECT_EQ(tr.size() + va.size() + te.size(), 50u);
  }
}

TEST(SiteSplit, TooFewSites) {
  EXPECT_THROW(site_holdout_split(sites_fixture({10, 10}, 1), kDefaultFractions, 0), TooSmallDatasetError);
}

TEST(Folds, FixedTestAndPartitionedPool) {
  for (auto strategy : {SplitStrategy::Random, SplitStrategy::Site}) {
    const auto ds = sites_fixture(std::vector<std::size_t>(30, 40), 5);
    const auto split = make_split(ds, strategy, kDefaultFractions, 11);
    const auto folds = make_folds(ds, split, 10, 12);
    ASSERT_EQ(folds.size(), 10u);
    const auto test = split.indices(SplitLabel::Test);
    std::set<std::size_t> pool;
    for (std::size_t i = 0; i < ds.rows(); ++i) {
      if (split.labels[i] != SplitLabel::Test) pool.insert(i);
    }
    for (std::size_t f = 0; f < folds.size(); ++f) {
      EXPECT_EQ(folds.indices(f, SplitLabel::Test), test);
      const auto tr = folds.indices(f, SplitLabel::Train);
      const auto va = folds.indices(f, SplitLabel::Val);
      std::set<std::size_t> uni(tr.begin(), tr.end());
      for (auto i : va) EXPECT_TRUE(uni.insert(i).second) << "row in train and val";
      EXPECT_EQ(uni, pool);
      const double ratio = static_cast<double>(tr.size()) / static_cast<double>(va.size());
      EXPECT_NEAR(ratio, 8.0, strategy == SplitStrategy::Random ? 0.3 : 3.0);
      if (strategy == SplitStrategy::Site) {
        EXPECT_TRUE(disjoint(sites_with(ds, folds.folds[f], SplitLabel::Train),
                             sites_with(ds, folds.folds[f], SplitLabel::Val)));
      }
    }
    // Folds are resamples, not copies of one another.
    EXPECT_NE(folds.folds[0], folds.folds[1]);
  }
}

TEST(Folds, CsvRoundTrip) {
  const auto ds = sites_fixture(std::vector<std::size_t>(12, 20), 6);
  const auto split = make_split(ds, SplitStrategy::Site, kDefaultFractions, 1);
  const auto folds = make_folds(ds, split, 4, 2);
  const auto path = std::filesystem::temp_directory_path() / "fmc_folds_rt.csv";
  write_folds_csv(path, folds);
  const auto back = read_folds_csv(path, SplitStrategy::Site, 1);
  EXPECT_EQ(back.test_indices(), folds.test_indices());
  EXPECT_EQ(back.folds, folds.folds);
  std::filesystem::remove(path);
}

TEST(Folds, Deterministic) {
  const auto ds = sites_fixture(std::vector<std::size_t>(20, 15), 7);
  for (auto strategy : {SplitStrategy::Random, SplitStrategy::Site}) {
    const auto a = make_folds(ds, make_split(ds, strategy, kDefaultFractions, 3), 10, 4);
    const auto b = make_folds(ds, make_split(ds, strategy, kDefaultFractions, 3), 10, 4);
    EXPECT_EQ(a.base.labels, b.base.labels);
    EXPECT_EQ(a.folds, b.folds);
  }
}

TEST(Seeds, DerivedStreamsDiffer) {
  std::set<std::uint64_t> seen;
  for (std::uint64_t s = 0; s < 100; ++s) seen.insert(derive_seed(7, s));
  EXPECT_EQ(seen.size(), 100u);
  EXPECT_EQ(derive_seed(1, 2), derive_seed(1, 2));
}
