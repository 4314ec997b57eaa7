#include "fmc/splitting.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <random>

#include "fmc/csv.hpp"
#include "fmc/errors.hpp"

namespace fmc {

std::string_view to_string(SplitLabel l) {
  switch (l) {
  case SplitLabel::Train:
    return "train";
  case SplitLabel::Val:
    return "val";
  case SplitLabel::Test:
    return "test";
  }
  return "?";
}

std::string_view to_string(SplitStrategy s) { return s == SplitStrategy::Random ? "random" : "site"; }

SplitLabel parse_split_label(std::string_view s) {
  if (s == "train") return SplitLabel::Train;
  if (s == "val") return SplitLabel::Val;
  if (s == "test") return SplitLabel::Test;
  throw ParseError("unknown split label: " + std::string(s));
}

SplitStrategy parse_split_strategy(std::string_view s) {
  if (s == "random") return SplitStrategy::Random;
  if (s == "site") return SplitStrategy::Site;
  throw std::invalid_argument("unknown split strategy: " + std::string(s));
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ull * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

std::vector<std::size_t> SplitAssignment::indices(SplitLabel l) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] == l) out.push_back(i);
  }
  return out;
}

std::size_t SplitAssignment::count(SplitLabel l) const {
  return static_cast<std::size_t>(std::count(labels.begin(), labels.end(), l));
}

std::vector<std::size_t> FoldSet::indices(std::size_t fold, SplitLabel l) const {
  std::vector<std::size_t> out;
  const auto& labels = folds.at(fold);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] == l) out.push_back(i);
  }
  return out;
}

namespace {

void check_fractions(const SplitFractions& fracs) {
  double sum = 0.0;
  for (double f : fracs) {
    if (!(f >= 0.0)) throw std::invalid_argument("split fractions must be non-negative");
    sum += f;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw std::invalid_argument("split fractions must sum to 1");
}

double fmc_at(const Dataset& ds, std::size_t row) {
  const auto v = ds.fmc()[row];
  if (!v) throw EmptyDatasetError("split requires fmc on every row");
  return *v;
}

/// Labels `rows` (indices into ds) stratified on fmc deciles.
void stratified_assign(const Dataset& ds, std::vector<std::size_t> rows,
                       const SplitFractions& fracs, std::mt19937_64& rng,
                       std::vector<SplitLabel>& labels) {
  if (rows.size() < kStratificationBins) {
    throw TooSmallDatasetError("need at least " + std::to_string(kStratificationBins) +
                               " rows to stratify, have " + std::to_string(rows.size()));
  }
  std::vector<double> fmc(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) fmc[i] = fmc_at(ds, rows[i]);
  std::vector<std::size_t> order(rows.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return fmc[a] < fmc[b]; });
  const std::size_t n = rows.size();
  for (std::size_t b = 0; b < kStratificationBins; ++b) {
    const std::size_t lo = b * n / kStratificationBins;
    const std::size_t hi = (b + 1) * n / kStratificationBins;
    std::vector<std::size_t> bin;
    for (std::size_t i = lo; i < hi; ++i) bin.push_back(rows[order[i]]);
    std::shuffle(bin.begin(), bin.end(), rng);
    const double m = static_cast<double>(bin.size());
    const auto n_train = static_cast<std::size_t>(std::llround(fracs[0] * m));
    const auto n_val =
        std::min(bin.size() - n_train, static_cast<std::size_t>(std::llround(fracs[1] * m)));
    for (std::size_t i = 0; i < bin.size(); ++i) {
      labels[bin[i]] = i < n_train ? SplitLabel::Train
                                   : (i < n_train + n_val ? SplitLabel::Val : SplitLabel::Test);
    }
  }
}

struct SiteInfo {
  std::string id;
  std::vector<std::size_t> rows;
  double median = 0.0;
};

std::vector<SiteInfo> collect_sites(const Dataset& ds, const std::vector<std::size_t>& rows) {
  std::map<std::string, std::vector<std::size_t>> by_site;
  for (auto r : rows) by_site[ds.site(r)].push_back(r);
  std::vector<SiteInfo> sites;
  for (auto& [id, site_rows] : by_site) {
    std::vector<double> v;
    for (auto r : site_rows) v.push_back(fmc_at(ds, r));
    std::sort(v.begin(), v.end());
    const auto m = v.size();
    const double median = m % 2 ? v[m / 2] : 0.5 * (v[m / 2 - 1] + v[m / 2]);
    sites.push_back({id, std::move(site_rows), median});
  }
  return sites;
}

/// Greedy site packing over `n_labels` labels (the first n_labels of fracs).
void site_assign(std::vector<SiteInfo> sites, const SplitFractions& fracs, std::size_t n_labels,
                 std::mt19937_64& rng, std::vector<SplitLabel>& labels) {
  // Strata: sites sorted by median, cut into up to 10 equal-count bins.
  std::stable_sort(sites.begin(), sites.end(),
                   [](const SiteInfo& a, const SiteInfo& b) { return a.median < b.median; });
  const std::size_t n_sites = sites.size();
  const std::size_t n_strata = std::min(kStratificationBins, n_sites);
  std::vector<std::vector<std::size_t>> strata(n_strata);
  for (std::size_t i = 0; i < n_sites; ++i) strata[i * n_strata / n_sites].push_back(i);
  for (auto& s : strata) std::shuffle(s.begin(), s.end(), rng);

  // Round-robin over strata so each label sees the whole FMC range.
  // Strata are visited in a fresh random order each round.
  std::vector<std::size_t> order;
  std::vector<std::size_t> visit(n_strata);
  std::iota(visit.begin(), visit.end(), std::size_t{0});
  for (std::size_t round = 0; order.size() < n_sites; ++round) {
    std::shuffle(visit.begin(), visit.end(), rng);
    for (auto s : visit) {
      if (round < strata[s].size()) order.push_back(strata[s][round]);
    }
  }
  // Larger sites first, by order of magnitude, so small sites can fill the gaps.
  auto size_class = [&](std::size_t i) {
    return static_cast<int>(std::floor(std::log2(static_cast<double>(sites[i].rows.size()))));
  };
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return size_class(a) > size_class(b); });

  double total = 0.0;
  for (const auto& s : sites) total += static_cast<double>(s.rows.size());
  std::vector<double> assigned(n_labels, 0.0);
  std::vector<std::vector<std::size_t>> members(n_labels);
  for (auto i : order) {
    std::size_t best = 0;
    double best_deficit = -std::numeric_limits<double>::infinity();
    for (std::size_t l = 0; l < n_labels; ++l) {
      const double deficit = fracs[l] - assigned[l] / total;
      if (deficit > best_deficit) {
        best_deficit = deficit;
        best = l;
      }
    }
    assigned[best] += static_cast<double>(sites[i].rows.size());
    members[best].push_back(i);
  }
  // Every label with a positive target gets at least one site.
  for (std::size_t l = 0; l < n_labels; ++l) {
    if (!members[l].empty() || fracs[l] <= 0.0) continue;
    std::size_t donor = n_labels;
    for (std::size_t d = 0; d < n_labels; ++d) {
      if (members[d].size() >= 2 && (donor == n_labels || members[d].size() > members[donor].size()))
        donor = d;
    }
    if (donor == n_labels) break;
    auto smallest = std::min_element(members[donor].begin(), members[donor].end(),
                                     [&](std::size_t a, std::size_t b) {
                                       return sites[a].rows.size() < sites[b].rows.size();
                                     });
    members[l].push_back(*smallest);
    members[donor].erase(smallest);
  }
  for (std::size_t l = 0; l < n_labels; ++l) {
    for (auto i : members[l]) {
      for (auto r : sites[i].rows) labels[r] = static_cast<SplitLabel>(l);
    }
  }
}

} // namespace

SplitAssignment stratified_random_split(const Dataset& ds, const SplitFractions& fracs,
                                        std::uint64_t seed) {
  check_fractions(fracs);
  if (ds.rows() == 0) throw EmptyDatasetError("cannot split an empty dataset");
  SplitAssignment out;
  out.strategy = SplitStrategy::Random;
  out.seed = seed;
  out.labels.assign(ds.rows(), SplitLabel::Train);
  std::mt19937_64 rng(seed);
  std::vector<std::size_t> rows(ds.rows());
  std::iota(rows.begin(), rows.end(), 0);
  stratified_assign(ds, std::move(rows), fracs, rng, out.labels);
  return out;
}

SplitAssignment site_holdout_split(const Dataset& ds, const SplitFractions& fracs,
                                   std::uint64_t seed) {
  check_fractions(fracs);
  std::vector<std::size_t> rows(ds.rows());
  std::iota(rows.begin(), rows.end(), 0);
  auto sites = collect_sites(ds, rows);
  if (sites.size() < 3) {
    throw TooSmallDatasetError("site holdout needs at least 3 sites, have " +
                               std::to_string(sites.size()));
  }
  SplitAssignment out;
  out.strategy = SplitStrategy::Site;
  out.seed = seed;
  out.labels.assign(ds.rows(), SplitLabel::Train);
  std::mt19937_64 rng(seed);
  site_assign(std::move(sites), fracs, 3, rng, out.labels);
  return out;
}

SplitAssignment make_split(const Dataset& ds, SplitStrategy strategy, const SplitFractions& fracs,
                           std::uint64_t seed) {
  return strategy == SplitStrategy::Random ? stratified_random_split(ds, fracs, seed)
                                           : site_holdout_split(ds, fracs, seed);
}

FoldSet make_folds(const Dataset& ds, const SplitAssignment& split, std::size_t k,
                   std::uint64_t seed) {
  if (split.labels.size() != ds.rows()) throw AlignmentError("split does not match dataset rows");
  if (k == 0) throw std::invalid_argument("make_folds: k must be positive");
  FoldSet out;
  out.base = split;
  std::vector<std::size_t> pool;
  for (std::size_t i = 0; i < ds.rows(); ++i) {
    if (split.labels[i] != SplitLabel::Test) pool.push_back(i);
  }
  const SplitFractions inner = {8.0 / 9.0, 1.0 / 9.0, 0.0};
  for (std::size_t f = 0; f < k; ++f) {
    std::vector<SplitLabel> labels = split.labels;
    std::mt19937_64 rng(derive_seed(seed, f));
    if (split.strategy == SplitStrategy::Random) {
      if (pool.size() < kStratificationBins) {
        throw TooSmallDatasetError("non-test pool too small for folds");
      }
      stratified_assign(ds, pool, inner, rng, labels);
    } else {
      auto sites = collect_sites(ds, pool);
      if (sites.size() < 2) throw TooSmallDatasetError("non-test pool needs at least 2 sites");
      site_assign(std::move(sites), inner, 2, rng, labels);
    }
    out.folds.push_back(std::move(labels));
  }
  return out;
}

void write_folds_csv(const std::filesystem::path& path, const FoldSet& folds) {
  csv::Writer w(path);
  w.row({"row_index", "fold", "label"});
  for (std::size_t f = 0; f < folds.size(); ++f) {
    for (std::size_t i = 0; i < folds.folds[f].size(); ++i) {
      w.field(i).field(f).field(to_string(folds.folds[f][i]));
      w.end_row();
    }
  }
}

FoldSet read_folds_csv(const std::filesystem::path& path, SplitStrategy strategy,
                       std::uint64_t seed) {
  csv::Reader reader(path);
  const auto ci = reader.column("row_index");
  const auto cf = reader.column("fold");
  const auto cl = reader.column("label");
  FoldSet out;
  std::vector<std::string_view> f;
  while (reader.next(f)) {
    const auto fold = static_cast<std::size_t>(csv::parse_int(f.at(cf)));
    const auto row = static_cast<std::size_t>(csv::parse_int(f.at(ci)));
    if (fold >= out.folds.size()) out.folds.resize(fold + 1);
    auto& labels = out.folds[fold];
    if (row >= labels.size()) labels.resize(row + 1, SplitLabel::Train);
    labels[row] = parse_split_label(f.at(cl));
  }
  if (out.folds.empty()) throw ParseError("no folds in " + path.string());
  out.base.strategy = strategy;
  out.base.seed = seed;
  out.base.labels = out.folds.front();
  for (auto& l : out.base.labels) {
    if (l != SplitLabel::Test) l = SplitLabel::Train;
  }
  return out;
}

} // namespace fmc
