#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "fmc/tabular.hpp"

namespace fmc {

enum class SplitLabel : std::uint8_t { Train = 0, Val = 1, Test = 2 };
enum class SplitStrategy : std::uint8_t { Random, Site };

std::string_view to_string(SplitLabel l);
std::string_view to_string(SplitStrategy s);
SplitLabel parse_split_label(std::string_view s);
SplitStrategy parse_split_strategy(std::string_view s);

using SplitFractions = std::array<double, 3>;
inline constexpr SplitFractions kDefaultFractions = {0.8, 0.1, 0.1};
inline constexpr std::size_t kStratificationBins = 10;

struct SplitAssignment {
  std::vector<SplitLabel> labels; ///< one per dataset row
  SplitStrategy strategy = SplitStrategy::Random;
  std::uint64_t seed = 0;

  std::vector<std::size_t> indices(SplitLabel l) const;
  std::size_t count(SplitLabel l) const;
};

/// Rows binned into FMC deciles; every bin is shuffled and cut by `fracs`.
SplitAssignment stratified_random_split(const Dataset& ds, const SplitFractions& fracs,
                                        std::uint64_t seed);

/// Whole sites go to one label. Sites are stratified on their median FMC,
/// shuffled within strata, then greedily given to the label furthest below
/// its target row fraction.
SplitAssignment site_holdout_split(const Dataset& ds, const SplitFractions& fracs,
                                   std::uint64_t seed);

SplitAssignment make_split(const Dataset& ds, SplitStrategy strategy, const SplitFractions& fracs,
                           std::uint64_t seed);

/// A fixed test set plus k train/val reshuffles of the remaining rows.
struct FoldSet {
  SplitAssignment base;
  std::vector<std::vector<SplitLabel>> folds;

  std::size_t size() const noexcept { return folds.size(); }
  std::vector<std::size_t> test_indices() const { return base.indices(SplitLabel::Test); }
  std::vector<std::size_t> indices(std::size_t fold, SplitLabel l) const;
};

/// Re-partitions the non-test rows k times at 8:1, at site granularity for the
/// Site strategy.
FoldSet make_folds(const Dataset& ds, const SplitAssignment& split, std::size_t k,
                   std::uint64_t seed);

void write_folds_csv(const std::filesystem::path& path, const FoldSet& folds);
FoldSet read_folds_csv(const std::filesystem::path& path, SplitStrategy strategy, std::uint64_t seed);

/// splitmix64 step, used to derive independent child seeds.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

} // namespace fmc
