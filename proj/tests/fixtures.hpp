#pragma once

// Small table builders shared by the unit tests and the acceptance binary.

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "fmc/tabular.hpp"
#include "fmc/time.hpp"

namespace fmc::testing {

/// Schema columns whose group lies in `mask`, in schema order.
inline std::vector<ColumnSpec> schema_subset(const GroupMask& mask) {
  std::vector<ColumnSpec> out;
  for (const auto& c : default_schema()) {
    if (mask.contains(c.group)) out.push_back(c);
  }
  return out;
}

/// n rows over the given schema; `cell(row, col)` supplies each predictor and
/// `target(row)` the fmc. Sites cycle through `n_sites`, hours advance by one.
template <class CellFn, class TargetFn>
Dataset make_dataset(const std::vector<ColumnSpec>& schema, std::size_t n, CellFn cell,
                     TargetFn target, std::size_t n_sites = 1) {
  std::vector<std::string> sites;
  std::vector<UtcTime> times;
  std::vector<Column> cols(schema.size());
  Column fmc;
  const auto t0 = make_utc(2020, 1, 1);
  for (std::size_t i = 0; i < n; ++i) {
    sites.push_back("S" + std::to_string(i % n_sites));
    times.push_back(t0 + std::chrono::hours(static_cast<long>(i / n_sites)));
    for (std::size_t c = 0; c < schema.size(); ++c) {
      cols[c].push_back(cell(i, c));
    }
    fmc.push_back(target(i));
  }
  return Dataset(schema, std::move(sites), std::move(times), std::move(cols), std::move(fmc));
}

/// Complete table with standard normal predictors and target.
inline Dataset random_dataset(const std::vector<ColumnSpec>& schema, std::size_t n,
                              std::uint64_t seed, std::size_t n_sites = 1) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd;
  return make_dataset(
      schema, n, [&](std::size_t, std::size_t) -> std::optional<double> { return nd(rng); },
      [&](std::size_t) -> std::optional<double> { return 15.0 + 3.0 * nd(rng); }, n_sites);
}

} // namespace fmc::testing
