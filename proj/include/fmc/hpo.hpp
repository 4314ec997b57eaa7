#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "fmc/models.hpp"

namespace fmc {

struct Dimension {
  enum class Kind { Uniform, LogUniform, Integer, Categorical };

  std::string name;
  Kind kind = Kind::Uniform;
  double lo = 0.0;
  double hi = 1.0;
  std::vector<std::string> options; ///< categorical only

  static Dimension uniform(std::string name, double lo, double hi);
  static Dimension log_uniform(std::string name, double lo, double hi);
  static Dimension integer(std::string name, long long lo, long long hi);
  static Dimension categorical(std::string name, std::vector<std::string> options);

  bool contains(double value) const;
};

/// One value per dimension, in space order. Categorical values are option indices.
using Assignment = std::vector<double>;

struct ParamSpace {
  std::vector<Dimension> dims;

  /// Throws std::invalid_argument unless lo < hi (lo > 0 for log-uniform),
  /// options are non-empty and names are unique.
  void validate() const;
  std::size_t index(std::string_view name) const;
  double value(const Assignment& a, std::string_view name) const;
  const std::string& label(const Assignment& a, std::string_view name) const;
  /// Human-readable value: option label for categoricals, number otherwise.
  std::string format(const Assignment& a, std::size_t dim) const;
  double parse(std::size_t dim, std::string_view text) const;
};

enum class TrialStatus { Complete, Failed };

struct Trial {
  std::size_t id = 0;
  Assignment params;
  double objective = 0.0; ///< finite iff Complete
  TrialStatus status = TrialStatus::Failed;
};

struct TpeState {
  std::vector<Trial> history; ///< sorted by id
  double gamma_q = 0.25;
  std::size_t n_candidates = 24;
};

Assignment sample_random(const ParamSpace& space, std::mt19937_64& rng);

/// Tree-structured Parzen suggestion. Complete trials are split at the gamma_q
/// quantile of their objectives; each dimension draws n_candidates from the
/// good-set density and keeps the one maximizing good/bad density ratio.
/// Falls back to random sampling when every objective is equal.
/// Throws InsufficientHistoryError with fewer than 2 complete trials.
Assignment tpe_suggest(const TpeState& state, const ParamSpace& space, std::mt19937_64& rng);

/// Objective result; nullopt (or a thrown fmc::Error, or a non-finite value) marks failure.
using ObjectiveFn = std::function<std::optional<double>(const Assignment&)>;

struct OptimizeOptions {
  std::size_t n_trials = 1000;
  std::size_t n_random = 100;
  std::uint64_t seed = 0;
  double gamma_q = 0.25;
  std::size_t n_candidates = 24;
  std::vector<Trial> resume; ///< earlier history to continue from
  /// Called after every trial with the full history so far.
  std::function<void(const std::vector<Trial>&)> on_trial;
};

struct OptimizeResult {
  Trial best;
  std::vector<Trial> history;
};

/// The first n_random trials sample randomly, the rest use TPE. Trial i draws
/// from its own seed stream, so runs with equal seeds share their random prefix.
OptimizeResult optimize(const ObjectiveFn& objective, const ParamSpace& space,
                        const OptimizeOptions& options);

/// Index of the lowest-objective complete trial (lowest id on ties).
std::optional<std::size_t> best_trial(const std::vector<Trial>& history);

void write_history_csv(const std::filesystem::path& path, const ParamSpace& space,
                       const std::vector<Trial>& history);
std::vector<Trial> read_history_csv(const std::filesystem::path& path, const ParamSpace& space);

ParamSpace default_gbt_space();
ParamSpace default_mlp_space();

/// Copies the assignment's values into the matching fields of `spec`.
ModelSpec apply_assignment(const ModelSpec& spec, const ParamSpace& space, const Assignment& a);

} // namespace fmc
