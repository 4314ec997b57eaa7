#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <set>

#include "fmc/errors.hpp"
#include "fmc/hpo.hpp"

using namespace fmc;

namespace {

ParamSpace unit_space() { return ParamSpace{{Dimension::uniform("x", 0.0, 1.0)}}; }

Trial done(std::size_t id, double x, double obj) { return Trial{id, {x}, obj, TrialStatus::Complete}; }

std::optional<double> parabola(const Assignment& a) { return (a[0] - 0.3) * (a[0] - 0.3); }

} // namespace

TEST(Sampling, UniformMean) {
  const auto space = unit_space();
  std::mt19937_64 rng(1);
  double s = 0.0;
  for (int i = 0; i < 10000; ++i) s += sample_random(space, rng)[0];
  EXPECT_NEAR(s / 10000.0, 0.5, 0.02);
}

TEST(Sampling, LogUniformPassesKs) {
  const ParamSpace space{{Dimension::log_uniform("lr", 1e-4, 1e-1)}};
  std::mt19937_64 rng(2);
  std::vector<double> u;
  for (int i = 0; i < 5000; ++i) {
    const double v = sample_random(space, rng)[0];
    ASSERT_GE(v, 1e-4);
    ASSERT_LE(v, 1e-1);
    u.push_back((std::log10(v) + 4.0) / 3.0);
  }
  std::sort(u.begin(), u.end());
  double d = 0.0;
  const double n = static_cast<double>(u.size());
  for (std::size_t i = 0; i < u.size(); ++i) {
    d = std::max({d, static_cast<double>(i + 1) / n - u[i], u[i] - static_cast<double>(i) / n});
  }
  // 1% critical value 1.63 / sqrt(n).
  EXPECT_LT(d, 1.63 / std::sqrt(n));
}

TEST(Sampling, SingleCategoryAndIntegers) {
  const ParamSpace space{{Dimension::categorical("c", {"a"}), Dimension::integer("k", 2, 5)}};
  std::mt19937_64 rng(3);
  std::set<double> ks;
  for (int i = 0; i < 500; ++i) {
    const auto a = sample_random(space, rng);
    EXPECT_EQ(space.label(a, "c"), "a");
    EXPECT_EQ(a[1], std::round(a[1]));
    ks.insert(a[1]);
  }
  EXPECT_EQ(ks, (std::set<double>{2, 3, 4, 5}));
}

TEST(Space, Validation) {
  EXPECT_THROW((ParamSpace{{Dimension::uniform("x", 1.0, 1.0)}}.validate()), std::invalid_argument);
  EXPECT_THROW((ParamSpace{{Dimension::log_uniform("x", 0.0, 1.0)}}.validate()), std::invalid_argument);
  EXPECT_THROW((ParamSpace{{Dimension::categorical("x", {})}}.validate()), std::invalid_argument);
  EXPECT_THROW((ParamSpace{{Dimension::uniform("x", 0, 1), Dimension::uniform("x", 0, 1)}}.validate()),
               std::invalid_argument);
  EXPECT_NO_THROW(default_gbt_space().validate());
  EXPECT_NO_THROW(default_mlp_space().validate());
}

TEST(Tpe, ConcentratesNearGoodTrials) {
  TpeState st;
  std::mt19937_64 hr(4);
  std::normal_distribution<double> jitter(0.0, 0.01);
  for (std::size_t i = 0; i < 40; ++i) {
    const bool good = i % 4 == 0;
    st.history.push_back(done(i, (good ? 0.3 : 0.8) + jitter(hr), good ? 0.0 : 1.0));
  }
  std::mt19937_64 rng(5);
  int inside = 0;
  for (int i = 0; i < 1000; ++i) {
    const double x = tpe_suggest(st, unit_space(), rng)[0];
    inside += x >= 0.1 && x <= 0.5;
  }
  EXPECT_GE(inside, 950);
}

TEST(Tpe, CategoricalFollowsGoodFrequencies) {
  const ParamSpace space{{Dimension::categorical("c", {"a", "b"})}};
  TpeState st;
  std::size_t id = 0;
  // Good: a x9, b x1. Bad: evenly mixed.
  for (int i = 0; i < 9; ++i) st.history.push_back(Trial{id++, {0.0}, 0.0, TrialStatus::Complete});
  st.history.push_back(Trial{id++, {1.0}, 0.0, TrialStatus::Complete});
  for (int i = 0; i < 30; ++i) st.history.push_back(Trial{id++, {static_cast<double>(i % 2)}, 1.0, TrialStatus::Complete});
  std::mt19937_64 rng(6);
  int a = 0;
  for (int i = 0; i < 1000; ++i) a += tpe_suggest(st, space, rng)[0] == 0.0;
  EXPECT_GT(a, 500);
}

TEST(Tpe, DegenerateHistoryFallsBackToRandom) {
  TpeState st;
  for (std::size_t i = 0; i < 20; ++i) st.history.push_back(done(i, 0.5, 1.0));
  std::mt19937_64 a(7);
  std::mt19937_64 b(7);
  const auto space = unit_space();
  for (int i = 0; i < 20; ++i) EXPECT_EQ(tpe_suggest(st, space, a), sample_random(space, b));
}

TEST(Tpe, InsufficientHistory) {
  TpeState st;
  st.history.push_back(done(0, 0.5, 1.0));
  st.history.push_back(Trial{1, {0.2}, std::nan(""), TrialStatus::Failed});
  std::mt19937_64 rng(8);
  EXPECT_THROW(tpe_suggest(st, unit_space(), rng), InsufficientHistoryError);
}

TEST(Optimize, AllRandomWhenBudgetEqualsRandomTrials) {
  OptimizeOptions o;
  o.n_trials = 30;
  o.n_random = 30;
  o.seed = 9;
  OptimizeOptions p = o;
  p.n_random = 10;
  p.n_trials = 30;
  const auto a = optimize(parabola, unit_space(), o);
  const auto b = optimize(parabola, unit_space(), p);
  // Shared random prefix, then the two runs diverge.
  for (std::size_t i = 0; i < 10; ++i) EXPECT_EQ(a.history[i].params, b.history[i].params);
  bool differs = false;
  for (std::size_t i = 10; i < 30; ++i) differs |= a.history[i].params != b.history[i].params;
  EXPECT_TRUE(differs);
}

TEST(Optimize, DeterministicBoundedAndMonotoneBest) {
  const auto space = default_gbt_space();
  auto obj = [&](const Assignment& a) -> std::optional<double> {
    return std::abs(std::log10(space.value(a, "learning_rate")) + 1.0) + 0.01 * space.value(a, "max_depth");
  };
  OptimizeOptions o;
  o.n_trials = 60;
  o.n_random = 15;
  o.seed = 10;
  const auto r1 = optimize(obj, space, o);
  const auto r2 = optimize(obj, space, o);
  ASSERT_EQ(r1.history.size(), 60u);
  double best = INFINITY;
  for (std::size_t i = 0; i < r1.history.size(); ++i) {
    EXPECT_EQ(r1.history[i].params, r2.history[i].params);
    EXPECT_EQ(r1.history[i].id, i);
    for (std::size_t d = 0; d < space.dims.size(); ++d) EXPECT_TRUE(space.dims[d].contains(r1.history[i].params[d]));
    const double next = std::min(best, r1.history[i].objective);
    EXPECT_LE(next, best);
    best = next;
  }
  EXPECT_EQ(r1.best.objective, best);
}

TEST(Optimize, FailuresAreRecordedAndSkipped) {
  auto obj = [](const Assignment& a) -> std::optional<double> {
    if (a[0] < 0.5) return std::nullopt;
    if (a[0] < 0.6) throw TrainingDivergedError(3);
    return a[0];
  };
  OptimizeOptions o;
  o.n_trials = 40;
  o.n_random = 10;
  const auto r = optimize(obj, unit_space(), o);
  std::size_t failed = 0;
  for (const auto& t : r.history) {
    failed += t.status == TrialStatus::Failed;
    EXPECT_EQ(t.status == TrialStatus::Complete, std::isfinite(t.objective));
  }
  EXPECT_GT(failed, 0u);
  EXPECT_EQ(r.best.status, TrialStatus::Complete);
  EXPECT_GE(r.best.params[0], 0.6);
}

TEST(Optimize, AllFailedThrows) {
  OptimizeOptions o;
  o.n_trials = 5;
  o.n_random = 5;
  EXPECT_THROW(optimize([](const Assignment&) -> std::optional<double> { return std::nullopt; }, unit_space(), o),
               NoSuccessfulTrialError);
}

TEST(Optimize, FindsParabolaMinimum) {
  OptimizeOptions o;
  o.n_trials = 200;
  o.n_random = 100;
  o.seed = 11;
  const auto r = optimize(parabola, unit_space(), o);
  EXPECT_NEAR(r.best.params[0], 0.3, 0.05);
}

TEST(History, CsvRoundTripAndResume) {
  const auto space = default_mlp_space();
  auto obj = [&](const Assignment& a) -> std::optional<double> {
    if (space.label(a, "loss") == "MAE") return std::nullopt;
    return space.value(a, "learning_rate") * 1e3 + space.value(a, "width") * 1e-4;
  };
  OptimizeOptions o;
  o.n_trials = 12;
  o.n_random = 12;
  o.seed = 12;
  const auto r = optimize(obj, space, o);
  const auto path = std::filesystem::temp_directory_path() / "fmc_hist_rt.csv";
  write_history_csv(path, space, r.history);
  const auto back = read_history_csv(path, space);
  ASSERT_EQ(back.size(), r.history.size());
  for (std::size_t i = 0; i < back.size(); ++i) {
    EXPECT_EQ(back[i].id, r.history[i].id);
    EXPECT_EQ(back[i].status, r.history[i].status);
    for (std::size_t d = 0; d < space.dims.size(); ++d) {
      EXPECT_DOUBLE_EQ(back[i].params[d], r.history[i].params[d]);
    }
    if (back[i].status == TrialStatus::Complete) {
      EXPECT_DOUBLE_EQ(back[i].objective, r.history[i].objective);
    }
  }
  // Resuming continues the id sequence.
  OptimizeOptions more = o;
  more.n_trials = 20;
  more.resume = back;
  const auto cont = optimize(obj, space, more);
  ASSERT_EQ(cont.history.size(), 20u);
  for (std::size_t i = 0; i < 20; ++i) EXPECT_EQ(cont.history[i].id, i);
  std::filesystem::remove(path);
}

TEST(ApplyAssignment, CopiesIntoSpec) {
  const auto space = default_gbt_space();
  std::mt19937_64 rng(13);
  const auto a = sample_random(space, rng);
  const auto spec = apply_assignment(ModelSpec{}, space, a);
  EXPECT_DOUBLE_EQ(spec.gbt.learning_rate, space.value(a, "learning_rate"));
  EXPECT_EQ(spec.gbt.max_depth, static_cast<int>(space.value(a, "max_depth")));
  EXPECT_EQ(static_cast<double>(spec.gbt.n_estimators), space.value(a, "n_estimators"));
}
