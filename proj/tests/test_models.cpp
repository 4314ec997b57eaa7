#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <random>

#include "fixtures.hpp"
#include "fmc/errors.hpp"
#include "fmc/models.hpp"

using namespace fmc;
using fmc::testing::random_dataset;
using fmc::testing::schema_subset;

namespace {

void linear_data(std::size_t n, std::size_t p, std::uint64_t seed, Eigen::MatrixXd& x, Eigen::VectorXd& y) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd;
  x.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(p));
  y.resize(static_cast<Eigen::Index>(n));
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = nd(rng);
  for (Eigen::Index i = 0; i < y.size(); ++i) y(i) = x.row(i).sum() + 0.1 * nd(rng);
}

ModelSpec small_spec(ModelKind kind) {
  ModelSpec s;
  s.kind = kind;
  s.gbt.n_estimators = 20;
  s.gbt.max_depth = 3;
  s.mlp_arch.hidden_layers = 1;
  s.mlp_arch.width = 8;
  s.mlp_train.max_epochs = 10;
  s.mlp_train.batch_size = 32;
  return s;
}

ModelBundle bundle_for(const Dataset& ds, const AnyModel& m) {
  ModelBundle b{m, {}, ds.column_names(), GroupMask::all(), 0};
  auto cols = ds.column_names();
  cols.emplace_back(kTargetColumn);
  b.scaling = fit_standardizer(ds, cols);
  b.schema_hash = schema_hash(b.features);
  return b;
}

} // namespace

TEST(Models, ParseKind) {
  EXPECT_EQ(parse_model_kind("lr"), ModelKind::LR);
  EXPECT_EQ(parse_model_kind("GBT"), ModelKind::GBT);
  EXPECT_EQ(parse_model_kind("Mlp"), ModelKind::MLP);
  EXPECT_THROW(parse_model_kind("svm"), std::invalid_argument);
  for (auto k : {ModelKind::LR, ModelKind::GBT, ModelKind::MLP}) EXPECT_EQ(parse_model_kind(to_string(k)), k);
}

TEST(Models, SharedPredictContract) {
  Eigen::MatrixXd x, xv;
  Eigen::VectorXd y, yv;
  linear_data(200, 4, 1, x, y);
  linear_data(40, 4, 2, xv, yv);
  for (auto k : {ModelKind::LR, ModelKind::GBT, ModelKind::MLP}) {
    const auto m = fit_model(small_spec(k), x, y, xv, yv, 3);
    EXPECT_EQ(kind_of(m), k);
    const auto f = predict(m, xv);
    ASSERT_EQ(f.size(), xv.rows());
    EXPECT_TRUE(f.allFinite());
    EXPECT_EQ(predict(m, xv.topRows(0)).size(), 0);
  }
}

TEST(Models, SerializeRoundTripPreservesPredictions) {
  const auto ds = random_dataset(schema_subset(GroupMask{FeatureGroup::NWM, FeatureGroup::LST}), 120, 4);
  const auto std_ds = standardize(ds, bundle_for(ds, LinearModel{}).scaling);
  const Eigen::MatrixXd x = std_ds.predictor_matrix();
  const Eigen::VectorXd y = std_ds.target();
  for (auto k : {ModelKind::LR, ModelKind::GBT, ModelKind::MLP}) {
    const auto b = bundle_for(ds, fit_model(small_spec(k), x, y, x, y, 5));
    const auto text = serialize_model(b);
    const auto back = deserialize_model(text);
    EXPECT_EQ(kind_of(back.model), k);
    EXPECT_EQ(back.features, b.features);
    EXPECT_EQ(back.schema_hash, b.schema_hash);
    EXPECT_EQ(back.mask, b.mask);
    EXPECT_EQ(predict_dataset(back, ds), predict_dataset(b, ds)) << to_string(k);
    EXPECT_EQ(serialize_model(back), text);
  }
}

TEST(Models, SaveLoadFile) {
  const auto ds = random_dataset(schema_subset(GroupMask{FeatureGroup::NWM}), 50, 6);
  Eigen::MatrixXd x = standardize(ds, bundle_for(ds, LinearModel{}).scaling).predictor_matrix();
  const auto b = bundle_for(ds, fit_model(small_spec(ModelKind::GBT), x, ds.target(), x, ds.target(), 1));
  const auto path = std::filesystem::temp_directory_path() / "fmc_model_rt.txt";
  save_model(path, b);
  EXPECT_EQ(predict_dataset(load_model(path), ds), predict_dataset(b, ds));
  std::filesystem::remove(path);
}

TEST(Models, PredictDatasetInvertsScaling) {
  // Identity regression on standardized data: fmc = 2 * lst + 7.
  const auto schema = schema_subset(GroupMask{FeatureGroup::LST});
  std::mt19937_64 rng(7);
  std::normal_distribution<double> nd(300.0, 10.0);
  std::vector<double> lst(100);
  for (auto& v : lst) v = nd(rng);
  const auto ds = fmc::testing::make_dataset(
      schema, 100, [&](std::size_t i, std::size_t) -> std::optional<double> { return lst[i]; },
      [&](std::size_t i) -> std::optional<double> { return 2.0 * lst[i] + 7.0; });
  auto b = bundle_for(ds, LinearModel{});
  const auto sds = standardize(ds, b.scaling);
  b.model = fit_model(small_spec(ModelKind::LR), sds.predictor_matrix(), sds.target(),
                      sds.predictor_matrix(), sds.target(), 0);
  const auto f = predict_dataset(b, ds);
  for (std::size_t i = 0; i < 100; ++i) EXPECT_NEAR(f(static_cast<Eigen::Index>(i)), 2.0 * lst[i] + 7.0, 1e-6);
}

TEST(Models, SchemaChecks) {
  const auto ds = random_dataset(schema_subset(GroupMask{FeatureGroup::NWM}), 30, 8);
  auto b = bundle_for(ds, LinearModel{Eigen::VectorXd::Zero(2), 0.0});
  const auto other = random_dataset(schema_subset(GroupMask{FeatureGroup::LST}), 30, 9);
  EXPECT_THROW(predict_dataset(b, other), SchemaError);
  b.schema_hash ^= 1;
  EXPECT_THROW(predict_dataset(b, ds), SchemaError);
}

TEST(Models, MalformedTextIsParseError) {
  EXPECT_THROW(deserialize_model("not a model"), ParseError);
  EXPECT_THROW(deserialize_model("{}"), ParseError);
}
