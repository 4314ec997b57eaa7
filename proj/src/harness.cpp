#include "fmc/harness.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <json.hpp>

#include "fmc/csv.hpp"
#include "fmc/errors.hpp"

namespace fmc {

std::vector<GroupMask> enumerate_group_masks() {
  std::vector<GroupMask> out;
  for (unsigned m = 1; m < (1u << kGroupCount); ++m) {
    GroupMask mask;
    for (std::size_t i = 0; i < kGroupCount; ++i)
      if (m & (1u << i)) mask = mask.with(kAllGroups[i]);
    out.push_back(mask);
  }
  return out;
}

ModelSpec default_model_spec(ModelKind kind) {
  ModelSpec s;
  s.kind = kind;
  s.gbt.learning_rate = 0.1;
  s.gbt.n_estimators = 100;
  s.gbt.max_depth = 6;
  s.mlp_arch.hidden_layers = 2;
  s.mlp_arch.width = 64;
  s.mlp_arch.dropout = 0.0;
  s.mlp_train.loss = LossKind::MSE;
  s.mlp_train.learning_rate = 1e-3;
  s.mlp_train.batch_size = 128;
  s.mlp_train.max_epochs = 60;
  s.mlp_train.plateau_patience = 4;
  s.mlp_train.early_stop_patience = 10;
  return s;
}

namespace {

Eigen::MatrixXd design(const Dataset& ds, std::span<const std::size_t> rows,
                       const std::vector<std::string>& features, const StandardizerParams& params) {
  Eigen::MatrixXd x(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(features.size()));
  for (std::size_t j = 0; j < features.size(); ++j) {
    const auto& col = ds.column(ds.column_index(features[j]));
    const auto& sc = params.at(features[j]);
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (!col.has(rows[i])) throw EmptyDatasetError("missing predictor '" + features[j] + "'");
      x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = (col.values[rows[i]] - sc.mean) / sc.std;
    }
  }
  return x;
}

Eigen::VectorXd target(const Dataset& ds, std::span<const std::size_t> rows, const StandardizerParams* params) {
  Eigen::VectorXd y(static_cast<Eigen::Index>(rows.size()));
  const auto& col = ds.fmc();
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (!col.has(rows[i])) throw EmptyDatasetError("missing fmc");
    y(static_cast<Eigen::Index>(i)) = col.values[rows[i]];
  }
  if (params) {
    const auto& sc = params->at(kTargetColumn);
    y = (y.array() - sc.mean) / sc.std;
  }
  return y;
}

Eigen::VectorXd predict_rows(const ModelBundle& b, const Dataset& ds, std::span<const std::size_t> rows) {
  const Eigen::MatrixXd x = design(ds, rows, b.features, b.scaling);
  return inverse_standardize(predict(b.model, x), b.scaling, kTargetColumn);
}

MetricReport metrics_on(const Dataset& ds, std::span<const std::size_t> rows, const Eigen::VectorXd& f) {
  const Eigen::VectorXd y = target(ds, rows, nullptr);
  return compute_metrics(std::span<const double>(y.data(), static_cast<std::size_t>(y.size())),
                         std::span<const double>(f.data(), static_cast<std::size_t>(f.size())));
}

SummaryStat summarize(const std::vector<double>& v) {
  SummaryStat s;
  if (v.empty()) return s;
  for (double x : v) s.mean += x;
  s.mean /= static_cast<double>(v.size());
  if (v.size() > 1) {
    double ss = 0.0;
    for (double x : v) ss += (x - s.mean) * (x - s.mean);
    s.std = std::sqrt(ss / static_cast<double>(v.size() - 1));
  }
  return s;
}

FoldSet draw_folds(const Dataset& ds, SplitStrategy strategy, const CvOptions& o) {
  if (o.fold_set) {
    if (o.fold_set->base.labels.size() != ds.rows())
      throw AlignmentError("persisted folds do not match the dataset rows");
    return *o.fold_set;
  }
  const auto split = make_split(ds, strategy, o.fractions, o.seed);
  return make_folds(ds, split, o.folds, derive_seed(o.seed, 1));
}

} // namespace

ModelBundle train_on_rows(const Dataset& ds, const ModelSpec& spec, const GroupMask& mask,
                          std::span<const std::size_t> train, std::span<const std::size_t> val,
                          std::uint64_t seed) {
  if (train.size() < 2) throw TooSmallDatasetError("need at least 2 training rows");
  std::vector<std::string> features;
  for (std::size_t c = 0; c < ds.columns(); ++c) {
    const auto& col = ds.column(c);
    bool varies = false;
    for (std::size_t i = 1; i < train.size() && !varies; ++i)
      varies = col.values[train[i]] != col.values[train[0]];
    if (varies) features.push_back(ds.schema()[c].name);
  }
  if (features.empty()) throw DegenerateColumnError("every predictor is constant over the training rows");

  ModelBundle b;
  auto cols = features;
  cols.emplace_back(kTargetColumn);
  b.scaling = fit_standardizer(ds.take(train), cols);
  b.features = std::move(features);
  b.mask = mask;
  b.schema_hash = schema_hash(b.features);
  const Eigen::MatrixXd x = design(ds, train, b.features, b.scaling);
  const Eigen::VectorXd y = target(ds, train, &b.scaling);
  const Eigen::MatrixXd xv = design(ds, val, b.features, b.scaling);
  const Eigen::VectorXd yv = target(ds, val, &b.scaling);
  b.model = fit_model(spec, x, y, xv, yv, seed);
  return b;
}

CvResult run_cv(const Dataset& ds, const ModelSpec& spec, SplitStrategy strategy, const CvOptions& o) {
  CvResult out;
  out.fold_set = draw_folds(ds, strategy, o);
  const auto test = out.fold_set.test_indices();
  std::vector<double> rmses, r2s;
  for (std::size_t f = 0; f < out.fold_set.size(); ++f) {
    const auto train = out.fold_set.indices(f, SplitLabel::Train);
    const auto val = out.fold_set.indices(f, SplitLabel::Val);
    auto bundle = train_on_rows(ds, spec, o.mask, train, val, derive_seed(o.seed, 100 + f));
    FoldResult fr;
    fr.fold = f;
    fr.n_features = bundle.features.size();
    fr.val = metrics_on(ds, val, predict_rows(bundle, ds, val));
    const Eigen::VectorXd pt = predict_rows(bundle, ds, test);
    fr.test = metrics_on(ds, test, pt);
    rmses.push_back(fr.test.rmse);
    if (fr.test.r2) r2s.push_back(*fr.test.r2);
    if (f == 0) {
      out.first_model = std::move(bundle);
      out.first_test = pt;
    }
    out.folds.push_back(fr);
  }
  out.rmse = summarize(rmses);
  out.r2 = summarize(r2s);
  if (o.grouped && !out.folds.empty()) {
    const Dataset test_ds = ds.take(test);
    const std::span<const double> p(out.first_test.data(), static_cast<std::size_t>(out.first_test.size()));
    for (auto key : {GroupKey::All, GroupKey::Site, GroupKey::Month})
      out.grouped.push_back(grouped_metrics(test_ds, p, o.baselines, key));
  }
  return out;
}

void write_cv_csv(const std::filesystem::path& dir, const CvResult& cv, const Dataset& ds) {
  std::filesystem::create_directories(dir);
  {
    csv::Writer w(dir / "cv_folds.csv");
    w.row({"fold", "split", "rmse", "r2", "n", "n_features"});
    for (const auto& f : cv.folds) {
      w.field(f.fold).field("val").field(f.val.rmse).field(f.val.r2).field(f.val.n).field(f.n_features).end_row();
      w.field(f.fold).field("test").field(f.test.rmse).field(f.test.r2).field(f.test.n).field(f.n_features).end_row();
    }
  }
  {
    csv::Writer w(dir / "cv_summary.csv");
    w.row({"metric", "mean", "std", "folds"});
    w.field("rmse").field(cv.rmse.mean).field(cv.rmse.std).field(cv.folds.size()).end_row();
    w.field("r2").field(cv.r2.mean).field(cv.r2.std).field(cv.folds.size()).end_row();
  }
  {
    csv::Writer w(dir / "predictions.csv");
    w.row({"row_index", "site_id", "timestamp", "fmc", "prediction"});
    const auto test = cv.fold_set.test_indices();
    for (std::size_t i = 0; i < test.size(); ++i) {
      const auto r = test[i];
      w.field(r).field(ds.site(r)).field(format_utc(ds.time(r))).field(ds.fmc()[r])
          .field(cv.first_test(static_cast<Eigen::Index>(i))).end_row();
    }
  }
  if (!cv.grouped.empty()) write_grouped_metrics_csv(dir / "metrics_grouped.csv", cv.grouped);
  write_folds_csv(dir / "folds.csv", cv.fold_set);
  save_model(dir / "model.json", cv.first_model);
}

std::vector<AblationRow> run_ablation(const Dataset& ds, const ModelSpec& spec, SplitStrategy strategy,
                                      const CvOptions& options) {
  std::vector<AblationRow> rows;
  for (const auto& mask : enumerate_group_masks()) {
    AblationRow row;
    row.mask = mask;
    try {
      const Dataset sel = select_groups(ds, mask);
      row.n_rows = sel.rows();
      CvOptions o = options;
      o.mask = mask;
      o.grouped = false;
      o.fold_set.reset();
      const auto cv = run_cv(sel, spec, strategy, o);
      row.rmse = cv.rmse;
      row.r2 = cv.r2;
    } catch (const Error& e) {
      row.status = e.what();
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

void write_ablation_csv(const std::filesystem::path& path, const std::vector<AblationRow>& rows) {
  std::vector<const AblationRow*> order;
  for (const auto& r : rows) order.push_back(&r);
  std::stable_sort(order.begin(), order.end(), [](const AblationRow* a, const AblationRow* b) {
    if (a->r2.has_value() != b->r2.has_value()) return a->r2.has_value();
    return a->r2 && a->r2->mean > b->r2->mean;
  });
  csv::Writer w(path);
  w.row({"mask", "n_rows", "rmse_mean", "rmse_std", "r2_mean", "r2_std", "status"});
  for (const auto* r : order) {
    auto opt = [](const std::optional<SummaryStat>& s, bool mean) -> std::optional<double> {
      if (!s) return std::nullopt;
      return mean ? s->mean : s->std;
    };
    w.field(r->mask.key()).field(r->n_rows).field(opt(r->rmse, true)).field(opt(r->rmse, false))
        .field(opt(r->r2, true)).field(opt(r->r2, false)).field(r->status).end_row();
  }
}

HpoRun run_hpo(const Dataset& ds, const ModelSpec& base, const ParamSpace& space, SplitStrategy strategy,
               std::size_t budget, const CvOptions& options, std::size_t n_random,
               const std::filesystem::path& history_path) {
  if (budget < 1) throw std::invalid_argument("hpo budget must be at least 1");
  CvOptions o = options;
  o.fold_set = draw_folds(ds, strategy, options);
  const auto train = o.fold_set->indices(0, SplitLabel::Train);
  const auto val = o.fold_set->indices(0, SplitLabel::Val);

  const ObjectiveFn objective = [&](const Assignment& a) -> std::optional<double> {
    const auto spec = apply_assignment(base, space, a);
    const auto bundle = train_on_rows(ds, spec, o.mask, train, val, derive_seed(o.seed, 100));
    return metrics_on(ds, val, predict_rows(bundle, ds, val)).rmse;
  };

  OptimizeOptions opt;
  opt.n_trials = budget;
  opt.n_random = std::min(n_random, budget);
  opt.seed = derive_seed(o.seed, 7);
  if (!history_path.empty() && std::filesystem::exists(history_path)) {
    opt.resume = read_history_csv(history_path, space);
    if (opt.resume.size() > budget) opt.resume.resize(budget);
  }
  if (!history_path.empty())
    opt.on_trial = [&](const std::vector<Trial>& h) { write_history_csv(history_path, space, h); };

  HpoRun run;
  run.search = optimize(objective, space, opt);
  run.best = apply_assignment(base, space, run.search.best.params);
  run.cv = run_cv(ds, run.best, strategy, o);
  return run;
}

RunManifest::RunManifest(std::string command) : command_(std::move(command)) {}

RunManifest& RunManifest::set(const std::string& key, const std::string& value) {
  text_.emplace_back(key, value);
  return *this;
}
RunManifest& RunManifest::set(const std::string& key, double value) {
  numbers_.emplace_back(key, value);
  return *this;
}
RunManifest& RunManifest::set(const std::string& key, long long value) {
  integers_.emplace_back(key, value);
  return *this;
}
RunManifest& RunManifest::output(const std::filesystem::path& file) {
  outputs_.push_back(file.filename().string());
  return *this;
}

void RunManifest::write(const std::filesystem::path& path) const {
  nlohmann::ordered_json j;
  j["tool"] = "fmc";
  j["version"] = std::string(kVersion);
  j["command"] = command_;
  nlohmann::ordered_json cfg = nlohmann::ordered_json::object();
  for (const auto& [k, v] : text_) cfg[k] = v;
  for (const auto& [k, v] : integers_) cfg[k] = v;
  for (const auto& [k, v] : numbers_) cfg[k] = v;
  j["config"] = std::move(cfg);
  j["outputs"] = outputs_;
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

} // namespace fmc
