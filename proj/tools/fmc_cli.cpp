// Command-line front end: one subcommand per pipeline stage.
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "fmc/climatology.hpp"
#include "fmc/csv.hpp"
#include "fmc/errors.hpp"
#include "fmc/evaluation.hpp"
#include "fmc/explain.hpp"
#include "fmc/harness.hpp"
#include "fmc/ingestion.hpp"
#include "fmc/synthgen.hpp"

namespace fs = std::filesystem;
using namespace fmc;

namespace {

struct Flags {
  std::string data = ".";
  std::string out = ".";
  std::string model = "gbt";
  std::string split = "site";
  std::string groups = "11111";
  int resolution = 375;
  std::uint64_t seed = 0;
  std::size_t folds = 10;
  std::size_t budget = 100;
  std::string clim_era_end = "2019-01-01";
  // synth only
  std::size_t sites = 20;
  int years = 7;
  int start_year = 2013;
  int days_per_year = 365;
  // explain only
  std::size_t explain_rows = 200;
};

fs::path in_path(const Flags& f, const char* name) { return fs::path(f.data) / name; }
fs::path out_path(const Flags& f, const char* name) {
  fs::create_directories(f.out);
  return fs::path(f.out) / name;
}

SplitStrategy strategy_of(const Flags& f) { return parse_split_strategy(f.split); }

RunManifest manifest(const std::string& command, const Flags& f) {
  RunManifest m(command);
  m.set("data", f.data).set("out", f.out).set("model", f.model).set("split", f.split)
      .set("groups", f.groups).set("clim_era_end", f.clim_era_end)
      .set("resolution", static_cast<long long>(f.resolution))
      .set("seed", static_cast<long long>(f.seed)).set("folds", static_cast<long long>(f.folds));
  return m;
}

Dataset load_selected(const Flags& f, const GroupMask& mask) {
  return select_groups(read_dataset_csv(in_path(f, "dataset.csv")), mask);
}

std::optional<FoldSet> persisted_folds(const Flags& f, const Dataset& ds) {
  const auto p = in_path(f, "folds.csv");
  if (!fs::exists(p)) return std::nullopt;
  auto folds = read_folds_csv(p, strategy_of(f), f.seed);
  if (folds.base.labels.size() != ds.rows() || folds.size() != f.folds) return std::nullopt;
  return folds;
}

struct Baselines {
  std::optional<ClimatologyTable> doy, doy_hr;
  std::vector<const ClimatologyTable*> list() const {
    std::vector<const ClimatologyTable*> out;
    if (doy) out.push_back(&*doy);
    if (doy_hr) out.push_back(&*doy_hr);
    return out;
  }
};

Baselines load_baselines(const Flags& f) {
  Baselines b;
  if (fs::exists(in_path(f, "clim_doy.csv"))) b.doy = read_climatology_csv(in_path(f, "clim_doy.csv"));
  if (fs::exists(in_path(f, "clim_doy_hr.csv")))
    b.doy_hr = read_climatology_csv(in_path(f, "clim_doy_hr.csv"));
  return b;
}

CvOptions cv_options(const Flags& f, const GroupMask& mask, const Dataset& ds) {
  CvOptions o;
  o.folds = f.folds;
  o.seed = f.seed;
  o.mask = mask;
  o.fold_set = persisted_folds(f, ds);
  return o;
}

int cmd_synth(const Flags& f) {
  SynthConfig cfg;
  cfg.n_sites = f.sites;
  cfg.years = f.years;
  cfg.start_year = f.start_year;
  cfg.predictor_start_year = to_civil(parse_utc(f.clim_era_end + "T00:00:00Z")).year;
  cfg.seed = f.seed;
  cfg.days_per_year = f.days_per_year;
  const auto out = generate(cfg);
  write_synth(f.out, out);
  write_schema_manifest(out_path(f, "schema.json"), default_schema());
  manifest("synth", f).set("sites", static_cast<long long>(f.sites))
      .set("years", static_cast<long long>(f.years)).set("start_year", static_cast<long long>(f.start_year))
      .set("observations", static_cast<long long>(out.observations.size()))
      .set("grid_fields", static_cast<long long>(out.fields.size()))
      .output("sites.csv").output("observations.csv").output("grid.csv").output("truth.txt")
      .output("schema.json").write(out_path(f, "manifest_synth.json"));
  return 0;
}

int cmd_ingest(const Flags& f) {
  const UtcTime era_end = parse_utc(f.clim_era_end + "T00:00:00Z");
  const auto dedupe = dedupe_sites(read_sites_csv(in_path(f, "sites.csv")));
  const auto obs = read_observations_csv(in_path(f, "observations.csv"));
  auto fields = read_grid_fields_csv(in_path(f, "grid.csv"));
  if (f.resolution != 375 && f.resolution != 2250) throw std::invalid_argument("--resolution is 375 or 2250");
  if (f.resolution == 2250) {
    for (auto& g : fields) {
      const auto factor = static_cast<std::size_t>(std::llround(2250.0 / g.grid_spacing));
      if (factor > 1) g = coarsen(g, factor);
    }
  }
  std::vector<FmcObservation> clim_obs, era_obs;
  std::size_t failed_qc = 0;
  for (const auto& o : obs) {
    if (!o.qc_pass) {
      ++failed_qc;
      continue;
    }
    (o.timestamp < era_end ? clim_obs : era_obs).push_back(o);
  }
  PairingStats stats;
  const auto ds = build_training_table(era_obs, dedupe.sites, fields, default_schema(), &stats);
  write_dataset_csv(out_path(f, "dataset.csv"), ds);
  write_observations_csv(out_path(f, "clim_observations.csv"), clim_obs);
  write_changelog_csv(out_path(f, "changelog.csv"), dedupe.changelog);
  write_schema_manifest(out_path(f, "schema.json"), default_schema());
  manifest("ingest", f).set("rows", static_cast<long long>(ds.rows()))
      .set("failed_qc", static_cast<long long>(failed_qc))
      .set("climatology_observations", static_cast<long long>(clim_obs.size()))
      .set("dropped_unknown_site", static_cast<long long>(stats.dropped_unknown_site))
      .set("dropped_duplicate", static_cast<long long>(stats.dropped_duplicate))
      .set("changelog_entries", static_cast<long long>(dedupe.changelog.size()))
      .output("dataset.csv").output("clim_observations.csv").output("changelog.csv").output("schema.json")
      .write(out_path(f, "manifest_ingest.json"));
  return 0;
}

int cmd_clim(const Flags& f) {
  const UtcTime era_end = parse_utc(f.clim_era_end + "T00:00:00Z");
  auto p = in_path(f, "clim_observations.csv");
  if (!fs::exists(p)) p = in_path(f, "observations.csv");
  const auto obs = observations_before(read_observations_csv(p), era_end);
  write_climatology_csv(out_path(f, "clim_doy.csv"), build_climatology(obs, ClimatologyKind::DOY));
  write_climatology_csv(out_path(f, "clim_doy_hr.csv"), build_climatology(obs, ClimatologyKind::DOY_HR));
  manifest("clim", f).set("observations", static_cast<long long>(obs.size()))
      .output("clim_doy.csv").output("clim_doy_hr.csv").write(out_path(f, "manifest_clim.json"));
  return 0;
}

int cmd_split(const Flags& f) {
  const auto mask = GroupMask::parse(f.groups);
  const auto ds = load_selected(f, mask);
  const auto split = make_split(ds, strategy_of(f), kDefaultFractions, f.seed);
  const auto folds = make_folds(ds, split, f.folds, derive_seed(f.seed, 1));
  write_folds_csv(out_path(f, "folds.csv"), folds);
  manifest("split", f).set("rows", static_cast<long long>(ds.rows()))
      .set("test_rows", static_cast<long long>(split.count(SplitLabel::Test)))
      .output("folds.csv").write(out_path(f, "manifest_split.json"));
  return 0;
}

int cmd_train(const Flags& f) {
  const auto mask = GroupMask::parse(f.groups);
  const auto ds = load_selected(f, mask);
  auto o = cv_options(f, mask, ds);
  if (!o.fold_set) {
    const auto split = make_split(ds, strategy_of(f), o.fractions, f.seed);
    o.fold_set = make_folds(ds, split, f.folds, derive_seed(f.seed, 1));
  }
  const auto spec = default_model_spec(parse_model_kind(f.model));
  const auto train = o.fold_set->indices(0, SplitLabel::Train);
  const auto val = o.fold_set->indices(0, SplitLabel::Val);
  const auto bundle = train_on_rows(ds, spec, mask, train, val, derive_seed(f.seed, 100));
  save_model(out_path(f, "model.json"), bundle);
  csv::Writer w(out_path(f, "train_metrics.csv"));
  w.row({"split", "rmse", "r2", "n"});
  for (auto label : {SplitLabel::Train, SplitLabel::Val, SplitLabel::Test}) {
    const auto rows = label == SplitLabel::Test ? o.fold_set->test_indices() : o.fold_set->indices(0, label);
    const Dataset sub = ds.take(rows);
    const auto pred = predict_dataset(bundle, sub);
    const auto y = sub.target();
    const auto m = compute_metrics(std::span<const double>(y.data(), rows.size()),
                                   std::span<const double>(pred.data(), rows.size()));
    w.field(to_string(label)).field(m.rmse).field(m.r2).field(m.n).end_row();
  }
  manifest("train", f).set("features", static_cast<long long>(bundle.features.size()))
      .output("model.json").output("train_metrics.csv").write(out_path(f, "manifest_train.json"));
  return 0;
}

int cmd_cv(const Flags& f) {
  const auto mask = GroupMask::parse(f.groups);
  const auto ds = load_selected(f, mask);
  const auto baselines = load_baselines(f);
  auto o = cv_options(f, mask, ds);
  o.baselines = baselines.list();
  const auto cv = run_cv(ds, default_model_spec(parse_model_kind(f.model)), strategy_of(f), o);
  write_cv_csv(f.out, cv, ds);
  manifest("cv", f).set("rows", static_cast<long long>(ds.rows()))
      .set("rmse_mean", cv.rmse.mean).set("rmse_std", cv.rmse.std)
      .set("r2_mean", cv.r2.mean).set("r2_std", cv.r2.std)
      .set("baselines", static_cast<long long>(o.baselines.size()))
      .output("cv_folds.csv").output("cv_summary.csv").output("predictions.csv")
      .output("metrics_grouped.csv").output("folds.csv").output("model.json")
      .write(out_path(f, "manifest_cv.json"));
  return 0;
}

int cmd_hpo(const Flags& f) {
  const auto mask = GroupMask::parse(f.groups);
  const auto kind = parse_model_kind(f.model);
  if (kind == ModelKind::LR) throw std::invalid_argument("hpo applies to gbt and mlp");
  const auto ds = load_selected(f, mask);
  const auto baselines = load_baselines(f);
  auto o = cv_options(f, mask, ds);
  o.baselines = baselines.list();
  const auto space = kind == ModelKind::GBT ? default_gbt_space() : default_mlp_space();
  const auto run = run_hpo(ds, default_model_spec(kind), space, strategy_of(f), f.budget, o, 100,
                           out_path(f, "hpo_history.csv"));
  write_history_csv(out_path(f, "hpo_history.csv"), space, run.search.history);
  {
    csv::Writer w(out_path(f, "hpo_best.csv"));
    w.row({"param", "value"});
    w.field("trial_id").field(run.search.best.id).end_row();
    w.field("objective").field(run.search.best.objective).end_row();
    for (std::size_t j = 0; j < space.dims.size(); ++j)
      w.field(space.dims[j].name).field(space.format(run.search.best.params, j)).end_row();
  }
  write_cv_csv(f.out, run.cv, ds);
  manifest("hpo", f).set("budget", static_cast<long long>(f.budget))
      .set("best_objective", run.search.best.objective).set("rmse_mean", run.cv.rmse.mean)
      .output("hpo_history.csv").output("hpo_best.csv").output("cv_summary.csv").output("model.json")
      .write(out_path(f, "manifest_hpo.json"));
  return 0;
}

int cmd_ablate(const Flags& f) {
  const auto ds = read_dataset_csv(in_path(f, "dataset.csv"));
  CvOptions o;
  o.folds = f.folds;
  o.seed = f.seed;
  const auto rows = run_ablation(ds, default_model_spec(parse_model_kind(f.model)), strategy_of(f), o);
  write_ablation_csv(out_path(f, "ablation.csv"), rows);
  manifest("ablate", f).set("masks", static_cast<long long>(rows.size()))
      .output("ablation.csv").write(out_path(f, "manifest_ablate.json"));
  return 0;
}

int cmd_explain(const Flags& f) {
  const auto bundle = load_model(in_path(f, "model.json"));
  const auto ds = load_selected(f, bundle.mask);
  auto folds = persisted_folds(f, ds);
  if (!folds) throw std::runtime_error("explain needs folds.csv matching the dataset (run split or cv)");
  auto test = folds->test_indices();
  if (test.size() > f.explain_rows) test.resize(f.explain_rows);
  const auto train = folds->indices(0, SplitLabel::Train);

  auto matrix = [&](const std::vector<std::size_t>& rows) {
    Eigen::MatrixXd x(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(bundle.features.size()));
    for (std::size_t j = 0; j < bundle.features.size(); ++j) {
      const auto& col = ds.column(ds.column_index(bundle.features[j]));
      const auto& sc = bundle.scaling.at(bundle.features[j]);
      for (std::size_t i = 0; i < rows.size(); ++i)
        x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = (col.values[rows[i]] - sc.mean) / sc.std;
    }
    return x;
  };
  const Eigen::MatrixXd x = matrix(test);
  Eigen::VectorXd y(static_cast<Eigen::Index>(test.size()));
  for (std::size_t i = 0; i < test.size(); ++i) y(static_cast<Eigen::Index>(i)) = ds.fmc().values[test[i]];
  const PredictFn raw = [&](const Eigen::MatrixXd& m) {
    return inverse_standardize(predict(bundle.model, m), bundle.scaling, kTargetColumn);
  };
  const double target_scale = bundle.scaling.at(kTargetColumn).std;

  std::mt19937_64 rng(derive_seed(f.seed, 11));
  std::vector<ImportanceReport> reports;
  reports.push_back(permutation_importance(raw, x, y, bundle.features, 5, rng));
  if (const auto* gbt = std::get_if<GbtModel>(&bundle.model)) {
    reports.push_back(scaled(shap_importance(*gbt, x, bundle.features), target_scale));
    reports.push_back(gain_importance(*gbt, bundle.features));
  } else {
    std::vector<std::size_t> bg = train;
    std::shuffle(bg.begin(), bg.end(), rng);
    if (bg.size() > static_cast<std::size_t>(kShapBackgroundRows)) bg.resize(kShapBackgroundRows);
    std::sort(bg.begin(), bg.end());
    reports.push_back(shap_importance(raw, x, matrix(bg), bundle.features, 64, rng));
  }
  write_importance_csv(out_path(f, "importance.csv"), reports);
  auto m = manifest("explain", f);
  m.set("rows", static_cast<long long>(test.size()));
  for (const auto& r : reports)
    if (!r.warning.empty()) m.set("warning_" + std::string(to_string(r.method)), r.warning);
  m.output("importance.csv").write(out_path(f, "manifest_explain.json"));
  return 0;
}

int cmd_eval(const Flags& f) {
  const auto bundle = load_model(in_path(f, "model.json"));
  const auto ds = load_selected(f, bundle.mask);
  const auto baselines = load_baselines(f);
  const auto pred = predict_dataset(bundle, ds);
  const std::span<const double> p(pred.data(), static_cast<std::size_t>(pred.size()));
  std::vector<GroupedMetrics> tables;
  tables.push_back(grouped_metrics(ds, p, baselines.list(), GroupKey::All));
  if (auto folds = persisted_folds(f, ds)) {
    const auto labels = folds->folds.front();
    tables.push_back(grouped_metrics(ds, p, baselines.list(), GroupKey::Label, &labels));
  }
  tables.push_back(grouped_metrics(ds, p, baselines.list(), GroupKey::Site));
  tables.push_back(grouped_metrics(ds, p, baselines.list(), GroupKey::Month));
  write_grouped_metrics_csv(out_path(f, "eval_metrics.csv"), tables);
  write_correlation_csv(out_path(f, "correlation.csv"), correlation_matrix(ds));
  manifest("eval", f).set("rows", static_cast<long long>(ds.rows()))
      .output("eval_metrics.csv").output("correlation.csv").write(out_path(f, "manifest_eval.json"));
  return 0;
}

/// Collects the summary tables present in the data directory into report.csv,
/// with r2 clipped at zero for display and a month x metric skill table.
int cmd_report(const Flags& f) {
  csv::Writer w(out_path(f, "report.csv"));
  w.row({"section", "key", "metric", "value"});
  std::vector<std::string> used;
  std::vector<std::string_view> row;
  if (fs::exists(in_path(f, "cv_summary.csv"))) {
    csv::Reader r(in_path(f, "cv_summary.csv"));
    const auto cm = r.column("metric"), cmean = r.column("mean"), cstd = r.column("std");
    while (r.next(row)) {
      w.field("cv").field(row[cm]).field("mean").field(row[cmean]).end_row();
      w.field("cv").field(row[cm]).field("std").field(row[cstd]).end_row();
    }
    used.emplace_back("cv_summary.csv");
  }
  std::map<int, std::map<std::string, std::string>> monthly;
  std::vector<std::string> monthly_metrics;
  if (fs::exists(in_path(f, "metrics_grouped.csv"))) {
    csv::Reader r(in_path(f, "metrics_grouped.csv"));
    const auto ck = r.column("group_key"), cm = r.column("metric"), cv = r.column("value");
    while (r.next(row)) {
      const std::string key(row[ck]), metric(row[cm]);
      if (metric == "r2") continue; // the display column carries the clipped value
      const auto section = key.substr(0, key.find('='));
      w.field(section).field(key.substr(key.find('=') + 1)).field(metric).field(row[cv]).end_row();
      if (section == "month") {
        monthly[std::stoi(key.substr(6))][metric] = std::string(row[cv]);
        if (std::find(monthly_metrics.begin(), monthly_metrics.end(), metric) == monthly_metrics.end())
          monthly_metrics.push_back(metric);
      }
    }
    used.emplace_back("metrics_grouped.csv");
  }
  if (fs::exists(in_path(f, "ablation.csv"))) {
    csv::Reader r(in_path(f, "ablation.csv"));
    const auto ck = r.column("mask"), cr = r.column("rmse_mean"), c2 = r.column("r2_mean");
    while (r.next(row)) {
      w.field("ablation").field(row[ck]).field("rmse_mean").field(row[cr]).end_row();
      std::string shown(row[c2]);
      if (!shown.empty() && csv::parse_double(shown) < 0.0) shown = "0";
      w.field("ablation").field(row[ck]).field("r2_display").field(shown).end_row();
    }
    used.emplace_back("ablation.csv");
  }
  if (fs::exists(in_path(f, "importance.csv"))) {
    csv::Reader r(in_path(f, "importance.csv"));
    const auto cf = r.column("feature"), cm = r.column("method"), cs = r.column("score"), cr = r.column("rank");
    while (r.next(row)) {
      if (row[cm] != "sum") continue;
      w.field("importance").field(row[cf]).field("stacked_sum").field(row[cs]).end_row();
      w.field("importance").field(row[cf]).field("stacked_rank").field(row[cr]).end_row();
    }
    used.emplace_back("importance.csv");
  }
  if (!monthly.empty()) {
    csv::Writer m(out_path(f, "report_monthly.csv"));
    m.field("month");
    for (const auto& name : monthly_metrics) m.field(name);
    m.end_row();
    for (const auto& [month, values] : monthly) {
      m.field(month);
      for (const auto& name : monthly_metrics) {
        auto it = values.find(name);
        m.field(it == values.end() ? std::string_view{} : std::string_view(it->second));
      }
      m.end_row();
    }
  }
  auto man = manifest("report", f);
  for (std::size_t i = 0; i < used.size(); ++i) man.set("input_" + std::to_string(i), used[i]);
  man.output("report.csv");
  if (!monthly.empty()) man.output("report_monthly.csv");
  man.write(out_path(f, "manifest_report.json"));
  return 0;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"Fuel moisture content modelling pipeline"};
  app.require_subcommand(1);
  Flags f;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--data", f.data, "Input directory");
    sub->add_option("--out", f.out, "Output directory");
    sub->add_option("--model", f.model, "Model kind")->check(CLI::IsMember({"lr", "gbt", "mlp"}));
    sub->add_option("--split", f.split, "Split strategy")->check(CLI::IsMember({"random", "site"}));
    sub->add_option("--groups", f.groups, "5-bit group mask (Static,HRRR,NWM,ViirsRefl,LST)");
    sub->add_option("--resolution", f.resolution, "Grid resolution in meters")->check(CLI::IsMember({375, 2250}));
    sub->add_option("--seed", f.seed, "Random seed");
    sub->add_option("--folds", f.folds, "Cross-validation folds")->check(CLI::PositiveNumber);
    sub->add_option("--budget", f.budget, "HPO trial budget")->check(CLI::PositiveNumber);
    sub->add_option("--clim-era-end", f.clim_era_end, "First day after the climatology era (YYYY-MM-DD)");
  };

  using Handler = int (*)(const Flags&);
  const std::vector<std::tuple<const char*, const char*, Handler>> commands = {
      {"synth", "Generate a synthetic fixture", cmd_synth},
      {"ingest", "QC, dedupe and pair observations with gridded predictors", cmd_ingest},
      {"clim", "Build DOY and DOY-HR climatologies", cmd_clim},
      {"split", "Write train/val/test folds", cmd_split},
      {"train", "Train one model on fold 0", cmd_train},
      {"cv", "K-fold cross-validation with grouped skill tables", cmd_cv},
      {"hpo", "Hyperparameter search followed by cross-validation", cmd_hpo},
      {"ablate", "Cross-validate all 31 group masks", cmd_ablate},
      {"explain", "Permutation, SHAP and gain importance", cmd_explain},
      {"eval", "Grouped metrics and the correlation matrix", cmd_eval},
      {"report", "Collect summary tables", cmd_report},
  };
  std::vector<std::pair<CLI::App*, Handler>> subs;
  for (const auto& [name, help, handler] : commands) {
    auto* sub = app.add_subcommand(name, help);
    common(sub);
    subs.emplace_back(sub, handler);
  }
  auto* synth = subs[0].first;
  synth->add_option("--sites", f.sites, "Number of sites")->check(CLI::PositiveNumber);
  synth->add_option("--years", f.years, "Number of years")->check(CLI::PositiveNumber);
  synth->add_option("--start-year", f.start_year, "First generated year");
  synth->add_option("--days-per-year", f.days_per_year, "Observed days per year")->check(CLI::Range(1, 365));
  subs[8].first->add_option("--rows", f.explain_rows, "Test rows to explain")->check(CLI::PositiveNumber);

  CLI11_PARSE(app, argc, argv);
  try {
    for (const auto& [sub, handler] : subs)
      if (sub->parsed()) return handler(f);
  } catch (const std::exception& e) {
    std::cerr << "fmc: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
