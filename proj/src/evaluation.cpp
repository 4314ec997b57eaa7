#include "fmc/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

#include "fmc/csv.hpp"
#include "fmc/errors.hpp"

namespace fmc {

namespace {

void check_lengths(std::span<const double> y, std::span<const double> f) {
  if (y.size() != f.size()) throw std::invalid_argument("metric inputs differ in length");
  if (y.empty()) throw std::invalid_argument("metric inputs are empty");
}

double sum_sq_res(std::span<const double> y, std::span<const double> f) {
  double s = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) s += (y[i] - f[i]) * (y[i] - f[i]);
  return s;
}

std::optional<double> r2_or_none(std::span<const double> y, std::span<const double> f) {
  try {
    return r2(y, f);
  } catch (const UndefinedR2Error&) {
    return std::nullopt;
  }
}

} // namespace

double rmse(std::span<const double> y, std::span<const double> f) {
  check_lengths(y, f);
  return std::sqrt(sum_sq_res(y, f) / static_cast<double>(y.size()));
}

double r2(std::span<const double> y, std::span<const double> f) {
  check_lengths(y, f);
  if (y.size() < 2) throw UndefinedR2Error("r2 needs at least 2 values");
  double mean = 0.0;
  for (double v : y) mean += v;
  mean /= static_cast<double>(y.size());
  double ss_tot = 0.0;
  for (double v : y) ss_tot += (v - mean) * (v - mean);
  if (ss_tot == 0.0) throw UndefinedR2Error("r2 undefined for constant observations");
  return 1.0 - sum_sq_res(y, f) / ss_tot;
}

MetricReport compute_metrics(std::span<const double> y, std::span<const double> f) {
  check_lengths(y, f);
  MetricReport m;
  m.n = y.size();
  m.ss_res = sum_sq_res(y, f);
  m.rmse = std::sqrt(m.ss_res / static_cast<double>(m.n));
  m.r2 = r2_or_none(y, f);
  return m;
}

SkillReport skill(const MetricReport& model, const MetricReport& clim, ClimatologyKind baseline) {
  if (model.n != clim.n) throw AlignmentError("skill inputs cover different rows");
  SkillReport s;
  s.baseline = baseline;
  s.n = model.n;
  if (clim.rmse > 0.0) s.skill_rmse = 1.0 - model.rmse / clim.rmse;
  if (model.r2 && clim.r2 && *clim.r2 < 1.0) s.skill_r2 = 1.0 - (1.0 - *model.r2) / (1.0 - *clim.r2);
  return s;
}

SkillReport skill_on_unmasked(std::span<const double> y, std::span<const double> f,
                              std::span<const std::optional<double>> clim, ClimatologyKind baseline) {
  if (y.size() != f.size() || y.size() != clim.size())
    throw AlignmentError("skill inputs differ in length");
  std::vector<double> ys, fs, cs;
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (!clim[i]) continue;
    ys.push_back(y[i]);
    fs.push_back(f[i]);
    cs.push_back(*clim[i]);
  }
  if (ys.empty()) {
    SkillReport s;
    s.baseline = baseline;
    return s;
  }
  return skill(compute_metrics(ys, fs), compute_metrics(ys, cs), baseline);
}

std::vector<std::optional<double>> climatology_predictions(const ClimatologyTable& table,
                                                           const Dataset& ds) {
  std::vector<std::optional<double>> out(ds.rows());
  for (std::size_t r = 0; r < ds.rows(); ++r) out[r] = climatology_predict(table, ds.site(r), ds.time(r));
  return out;
}

std::string_view to_string(GroupKey k) {
  switch (k) {
    case GroupKey::All: return "all";
    case GroupKey::Site: return "site";
    case GroupKey::Month: return "month";
    case GroupKey::Label: return "label";
  }
  return "?";
}

GroupKey parse_group_key(std::string_view s) {
  if (s == "all") return GroupKey::All;
  if (s == "site") return GroupKey::Site;
  if (s == "month") return GroupKey::Month;
  if (s == "label") return GroupKey::Label;
  throw std::invalid_argument("unknown group key: " + std::string(s));
}

GroupedMetrics grouped_metrics(const Dataset& ds, std::span<const double> predictions,
                               const std::vector<const ClimatologyTable*>& baselines, GroupKey key,
                               const std::vector<SplitLabel>* labels) {
  if (predictions.size() != ds.rows()) throw AlignmentError("predictions do not match dataset rows");
  if (key == GroupKey::Label && (!labels || labels->size() != ds.rows()))
    throw AlignmentError("label grouping needs one label per row");

  std::vector<std::vector<std::optional<double>>> clim;
  for (const auto* t : baselines) clim.push_back(climatology_predictions(*t, ds));

  // Months sort numerically through the int part of the key.
  std::map<std::pair<int, std::string>, std::vector<std::size_t>> groups;
  const auto& y = ds.fmc();
  for (std::size_t r = 0; r < ds.rows(); ++r) {
    if (!y.has(r)) continue;
    std::pair<int, std::string> k{0, "all"};
    switch (key) {
      case GroupKey::All: break;
      case GroupKey::Site: k.second = ds.site(r); break;
      case GroupKey::Month: {
        const int m = static_cast<int>(to_civil(ds.time(r)).month);
        k = {m, std::to_string(m)};
        break;
      }
      case GroupKey::Label:
        k = {static_cast<int>((*labels)[r]), std::string(to_string((*labels)[r]))};
        break;
    }
    groups[k].push_back(r);
  }

  GroupedMetrics out;
  out.key = key;
  for (const auto& [k, rows] : groups) {
    std::vector<double> ys, fs;
    for (auto r : rows) {
      ys.push_back(y.values[r]);
      fs.push_back(predictions[r]);
    }
    GroupRow g;
    g.key = k.second;
    g.metrics = compute_metrics(ys, fs);
    for (std::size_t b = 0; b < baselines.size(); ++b) {
      std::vector<std::optional<double>> cs;
      for (auto r : rows) cs.push_back(clim[b][r]);
      g.skills.push_back(skill_on_unmasked(ys, fs, cs, baselines[b]->kind()));
    }
    out.groups.push_back(std::move(g));
  }
  return out;
}

void write_grouped_metrics_csv(const std::filesystem::path& path,
                               const std::vector<GroupedMetrics>& tables) {
  csv::Writer w(path);
  w.row({"group_key", "metric", "value", "n"});
  for (const auto& t : tables) {
    for (const auto& g : t.groups) {
      const std::string key = std::string(to_string(t.key)) + "=" + g.key;
      const auto& m = g.metrics;
      w.field(key).field("rmse").field(m.rmse).field(m.n).end_row();
      w.field(key).field("r2").field(m.r2).field(m.n).end_row();
      std::optional<double> shown;
      if (m.r2) shown = std::max(0.0, *m.r2);
      w.field(key).field("r2_display").field(shown).field(m.n).end_row();
      for (const auto& s : g.skills) {
        std::string suffix(to_string(s.baseline));
        std::transform(suffix.begin(), suffix.end(), suffix.begin(),
                       [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
        w.field(key).field("skill_rmse_" + suffix).field(s.skill_rmse).field(s.n).end_row();
        w.field(key).field("skill_r2_" + suffix).field(s.skill_r2).field(s.n).end_row();
      }
    }
  }
}

CorrelationMatrix correlation_matrix(const Dataset& ds) {
  CorrelationMatrix m;
  m.names = ds.column_names();
  m.names.emplace_back(kTargetColumn);
  const std::size_t p = m.names.size();
  auto col = [&](std::size_t j) -> const Column& { return j + 1 == p ? ds.fmc() : ds.column(j); };

  std::vector<std::size_t> rows;
  for (std::size_t r = 0; r < ds.rows(); ++r) {
    bool ok = true;
    for (std::size_t j = 0; j < p && ok; ++j) ok = col(j).has(r) && std::isfinite(col(j).values[r]);
    if (ok) rows.push_back(r);
  }
  if (rows.size() < 2) throw TooSmallDatasetError("correlation needs at least 2 complete rows");
  m.n_rows = rows.size();

  std::vector<std::vector<double>> centred(p, std::vector<double>(rows.size()));
  std::vector<double> norm(p);
  for (std::size_t j = 0; j < p; ++j) {
    double mean = 0.0;
    for (auto r : rows) mean += col(j).values[r];
    mean /= static_cast<double>(rows.size());
    double ss = 0.0;
    for (std::size_t i = 0; i < rows.size(); ++i) {
      centred[j][i] = col(j).values[rows[i]] - mean;
      ss += centred[j][i] * centred[j][i];
    }
    norm[j] = std::sqrt(ss);
  }
  m.values.assign(p * p, std::nullopt);
  for (std::size_t a = 0; a < p; ++a) {
    for (std::size_t b = a; b < p; ++b) {
      if (norm[a] == 0.0 || norm[b] == 0.0) continue;
      double c = 1.0;
      if (a != b) {
        double s = 0.0;
        for (std::size_t i = 0; i < rows.size(); ++i) s += centred[a][i] * centred[b][i];
        c = std::clamp(s / (norm[a] * norm[b]), -1.0, 1.0);
      }
      m.values[a * p + b] = c;
      m.values[b * p + a] = c;
    }
  }
  return m;
}

void write_correlation_csv(const std::filesystem::path& path, const CorrelationMatrix& m) {
  csv::Writer w(path);
  w.row({"row", "column", "value", "n"});
  for (std::size_t a = 0; a < m.names.size(); ++a)
    for (std::size_t b = 0; b < m.names.size(); ++b)
      w.field(m.names[a]).field(m.names[b]).field(m.at(a, b)).field(m.n_rows).end_row();
}

} // namespace fmc
