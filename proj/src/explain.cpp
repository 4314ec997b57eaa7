#include "fmc/explain.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "fmc/csv.hpp"

namespace fmc {

std::string_view to_string(ImportanceMethod m) {
  switch (m) {
    case ImportanceMethod::Permutation: return "permutation";
    case ImportanceMethod::SHAP: return "shap";
    case ImportanceMethod::Gain: return "gain";
  }
  return "?";
}

namespace {

double rmse_of(const Eigen::VectorXd& y, const Eigen::VectorXd& f) {
  return std::sqrt((y - f).squaredNorm() / static_cast<double>(y.size()));
}

void check_features(const std::vector<std::string>& features, Eigen::Index p) {
  if (static_cast<Eigen::Index>(features.size()) != p)
    throw std::invalid_argument("feature names do not match column count");
}

} // namespace

ImportanceReport permutation_importance(const PredictFn& predict, const Eigen::MatrixXd& x,
                                        const Eigen::VectorXd& y,
                                        const std::vector<std::string>& features, int repeats,
                                        std::mt19937_64& rng) {
  if (repeats < 1) throw std::invalid_argument("permutation importance needs repeats >= 1");
  if (x.rows() != y.size()) throw std::invalid_argument("X and y differ in rows");
  check_features(features, x.cols());
  ImportanceReport rep;
  rep.method = ImportanceMethod::Permutation;
  rep.features = features;
  const double base = rmse_of(y, predict(x));
  std::vector<Eigen::Index> perm(static_cast<std::size_t>(x.rows()));
  Eigen::MatrixXd shuffled = x;
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    std::vector<double> deltas;
    for (int k = 0; k < repeats; ++k) {
      std::iota(perm.begin(), perm.end(), Eigen::Index{0});
      std::shuffle(perm.begin(), perm.end(), rng);
      for (Eigen::Index r = 0; r < x.rows(); ++r) shuffled(r, j) = x(perm[static_cast<std::size_t>(r)], j);
      deltas.push_back(rmse_of(y, predict(shuffled)) - base);
    }
    shuffled.col(j) = x.col(j);
    const double mean = std::accumulate(deltas.begin(), deltas.end(), 0.0) / repeats;
    double var = 0.0;
    for (double d : deltas) var += (d - mean) * (d - mean);
    rep.scores.push_back(mean);
    rep.std_errors.push_back(repeats > 1 ? std::sqrt(var / (repeats - 1) / repeats) : 0.0);
  }
  return rep;
}

namespace {

struct PathElement {
  int feature;
  double zero_fraction;
  double one_fraction;
  double pweight;
};

using Path = std::vector<PathElement>;

void extend_path(Path& path, std::size_t depth, double zero, double one, int feature) {
  path.resize(depth + 1);
  path[depth] = {feature, zero, one, depth == 0 ? 1.0 : 0.0};
  const double d1 = static_cast<double>(depth + 1);
  for (std::size_t ii = depth; ii-- > 0;) {
    path[ii + 1].pweight += one * path[ii].pweight * static_cast<double>(ii + 1) / d1;
    path[ii].pweight = zero * path[ii].pweight * static_cast<double>(depth - ii) / d1;
  }
}

void unwind_path(Path& path, std::size_t depth, std::size_t index) {
  const double one = path[index].one_fraction;
  const double zero = path[index].zero_fraction;
  const double d1 = static_cast<double>(depth + 1);
  double next = path[depth].pweight;
  for (std::size_t ii = depth; ii-- > 0;) {
    if (one != 0.0) {
      const double tmp = path[ii].pweight;
      path[ii].pweight = next * d1 / (static_cast<double>(ii + 1) * one);
      next = tmp - path[ii].pweight * zero * static_cast<double>(depth - ii) / d1;
    } else {
      path[ii].pweight = path[ii].pweight * d1 / (zero * static_cast<double>(depth - ii));
    }
  }
  for (std::size_t ii = index; ii < depth; ++ii) {
    path[ii].feature = path[ii + 1].feature;
    path[ii].zero_fraction = path[ii + 1].zero_fraction;
    path[ii].one_fraction = path[ii + 1].one_fraction;
  }
  path.resize(depth);
}

double unwound_path_sum(const Path& path, std::size_t depth, std::size_t index) {
  const double one = path[index].one_fraction;
  const double zero = path[index].zero_fraction;
  const double d1 = static_cast<double>(depth + 1);
  double next = path[depth].pweight;
  double total = 0.0;
  for (std::size_t ii = depth; ii-- > 0;) {
    if (one != 0.0) {
      const double tmp = next * d1 / (static_cast<double>(ii + 1) * one);
      total += tmp;
      next = path[ii].pweight - tmp * zero * static_cast<double>(depth - ii) / d1;
    } else if (zero != 0.0) {
      total += path[ii].pweight / zero / (static_cast<double>(depth - ii) / d1);
    }
  }
  return total;
}

void tree_shap_recurse(const RegressionTree& tree, const double* x, double scale, Eigen::VectorXd& phi,
                       int node, Path path, std::size_t depth, double zero, double one, int feature) {
  extend_path(path, depth, zero, one, feature);
  const auto& nd = tree.nodes[static_cast<std::size_t>(node)];
  if (nd.is_leaf()) {
    for (std::size_t i = 1; i <= depth; ++i) {
      const double w = unwound_path_sum(path, depth, i);
      const auto& el = path[i];
      phi(el.feature) += w * (el.one_fraction - el.zero_fraction) * nd.weight * scale;
    }
    return;
  }
  const int hot = x[nd.feature] < nd.threshold ? nd.left : nd.right;
  const int cold = hot == nd.left ? nd.right : nd.left;
  const double cover = nd.cover;
  const double hot_zero = tree.nodes[static_cast<std::size_t>(hot)].cover / cover;
  const double cold_zero = tree.nodes[static_cast<std::size_t>(cold)].cover / cover;
  double in_zero = 1.0, in_one = 1.0;
  std::size_t k = 0;
  while (k <= depth && path[k].feature != nd.feature) ++k;
  if (k <= depth) {
    in_zero = path[k].zero_fraction;
    in_one = path[k].one_fraction;
    unwind_path(path, depth, k);
    --depth;
  }
  tree_shap_recurse(tree, x, scale, phi, hot, path, depth + 1, hot_zero * in_zero, in_one, nd.feature);
  tree_shap_recurse(tree, x, scale, phi, cold, path, depth + 1, cold_zero * in_zero, 0.0, nd.feature);
}

double tree_expectation(const RegressionTree& t, int node) {
  const auto& nd = t.nodes[static_cast<std::size_t>(node)];
  if (nd.is_leaf()) return nd.weight;
  const auto& l = t.nodes[static_cast<std::size_t>(nd.left)];
  const auto& r = t.nodes[static_cast<std::size_t>(nd.right)];
  return (l.cover * tree_expectation(t, nd.left) + r.cover * tree_expectation(t, nd.right)) / nd.cover;
}

} // namespace

double expected_value(const GbtModel& model) {
  double s = 0.0;
  for (const auto& t : model.trees) s += tree_expectation(t, 0);
  return model.base_score + model.learning_rate * s;
}

ShapExplanation tree_shap(const GbtModel& model, const Eigen::VectorXd& x) {
  if (static_cast<std::size_t>(x.size()) != model.n_features)
    throw std::invalid_argument("tree_shap: feature count mismatch");
  ShapExplanation e;
  e.base_value = expected_value(model);
  e.contributions = Eigen::VectorXd::Zero(x.size());
  Path path;
  path.reserve(64);
  for (const auto& t : model.trees)
    tree_shap_recurse(t, x.data(), model.learning_rate, e.contributions, 0, path, 0, 1.0, 1.0, -1);
  return e;
}

ShapExplanation sampled_shap(const PredictFn& predict, const Eigen::VectorXd& x,
                             const Eigen::MatrixXd& background, int n_samples, std::mt19937_64& rng) {
  if (background.rows() == 0) throw std::invalid_argument("sampled_shap: empty background");
  if (background.cols() != x.size()) throw std::invalid_argument("sampled_shap: width mismatch");
  if (n_samples < 1) throw std::invalid_argument("sampled_shap: n_samples >= 1");
  const Eigen::Index p = x.size();
  // Each sample contributes p + 1 rows: the background row, then one more feature switched per row.
  Eigen::MatrixXd chain(static_cast<Eigen::Index>(n_samples) * (p + 1), p);
  std::vector<std::vector<Eigen::Index>> orders(static_cast<std::size_t>(n_samples));
  std::uniform_int_distribution<Eigen::Index> pick(0, background.rows() - 1);
  for (int s = 0; s < n_samples; ++s) {
    auto& order = orders[static_cast<std::size_t>(s)];
    order.resize(static_cast<std::size_t>(p));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    std::shuffle(order.begin(), order.end(), rng);
    Eigen::RowVectorXd row = background.row(pick(rng));
    const Eigen::Index base = static_cast<Eigen::Index>(s) * (p + 1);
    chain.row(base) = row;
    for (Eigen::Index k = 0; k < p; ++k) {
      row(order[static_cast<std::size_t>(k)]) = x(order[static_cast<std::size_t>(k)]);
      chain.row(base + k + 1) = row;
    }
  }
  const Eigen::VectorXd f = predict(chain);
  Eigen::MatrixXd marg(n_samples, p);
  for (int s = 0; s < n_samples; ++s) {
    const Eigen::Index base = static_cast<Eigen::Index>(s) * (p + 1);
    for (Eigen::Index k = 0; k < p; ++k)
      marg(s, orders[static_cast<std::size_t>(s)][static_cast<std::size_t>(k)]) = f(base + k + 1) - f(base + k);
  }
  ShapExplanation e;
  e.base_value = predict(background).mean();
  e.contributions = marg.colwise().mean().transpose();
  e.std_errors = Eigen::VectorXd::Zero(p);
  if (n_samples > 1) {
    const double n = static_cast<double>(n_samples);
    for (Eigen::Index j = 0; j < p; ++j) {
      const double var = (marg.col(j).array() - e.contributions(j)).square().sum() / (n - 1.0);
      e.std_errors(j) = std::sqrt(var / n);
    }
  }
  return e;
}

ImportanceReport shap_importance(const GbtModel& model, const Eigen::MatrixXd& x,
                                 const std::vector<std::string>& features) {
  check_features(features, x.cols());
  ImportanceReport rep;
  rep.method = ImportanceMethod::SHAP;
  rep.features = features;
  Eigen::VectorXd total = Eigen::VectorXd::Zero(x.cols());
  for (Eigen::Index r = 0; r < x.rows(); ++r)
    total += tree_shap(model, x.row(r).transpose()).contributions.cwiseAbs();
  if (x.rows() > 0) total /= static_cast<double>(x.rows());
  rep.scores.assign(total.data(), total.data() + total.size());
  return rep;
}

ImportanceReport shap_importance(const PredictFn& predict, const Eigen::MatrixXd& x,
                                 const Eigen::MatrixXd& background,
                                 const std::vector<std::string>& features, int n_samples,
                                 std::mt19937_64& rng) {
  check_features(features, x.cols());
  ImportanceReport rep;
  rep.method = ImportanceMethod::SHAP;
  rep.features = features;
  Eigen::VectorXd total = Eigen::VectorXd::Zero(x.cols());
  for (Eigen::Index r = 0; r < x.rows(); ++r)
    total += sampled_shap(predict, x.row(r).transpose(), background, n_samples, rng).contributions.cwiseAbs();
  if (x.rows() > 0) total /= static_cast<double>(x.rows());
  rep.scores.assign(total.data(), total.data() + total.size());
  return rep;
}

ImportanceReport gain_importance(const GbtModel& model, const std::vector<std::string>& features) {
  if (features.size() != model.n_features) throw std::invalid_argument("feature names do not match model");
  ImportanceReport rep;
  rep.method = ImportanceMethod::Gain;
  rep.features = features;
  rep.scores.assign(features.size(), 0.0);
  double total = 0.0;
  for (const auto& t : model.trees) {
    for (const auto& nd : t.nodes) {
      if (nd.is_leaf()) continue;
      rep.scores[static_cast<std::size_t>(nd.feature)] += nd.gain;
      total += nd.gain;
    }
  }
  if (total <= 0.0) {
    std::fill(rep.scores.begin(), rep.scores.end(), 0.0);
    rep.warning = "ensemble has no splits; gain importance is zero";
    return rep;
  }
  for (auto& s : rep.scores) s /= total;
  return rep;
}

ImportanceReport scaled(ImportanceReport r, double scale) {
  for (auto& s : r.scores) s *= scale;
  for (auto& s : r.std_errors) s *= std::abs(scale);
  return r;
}

std::vector<int> ranks(const std::vector<double>& scores) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return scores[a] > scores[b]; });
  std::vector<int> out(scores.size());
  for (std::size_t k = 0; k < order.size(); ++k) out[order[k]] = static_cast<int>(k + 1);
  return out;
}

std::vector<StackedRow> stacked_importance(const std::vector<ImportanceReport>& reports) {
  if (reports.empty()) return {};
  const auto& features = reports.front().features;
  std::vector<StackedRow> rows(features.size());
  for (std::size_t j = 0; j < features.size(); ++j) rows[j].feature = features[j];
  for (const auto& rep : reports) {
    if (rep.features != features) throw std::invalid_argument("stacked reports must share features");
    const auto [lo, hi] = std::minmax_element(rep.scores.begin(), rep.scores.end());
    const double range = *hi - *lo;
    for (std::size_t j = 0; j < features.size(); ++j) {
      const double v = range > 0.0 ? (rep.scores[j] - *lo) / range : 0.0;
      rows[j].normalized.push_back(v);
      rows[j].sum += v;
    }
  }
  std::stable_sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) { return a.sum > b.sum; });
  return rows;
}

void write_importance_csv(const std::filesystem::path& path,
                          const std::vector<ImportanceReport>& reports) {
  csv::Writer w(path);
  w.row({"feature", "method", "score", "rank"});
  for (const auto& rep : reports) {
    const auto rk = ranks(rep.scores);
    for (std::size_t j = 0; j < rep.features.size(); ++j)
      w.field(rep.features[j]).field(to_string(rep.method)).field(rep.scores[j]).field(rk[j]).end_row();
  }
  const auto stacked = stacked_importance(reports);
  for (std::size_t m = 0; m < reports.size(); ++m) {
    const std::string method = std::string(to_string(reports[m].method)) + "_normalized";
    std::vector<double> col;
    for (const auto& row : stacked) col.push_back(row.normalized[m]);
    const auto rk = ranks(col);
    for (std::size_t j = 0; j < stacked.size(); ++j)
      w.field(stacked[j].feature).field(method).field(col[j]).field(rk[j]).end_row();
  }
  for (std::size_t j = 0; j < stacked.size(); ++j)
    w.field(stacked[j].feature).field("sum").field(stacked[j].sum).field(j + 1).end_row();
}

} // namespace fmc
