#include "fmc/gbt.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>

namespace fmc {

double RegressionTree::leaf_value(const double* x) const {
  int i = 0;
  while (!nodes[static_cast<std::size_t>(i)].is_leaf()) {
    const auto& n = nodes[static_cast<std::size_t>(i)];
    i = x[n.feature] < n.threshold ? n.left : n.right;
  }
  return nodes[static_cast<std::size_t>(i)].weight;
}

int RegressionTree::depth() const {
  std::vector<int> d(nodes.size(), 0);
  int best = 0;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const auto& n = nodes[i];
    if (n.is_leaf()) continue;
    d[static_cast<std::size_t>(n.left)] = d[i] + 1;
    d[static_cast<std::size_t>(n.right)] = d[i] + 1;
    best = std::max(best, d[i] + 1);
  }
  return best;
}

void GbtConfig::validate() const {
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate))
    throw std::invalid_argument("gbt: learning_rate must be positive");
  if (!(gamma >= 0.0)) throw std::invalid_argument("gbt: gamma must be >= 0");
  if (max_depth < 0) throw std::invalid_argument("gbt: max_depth must be >= 0");
  if (n_estimators < 0) throw std::invalid_argument("gbt: n_estimators must be >= 0");
  if (!(subsample > 0.0 && subsample <= 1.0))
    throw std::invalid_argument("gbt: subsample must be in (0, 1]");
  if (!(colsample_bytree > 0.0 && colsample_bytree <= 1.0))
    throw std::invalid_argument("gbt: colsample_bytree must be in (0, 1]");
  if (!(l2_leaf >= 0.0)) throw std::invalid_argument("gbt: l2_leaf must be >= 0");
}

double split_threshold(double lo, double hi) {
  const double mid = lo + (hi - lo) / 2.0;
  return mid > lo ? mid : hi;
}

double GbtModel::predict_row(const double* x) const {
  double s = 0.0;
  for (const auto& t : trees) s += t.leaf_value(x);
  return base_score + learning_rate * s;
}

Eigen::VectorXd GbtModel::predict(const Eigen::MatrixXd& x) const {
  if (static_cast<std::size_t>(x.cols()) != n_features)
    throw std::invalid_argument("gbt predict: feature count mismatch");
  const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> xr = x;
  Eigen::VectorXd out(x.rows());
  for (Eigen::Index r = 0; r < x.rows(); ++r) out(r) = predict_row(xr.row(r).data());
  return out;
}

Eigen::VectorXd gbt_predict(const GbtModel& model, const Eigen::MatrixXd& x) {
  return model.predict(x);
}

namespace {

struct Candidate {
  double gain = -std::numeric_limits<double>::infinity();
  int feature = -1;
  double threshold = 0.0;
};

/// Gains within kGainTieTolerance (relative) of the incumbent are ties; the
/// earlier feature and threshold keep the node.
bool better_gain(double gain, const Candidate& best) {
  if (best.feature < 0) return true;
  return gain > best.gain + kGainTieTolerance * std::abs(best.gain);
}

/// Level-wise exact greedy tree growth over presorted feature orders.
RegressionTree grow_tree(const Eigen::MatrixXd& x, const std::vector<std::vector<int>>& order,
                         const std::vector<double>& grad, const std::vector<int>& rows,
                         const std::vector<int>& features, const GbtConfig& cfg) {
  const auto n = static_cast<std::size_t>(x.rows());
  const double lambda = cfg.l2_leaf;
  RegressionTree tree;
  std::vector<int> node_of(n, -1);
  for (int r : rows) node_of[static_cast<std::size_t>(r)] = 0;

  std::vector<double> g_sum(1, 0.0), h_sum(1, 0.0);
  for (int r : rows) {
    g_sum[0] += grad[static_cast<std::size_t>(r)];
    h_sum[0] += 1.0;
  }
  tree.nodes.push_back({});
  tree.nodes[0].cover = h_sum[0];
  tree.nodes[0].weight = -g_sum[0] / (h_sum[0] + lambda);

  std::vector<int> frontier = {0};
  for (int depth = 0; depth < cfg.max_depth && !frontier.empty(); ++depth) {
    const std::size_t n_nodes = tree.nodes.size();
    std::vector<char> active(n_nodes, 0);
    for (int nd : frontier) active[static_cast<std::size_t>(nd)] = 1;
    std::vector<Candidate> best(n_nodes);
    std::vector<double> gl(n_nodes), hl(n_nodes), last(n_nodes);
    std::vector<char> seen(n_nodes);

    for (int f : features) {
      std::fill(gl.begin(), gl.end(), 0.0);
      std::fill(hl.begin(), hl.end(), 0.0);
      std::fill(seen.begin(), seen.end(), 0);
      const double* col = x.col(f).data();
      for (int r : order[static_cast<std::size_t>(f)]) {
        const int nd = node_of[static_cast<std::size_t>(r)];
        if (nd < 0 || !active[static_cast<std::size_t>(nd)]) continue;
        const auto k = static_cast<std::size_t>(nd);
        const double v = col[r];
        if (seen[k] && v > last[k]) {
          const double gain = split_gain(gl[k], hl[k], g_sum[k], h_sum[k], lambda);
          if (better_gain(gain, best[k])) best[k] = {gain, f, split_threshold(last[k], v)};
        }
        gl[k] += grad[static_cast<std::size_t>(r)];
        hl[k] += 1.0;
        last[k] = v;
        seen[k] = 1;
      }
    }

    std::vector<int> next;
    for (int nd : frontier) {
      const auto k = static_cast<std::size_t>(nd);
      if (best[k].feature < 0 || !(best[k].gain - cfg.gamma > kMinSplitGain)) continue;
      const int left = static_cast<int>(tree.nodes.size());
      tree.nodes.push_back({});
      tree.nodes.push_back({});
      auto& node = tree.nodes[k];
      node.feature = best[k].feature;
      node.threshold = best[k].threshold;
      node.gain = best[k].gain;
      node.left = left;
      node.right = left + 1;
      next.push_back(left);
      next.push_back(left + 1);
    }
    if (next.empty()) break;

    g_sum.assign(tree.nodes.size(), 0.0);
    h_sum.assign(tree.nodes.size(), 0.0);
    for (int r : rows) {
      auto& nd = node_of[static_cast<std::size_t>(r)];
      const auto& node = tree.nodes[static_cast<std::size_t>(nd)];
      if (!node.is_leaf() && node.left >= static_cast<int>(n_nodes)) {
        nd = x(r, node.feature) < node.threshold ? node.left : node.right;
      }
      g_sum[static_cast<std::size_t>(nd)] += grad[static_cast<std::size_t>(r)];
      h_sum[static_cast<std::size_t>(nd)] += 1.0;
    }
    for (int nd : next) {
      auto& node = tree.nodes[static_cast<std::size_t>(nd)];
      node.cover = h_sum[static_cast<std::size_t>(nd)];
      node.weight = -g_sum[static_cast<std::size_t>(nd)] / (node.cover + lambda);
    }
    frontier = std::move(next);
  }
  return tree;
}

} // namespace

GbtModel gbt_fit(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const GbtConfig& cfg,
                 std::uint64_t seed, std::vector<double>* round_rmse) {
  cfg.validate();
  const auto n = static_cast<std::size_t>(x.rows());
  const auto p = static_cast<std::size_t>(x.cols());
  if (n < 2) throw std::invalid_argument("gbt_fit: need at least 2 rows");
  if (static_cast<std::size_t>(y.size()) != n) throw std::invalid_argument("gbt_fit: X/y mismatch");

  GbtModel model;
  model.base_score = y.mean();
  model.learning_rate = cfg.learning_rate;
  model.n_features = p;

  std::vector<std::vector<int>> order(p, std::vector<int>(n));
  for (std::size_t f = 0; f < p; ++f) {
    auto& o = order[f];
    std::iota(o.begin(), o.end(), 0);
    const double* col = x.col(static_cast<Eigen::Index>(f)).data();
    std::stable_sort(o.begin(), o.end(), [col](int a, int b) { return col[a] < col[b]; });
  }

  const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> xr = x;
  std::vector<double> pred(n, model.base_score);
  std::vector<double> grad(n);
  std::mt19937_64 rng(seed);
  std::vector<int> all_rows(n);
  std::iota(all_rows.begin(), all_rows.end(), 0);
  std::vector<int> all_features(p);
  std::iota(all_features.begin(), all_features.end(), 0);

  for (int round = 0; round < cfg.n_estimators; ++round) {
    for (std::size_t i = 0; i < n; ++i) grad[i] = pred[i] - y(static_cast<Eigen::Index>(i));

    std::vector<int> rows = all_rows;
    if (cfg.subsample < 1.0) {
      const auto m = std::max<std::size_t>(
          1, static_cast<std::size_t>(std::llround(cfg.subsample * static_cast<double>(n))));
      std::shuffle(rows.begin(), rows.end(), rng);
      rows.resize(m);
      std::sort(rows.begin(), rows.end());
    }
    std::vector<int> features = all_features;
    if (cfg.colsample_bytree < 1.0) {
      const auto m = std::max<std::size_t>(
          1, static_cast<std::size_t>(std::floor(cfg.colsample_bytree * static_cast<double>(p))));
      std::shuffle(features.begin(), features.end(), rng);
      features.resize(m);
      std::sort(features.begin(), features.end());
    }

    auto tree = grow_tree(x, order, grad, rows, features, cfg);
    double sse = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      pred[i] += cfg.learning_rate * tree.leaf_value(xr.row(static_cast<Eigen::Index>(i)).data());
      const double r = pred[i] - y(static_cast<Eigen::Index>(i));
      sse += r * r;
    }
    if (round_rmse) round_rmse->push_back(std::sqrt(sse / static_cast<double>(n)));
    model.trees.push_back(std::move(tree));
  }
  return model;
}

} // namespace fmc
