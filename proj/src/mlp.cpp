#include "fmc/mlp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "fmc/errors.hpp"

namespace fmc {

namespace {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

struct LayerCache {
  Mat input; ///< features x batch
  Mat pre;   ///< W a + b
  Mat normed;
  Mat mask; ///< empty when dropout is inactive
  Vec inv_std;
  Vec batch_mean;
  Vec batch_var;
};

struct ForwardCache {
  std::vector<LayerCache> layers;
  Mat last; ///< input to the head
};

Eigen::RowVectorXd forward(const MlpModel& m, const Mat& a0, MlpMode mode, std::mt19937_64* rng,
                           ForwardCache* cache) {
  Mat a = a0;
  const double slope = m.arch.leaky_slope;
  const bool drop = mode == MlpMode::Train && m.arch.dropout > 0.0;
  if (drop && !rng) throw std::invalid_argument("mlp_forward: dropout needs an rng");
  if (cache) cache->layers.resize(m.hidden.size());
  for (std::size_t l = 0; l < m.hidden.size(); ++l) {
    const auto& layer = m.hidden[l];
    Mat pre = (layer.weight * a).colwise() + layer.bias;
    Mat act = pre.unaryExpr([slope](double z) { return z > 0.0 ? z : slope * z; });
    Vec mean, var;
    if (mode == MlpMode::Train) {
      mean = act.rowwise().mean();
      var = (act.colwise() - mean).array().square().rowwise().mean();
    } else {
      mean = layer.running_mean;
      var = layer.running_var;
    }
    const Vec inv_std = (var.array() + kBatchNormEpsilon).rsqrt();
    Mat normed = ((act.colwise() - mean).array().colwise() * inv_std.array()).matrix();
    Mat out = ((normed.array().colwise() * layer.bn_scale.array()).colwise() +
               layer.bn_shift.array())
                  .matrix();
    Mat mask;
    if (drop) {
      const double keep = 1.0 - m.arch.dropout;
      std::bernoulli_distribution coin(keep);
      mask.resize(out.rows(), out.cols());
      for (Eigen::Index j = 0; j < mask.cols(); ++j)
        for (Eigen::Index i = 0; i < mask.rows(); ++i) mask(i, j) = coin(*rng) ? 1.0 / keep : 0.0;
      out.array() *= mask.array();
    }
    if (cache) {
      auto& c = cache->layers[l];
      c.input = std::move(a);
      c.pre = std::move(pre);
      c.normed = std::move(normed);
      c.mask = std::move(mask);
      c.inv_std = inv_std;
      c.batch_mean = std::move(mean);
      c.batch_var = std::move(var);
    }
    a = std::move(out);
  }
  Eigen::RowVectorXd y = (m.head_weight * a).array() + m.head_bias;
  if (cache) cache->last = std::move(a);
  return y;
}

MlpGradients backward(const MlpModel& m, const ForwardCache& cache,
                      const Eigen::RowVectorXd& dout, MlpMode mode, double l2) {
  MlpGradients g;
  g.hidden.resize(m.hidden.size());
  g.head_weight = dout * cache.last.transpose() + l2 * m.head_weight;
  g.head_bias = dout.sum();
  Mat da = m.head_weight.transpose() * dout;
  const double slope = m.arch.leaky_slope;
  for (std::size_t li = m.hidden.size(); li-- > 0;) {
    const auto& layer = m.hidden[li];
    const auto& c = cache.layers[li];
    auto& gl = g.hidden[li];
    if (c.mask.size() > 0) da.array() *= c.mask.array();
    gl.bn_scale = (da.array() * c.normed.array()).rowwise().sum();
    gl.bn_shift = da.rowwise().sum();
    Mat dn = (da.array().colwise() * layer.bn_scale.array()).matrix();
    Mat dh;
    if (mode == MlpMode::Train) {
      const double bm = static_cast<double>(dn.cols());
      const Vec sum_dn = dn.rowwise().sum();
      const Vec sum_dn_n = (dn.array() * c.normed.array()).rowwise().sum();
      dh = ((dn.array() * bm).colwise() - sum_dn.array() -
            c.normed.array().colwise() * sum_dn_n.array())
               .matrix();
      dh = (dh.array().colwise() * (c.inv_std.array() / bm)).matrix();
    } else {
      dh = (dn.array().colwise() * c.inv_std.array()).matrix();
    }
    Mat dz = dh.binaryExpr(c.pre, [slope](double d, double z) { return z > 0.0 ? d : slope * d; });
    gl.weight = dz * c.input.transpose() + l2 * layer.weight;
    gl.bias = dz.rowwise().sum();
    if (li > 0) da = layer.weight.transpose() * dz;
  }
  return g;
}

double weight_norm_sq(const MlpModel& m) {
  double s = m.head_weight.squaredNorm();
  for (const auto& l : m.hidden) s += l.weight.squaredNorm();
  return s;
}

} // namespace

MlpModel MlpModel::initialize(const MlpArchitecture& arch, std::uint64_t seed) {
  if (arch.n_inputs == 0 || arch.width == 0) throw std::invalid_argument("mlp: empty layer");
  if (!(arch.dropout >= 0.0 && arch.dropout < 1.0)) throw std::invalid_argument("mlp: dropout in [0,1)");
  MlpModel m;
  m.arch = arch;
  std::mt19937_64 rng(seed);
  std::size_t fan_in = arch.n_inputs;
  auto uniform = [&](double bound) {
    std::uniform_real_distribution<double> u(-bound, bound);
    return u(rng);
  };
  for (std::size_t l = 0; l < arch.hidden_layers; ++l) {
    Hidden h;
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    const auto out = static_cast<Eigen::Index>(arch.width);
    h.weight.resize(out, static_cast<Eigen::Index>(fan_in));
    for (Eigen::Index j = 0; j < h.weight.cols(); ++j)
      for (Eigen::Index i = 0; i < out; ++i) h.weight(i, j) = uniform(bound);
    h.bias.resize(out);
    for (Eigen::Index i = 0; i < out; ++i) h.bias(i) = uniform(bound);
    h.bn_scale = Vec::Ones(out);
    h.bn_shift = Vec::Zero(out);
    h.running_mean = Vec::Zero(out);
    h.running_var = Vec::Ones(out);
    m.hidden.push_back(std::move(h));
    fan_in = arch.width;
  }
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  m.head_weight.resize(static_cast<Eigen::Index>(fan_in));
  for (Eigen::Index i = 0; i < m.head_weight.size(); ++i) m.head_weight(i) = uniform(bound);
  m.head_bias = uniform(bound);
  return m;
}

MlpModel MlpModel::zeros(const MlpArchitecture& arch) {
  MlpModel m = initialize(arch, 0);
  for (auto& h : m.hidden) {
    h.weight.setZero();
    h.bias.setZero();
    h.bn_shift.setZero();
  }
  m.head_weight.setZero();
  m.head_bias = 0.0;
  return m;
}

std::size_t MlpModel::parameter_count() const {
  std::size_t n = static_cast<std::size_t>(head_weight.size()) + 1;
  for (const auto& h : hidden) {
    n += static_cast<std::size_t>(h.weight.size() + h.bias.size() + h.bn_scale.size() +
                                  h.bn_shift.size());
  }
  return n;
}

Eigen::VectorXd mlp_forward(const MlpModel& model, const Eigen::MatrixXd& x, MlpMode mode,
                            std::mt19937_64* rng) {
  if (static_cast<std::size_t>(x.cols()) != model.arch.n_inputs)
    throw std::invalid_argument("mlp_forward: input width mismatch");
  if (mode == MlpMode::Train) {
    return forward(model, x.transpose(), mode, rng, nullptr).transpose();
  }
  constexpr Eigen::Index kChunk = 4096;
  Eigen::VectorXd out(x.rows());
  for (Eigen::Index start = 0; start < x.rows(); start += kChunk) {
    const auto len = std::min(kChunk, x.rows() - start);
    out.segment(start, len) =
        forward(model, x.middleRows(start, len).transpose(), mode, nullptr, nullptr).transpose();
  }
  return out;
}

MlpLossGrad mlp_loss_and_gradients(const MlpModel& model, const Eigen::MatrixXd& x,
                                   const Eigen::VectorXd& y, LossKind loss, MlpMode mode, double l2,
                                   std::mt19937_64* rng) {
  if (x.rows() != y.size()) throw std::invalid_argument("mlp: X/y mismatch");
  ForwardCache cache;
  const Eigen::RowVectorXd pred = forward(model, x.transpose(), mode, rng, &cache);
  const auto lg = loss_and_grad(loss, std::span<const double>(pred.data(), static_cast<std::size_t>(pred.size())),
                                std::span<const double>(y.data(), static_cast<std::size_t>(y.size())));
  const Eigen::RowVectorXd dout =
      Eigen::Map<const Eigen::RowVectorXd>(lg.grad.data(), static_cast<Eigen::Index>(lg.grad.size()));
  MlpLossGrad out;
  out.loss = lg.loss + 0.5 * l2 * weight_norm_sq(model);
  out.grad = backward(model, cache, dout, mode, l2);
  return out;
}

namespace {

template <class Model, class Fn>
void visit_blocks(Model& m, Fn&& fn) {
  for (auto& h : m.hidden) {
    fn(h.weight.data(), h.weight.size());
    fn(h.bias.data(), h.bias.size());
    fn(h.bn_scale.data(), h.bn_scale.size());
    fn(h.bn_shift.data(), h.bn_shift.size());
  }
  fn(m.head_weight.data(), m.head_weight.size());
  fn(&m.head_bias, Eigen::Index{1});
}

} // namespace

Eigen::VectorXd flatten_parameters(const MlpModel& model) {
  std::vector<double> flat;
  visit_blocks(model, [&](const double* p, Eigen::Index n) { flat.insert(flat.end(), p, p + n); });
  return Eigen::Map<Eigen::VectorXd>(flat.data(), static_cast<Eigen::Index>(flat.size()));
}

void assign_parameters(MlpModel& model, const Eigen::VectorXd& flat) {
  Eigen::Index pos = 0;
  visit_blocks(model, [&](double* p, Eigen::Index n) {
    if (pos + n > flat.size()) throw std::invalid_argument("assign_parameters: size mismatch");
    std::copy(flat.data() + pos, flat.data() + pos + n, p);
    pos += n;
  });
  if (pos != flat.size()) throw std::invalid_argument("assign_parameters: size mismatch");
}

Eigen::VectorXd flatten_gradients(const MlpGradients& grad) {
  std::vector<double> flat;
  visit_blocks(grad, [&](const double* p, Eigen::Index n) { flat.insert(flat.end(), p, p + n); });
  return Eigen::Map<Eigen::VectorXd>(flat.data(), static_cast<Eigen::Index>(flat.size()));
}

namespace {

double rmse_of(const Eigen::VectorXd& pred, const Eigen::VectorXd& y) {
  return std::sqrt((pred - y).squaredNorm() / static_cast<double>(y.size()));
}

/// Adam state for one parameter block.
struct AdamBlock {
  Eigen::VectorXd m, v;
};

} // namespace

MlpModel mlp_fit(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const Eigen::MatrixXd& x_val,
                 const Eigen::VectorXd& y_val, const MlpArchitecture& arch_in,
                 const MlpTrainConfig& cfg, MlpFitReport* report) {
  MlpArchitecture arch = arch_in;
  arch.n_inputs = static_cast<std::size_t>(x.cols());
  const auto n = static_cast<std::size_t>(x.rows());
  if (n < 2) throw TooSmallDatasetError("mlp_fit: need at least 2 rows");
  if (x_val.rows() == 0) throw TooSmallDatasetError("mlp_fit: empty validation set");
  const std::size_t batch = std::clamp<std::size_t>(cfg.batch_size, 2, n);

  MlpModel model = MlpModel::initialize(arch, cfg.seed);
  std::mt19937_64 rng(cfg.seed ^ 0x5deece66dull);

  std::vector<AdamBlock> state;
  visit_blocks(model, [&](const double*, Eigen::Index k) {
    state.push_back({Eigen::VectorXd::Zero(k), Eigen::VectorXd::Zero(k)});
  });
  constexpr double beta1 = 0.9, beta2 = 0.999, adam_eps = 1e-8;
  std::size_t step = 0;
  double lr = cfg.learning_rate;

  MlpFitReport rep;
  MlpModel best = model;
  double best_rmse = std::numeric_limits<double>::infinity();
  double plateau_ref = best_rmse;
  std::size_t since_best = 0, since_plateau = 0;

  std::vector<Eigen::Index> order(n);
  std::iota(order.begin(), order.end(), 0);
  for (std::size_t epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start + 1 < n; start += batch) {
      const std::size_t len = std::min(batch, n - start);
      if (len < 2) break;
      std::vector<Eigen::Index> idx(order.begin() + static_cast<std::ptrdiff_t>(start),
                                    order.begin() + static_cast<std::ptrdiff_t>(start + len));
      const Eigen::MatrixXd xb = x(idx, Eigen::all);
      const Eigen::VectorXd yb = y(idx);

      ForwardCache cache;
      const Eigen::RowVectorXd pred = forward(model, xb.transpose(), MlpMode::Train, &rng, &cache);
      const auto lg = loss_and_grad(
          cfg.loss, std::span<const double>(pred.data(), len),
          std::span<const double>(yb.data(), len));
      if (!std::isfinite(lg.loss)) throw TrainingDivergedError(epoch);
      const Eigen::RowVectorXd dout =
          Eigen::Map<const Eigen::RowVectorXd>(lg.grad.data(), static_cast<Eigen::Index>(len));
      const auto grads = backward(model, cache, dout, MlpMode::Train, cfg.l2_penalty);

      ++step;
      const double c1 = 1.0 - std::pow(beta1, static_cast<double>(step));
      const double c2 = 1.0 - std::pow(beta2, static_cast<double>(step));
      std::vector<const double*> gptr;
      visit_blocks(grads, [&](const double* p, Eigen::Index) { gptr.push_back(p); });
      std::size_t b = 0;
      visit_blocks(model, [&](double* p, Eigen::Index k) {
        Eigen::Map<Eigen::VectorXd> w(p, k);
        Eigen::Map<const Eigen::VectorXd> g(gptr[b], k);
        auto& s = state[b];
        s.m = beta1 * s.m + (1.0 - beta1) * g;
        s.v = beta2 * s.v + (1.0 - beta2) * g.cwiseAbs2();
        w.array() -= lr * (s.m.array() / c1) / ((s.v.array() / c2).sqrt() + adam_eps);
        ++b;
      });
      for (std::size_t l = 0; l < model.hidden.size(); ++l) {
        auto& h = model.hidden[l];
        const auto& c = cache.layers[l];
        h.running_mean = kBatchNormMomentum * h.running_mean + (1.0 - kBatchNormMomentum) * c.batch_mean;
        h.running_var = kBatchNormMomentum * h.running_var + (1.0 - kBatchNormMomentum) * c.batch_var;
      }
      epoch_loss += lg.loss;
      ++batches;
    }
    const double val = rmse_of(mlp_forward(model, x_val, MlpMode::Eval), y_val);
    if (!std::isfinite(val)) throw TrainingDivergedError(epoch);
    rep.train_loss.push_back(batches ? epoch_loss / static_cast<double>(batches) : 0.0);
    rep.val_rmse.push_back(val);
    rep.learning_rate.push_back(lr);

    // Relative improvement threshold of 1e-4, as in common plateau schedulers.
    if (val < best_rmse * (1.0 - 1e-4)) {
      best_rmse = val;
      best = model;
      rep.best_epoch = epoch;
      since_best = 0;
    } else {
      ++since_best;
    }
    if (val < plateau_ref * (1.0 - 1e-4)) {
      plateau_ref = val;
      since_plateau = 0;
    } else if (++since_plateau > cfg.plateau_patience) {
      lr *= kPlateauFactor;
      since_plateau = 0;
    }
    if (since_best >= cfg.early_stop_patience) break;
  }
  rep.best_val_rmse = best_rmse;
  if (report) *report = std::move(rep);
  return best;
}

} // namespace fmc
