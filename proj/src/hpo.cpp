#include "fmc/hpo.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>
#include <stdexcept>

#include "fmc/csv.hpp"
#include "fmc/errors.hpp"
#include "fmc/splitting.hpp"

namespace fmc {

Dimension Dimension::uniform(std::string name, double lo, double hi) {
  return {std::move(name), Kind::Uniform, lo, hi, {}};
}
Dimension Dimension::log_uniform(std::string name, double lo, double hi) {
  return {std::move(name), Kind::LogUniform, lo, hi, {}};
}
Dimension Dimension::integer(std::string name, long long lo, long long hi) {
  return {std::move(name), Kind::Integer, static_cast<double>(lo), static_cast<double>(hi), {}};
}
Dimension Dimension::categorical(std::string name, std::vector<std::string> options) {
  const double n = static_cast<double>(options.size());
  return {std::move(name), Kind::Categorical, 0.0, n - 1.0, std::move(options)};
}

bool Dimension::contains(double v) const {
  if (!std::isfinite(v) || v < lo || v > hi) return false;
  if (kind == Kind::Integer || kind == Kind::Categorical) return v == std::round(v);
  return true;
}

void ParamSpace::validate() const {
  std::set<std::string> names;
  for (const auto& d : dims) {
    if (!names.insert(d.name).second) throw std::invalid_argument("duplicate dimension " + d.name);
    if (d.kind == Dimension::Kind::Categorical) {
      if (d.options.empty()) throw std::invalid_argument("empty categorical " + d.name);
      continue;
    }
    if (!(d.lo < d.hi)) throw std::invalid_argument("need lo < hi for " + d.name);
    if (d.kind == Dimension::Kind::LogUniform && !(d.lo > 0.0))
      throw std::invalid_argument("log-uniform needs lo > 0 for " + d.name);
  }
}

std::size_t ParamSpace::index(std::string_view name) const {
  for (std::size_t i = 0; i < dims.size(); ++i)
    if (dims[i].name == name) return i;
  throw std::invalid_argument("unknown dimension " + std::string(name));
}

double ParamSpace::value(const Assignment& a, std::string_view name) const { return a.at(index(name)); }

const std::string& ParamSpace::label(const Assignment& a, std::string_view name) const {
  const auto i = index(name);
  return dims[i].options.at(static_cast<std::size_t>(a.at(i)));
}

std::string ParamSpace::format(const Assignment& a, std::size_t dim) const {
  const auto& d = dims.at(dim);
  if (d.kind == Dimension::Kind::Categorical) return d.options.at(static_cast<std::size_t>(a.at(dim)));
  if (d.kind == Dimension::Kind::Integer) return std::to_string(std::llround(a.at(dim)));
  return csv::format_double(a.at(dim));
}

double ParamSpace::parse(std::size_t dim, std::string_view text) const {
  const auto& d = dims.at(dim);
  if (d.kind == Dimension::Kind::Categorical) {
    for (std::size_t k = 0; k < d.options.size(); ++k)
      if (d.options[k] == text) return static_cast<double>(k);
    throw ParseError("unknown option '" + std::string(text) + "' for " + d.name);
  }
  return csv::parse_double(text);
}

namespace {

using Kind = Dimension::Kind;

double sample_dim(const Dimension& d, std::mt19937_64& rng) {
  switch (d.kind) {
    case Kind::Uniform: return std::uniform_real_distribution<double>(d.lo, d.hi)(rng);
    case Kind::LogUniform:
      return std::exp(std::uniform_real_distribution<double>(std::log(d.lo), std::log(d.hi))(rng));
    case Kind::Integer:
      return static_cast<double>(std::uniform_int_distribution<long long>(
          std::llround(d.lo), std::llround(d.hi))(rng));
    case Kind::Categorical:
      return static_cast<double>(std::uniform_int_distribution<std::size_t>(0, d.options.size() - 1)(rng));
  }
  return d.lo;
}

/// Numeric dimensions are modelled in this internal space.
double to_internal(const Dimension& d, double v) { return d.kind == Kind::LogUniform ? std::log(v) : v; }
double from_internal(const Dimension& d, double v) {
  if (d.kind == Kind::LogUniform) return std::clamp(std::exp(v), d.lo, d.hi);
  if (d.kind == Kind::Integer) return std::clamp(std::round(v), d.lo, d.hi);
  return std::clamp(v, d.lo, d.hi);
}

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

/// Equal-weight mixture of Gaussians truncated to [lo, hi], one per observed
/// point plus a broad prior centred on the interval.
struct Parzen {
  std::vector<double> mu, sigma, mass; ///< mass = normaliser of each truncated component
  double lo = 0.0, hi = 1.0;

  Parzen(std::vector<double> points, double lo_, double hi_) : lo(lo_), hi(hi_) {
    const double span = hi - lo;
    const double prior_mu = 0.5 * (lo + hi);
    points.push_back(prior_mu);
    std::vector<std::size_t> order(points.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return points[a] < points[b]; });
    const std::size_t prior_idx = points.size() - 1;
    const double min_sigma = span / std::min(100.0, static_cast<double>(points.size()));
    for (std::size_t k = 0; k < order.size(); ++k) {
      const double x = points[order[k]];
      double s;
      if (order[k] == prior_idx) {
        s = span;
      } else {
        const double left = k == 0 ? x - lo : x - points[order[k - 1]];
        const double right = k + 1 == order.size() ? hi - x : points[order[k + 1]] - x;
        s = std::clamp(std::max(left, right), min_sigma, span);
      }
      mu.push_back(x);
      sigma.push_back(s);
      mass.push_back(std::max(normal_cdf((hi - x) / s) - normal_cdf((lo - x) / s), 1e-300));
    }
  }

  double log_density(double x) const {
    double sum = 0.0;
    for (std::size_t k = 0; k < mu.size(); ++k) {
      const double z = (x - mu[k]) / sigma[k];
      sum += std::exp(-0.5 * z * z) / (sigma[k] * mass[k]);
    }
    return std::log(std::max(sum / static_cast<double>(mu.size()), 1e-300)) -
           0.5 * std::log(2.0 * std::numbers::pi);
  }

  double sample(std::mt19937_64& rng) const {
    const auto k = std::uniform_int_distribution<std::size_t>(0, mu.size() - 1)(rng);
    std::normal_distribution<double> nd(mu[k], sigma[k]);
    for (int attempt = 0; attempt < 64; ++attempt) {
      const double x = nd(rng);
      if (x >= lo && x <= hi) return x;
    }
    return std::clamp(mu[k], lo, hi);
  }
};

double suggest_numeric(const Dimension& d, const std::vector<double>& good, const std::vector<double>& bad,
                       std::size_t n_candidates, std::mt19937_64& rng) {
  const double lo = to_internal(d, d.lo), hi = to_internal(d, d.hi);
  auto internal = [&](const std::vector<double>& v) {
    std::vector<double> out;
    out.reserve(v.size());
    for (double x : v) out.push_back(to_internal(d, x));
    return out;
  };
  const Parzen l(internal(good), lo, hi);
  const Parzen g(internal(bad), lo, hi);
  double best = 0.0, best_score = -std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < n_candidates; ++c) {
    const double x = l.sample(rng);
    const double score = l.log_density(x) - g.log_density(x);
    if (score > best_score) {
      best_score = score;
      best = x;
    }
  }
  return from_internal(d, best);
}

double suggest_categorical(const Dimension& d, const std::vector<double>& good,
                           const std::vector<double>& bad, std::size_t n_candidates,
                           std::mt19937_64& rng) {
  const std::size_t k = d.options.size();
  std::vector<double> pl(k, 1.0), pg(k, 1.0); // one prior count per option
  for (double v : good) pl[static_cast<std::size_t>(v)] += 1.0;
  for (double v : bad) pg[static_cast<std::size_t>(v)] += 1.0;
  std::discrete_distribution<std::size_t> draw(pl.begin(), pl.end());
  const double sl = static_cast<double>(good.size() + k), sg = static_cast<double>(bad.size() + k);
  std::size_t best = 0;
  double best_score = -std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < n_candidates; ++c) {
    const auto x = draw(rng);
    const double score = std::log(pl[x] / sl) - std::log(pg[x] / sg);
    if (score > best_score) {
      best_score = score;
      best = x;
    }
  }
  return static_cast<double>(best);
}

} // namespace

Assignment sample_random(const ParamSpace& space, std::mt19937_64& rng) {
  Assignment a;
  a.reserve(space.dims.size());
  for (const auto& d : space.dims) a.push_back(sample_dim(d, rng));
  return a;
}

Assignment tpe_suggest(const TpeState& state, const ParamSpace& space, std::mt19937_64& rng) {
  if (!(state.gamma_q > 0.0 && state.gamma_q < 1.0)) throw std::invalid_argument("gamma_q in (0,1)");
  std::vector<const Trial*> done;
  for (const auto& t : state.history)
    if (t.status == TrialStatus::Complete) done.push_back(&t);
  if (done.size() < 2) throw InsufficientHistoryError("TPE needs at least 2 complete trials");
  std::stable_sort(done.begin(), done.end(),
                   [](const Trial* a, const Trial* b) { return a->objective < b->objective; });
  if (done.front()->objective == done.back()->objective) return sample_random(space, rng);

  const auto n = done.size();
  auto n_good = static_cast<std::size_t>(std::ceil(state.gamma_q * static_cast<double>(n)));
  n_good = std::clamp<std::size_t>(n_good, 1, n - 1);

  Assignment out;
  for (std::size_t j = 0; j < space.dims.size(); ++j) {
    std::vector<double> good, bad;
    for (std::size_t i = 0; i < n; ++i) (i < n_good ? good : bad).push_back(done[i]->params.at(j));
    const auto& d = space.dims[j];
    out.push_back(d.kind == Kind::Categorical
                      ? suggest_categorical(d, good, bad, state.n_candidates, rng)
                      : suggest_numeric(d, good, bad, state.n_candidates, rng));
  }
  return out;
}

std::optional<std::size_t> best_trial(const std::vector<Trial>& history) {
  std::optional<std::size_t> best;
  for (std::size_t i = 0; i < history.size(); ++i) {
    if (history[i].status != TrialStatus::Complete) continue;
    if (!best || history[i].objective < history[*best].objective) best = i;
  }
  return best;
}

OptimizeResult optimize(const ObjectiveFn& objective, const ParamSpace& space,
                        const OptimizeOptions& opt) {
  space.validate();
  TpeState state;
  state.gamma_q = opt.gamma_q;
  state.n_candidates = opt.n_candidates;
  state.history = opt.resume;
  for (std::size_t i = state.history.size(); i < opt.n_trials; ++i) {
    std::mt19937_64 rng(derive_seed(opt.seed, i));
    std::size_t complete = 0;
    for (const auto& t : state.history) complete += t.status == TrialStatus::Complete;
    const bool random = i < opt.n_random || complete < 2;
    Trial trial;
    trial.id = i;
    trial.params = random ? sample_random(space, rng) : tpe_suggest(state, space, rng);
    try {
      const auto value = objective(trial.params);
      if (value && std::isfinite(*value)) {
        trial.objective = *value;
        trial.status = TrialStatus::Complete;
      }
    } catch (const Error&) {
      trial.status = TrialStatus::Failed;
    }
    if (trial.status == TrialStatus::Failed) trial.objective = std::numeric_limits<double>::quiet_NaN();
    state.history.push_back(std::move(trial));
    if (opt.on_trial) opt.on_trial(state.history);
  }
  const auto best = best_trial(state.history);
  if (!best) throw NoSuccessfulTrialError("every HPO trial failed");
  return {state.history[*best], std::move(state.history)};
}

void write_history_csv(const std::filesystem::path& path, const ParamSpace& space,
                       const std::vector<Trial>& history) {
  csv::Writer w(path);
  w.field("trial_id").field("status").field("objective");
  for (const auto& d : space.dims) w.field(d.name);
  w.end_row();
  for (const auto& t : history) {
    w.field(t.id).field(t.status == TrialStatus::Complete ? "complete" : "failed");
    if (t.status == TrialStatus::Complete)
      w.field(t.objective);
    else
      w.field(std::string_view{});
    for (std::size_t j = 0; j < space.dims.size(); ++j) w.field(space.format(t.params, j));
    w.end_row();
  }
}

std::vector<Trial> read_history_csv(const std::filesystem::path& path, const ParamSpace& space) {
  csv::Reader r(path);
  const auto c_id = r.column("trial_id"), c_status = r.column("status"), c_obj = r.column("objective");
  std::vector<std::size_t> cols;
  for (const auto& d : space.dims) cols.push_back(r.column(d.name));
  std::vector<Trial> out;
  std::vector<std::string_view> f;
  while (r.next(f)) {
    Trial t;
    t.id = static_cast<std::size_t>(csv::parse_int(f[c_id]));
    if (f[c_status] == "complete") {
      t.status = TrialStatus::Complete;
      t.objective = csv::parse_double(f[c_obj]);
    } else if (f[c_status] == "failed") {
      t.objective = std::numeric_limits<double>::quiet_NaN();
    } else {
      throw ParseError("bad trial status at line " + std::to_string(r.line_number()));
    }
    for (std::size_t j = 0; j < cols.size(); ++j) t.params.push_back(space.parse(j, f[cols[j]]));
    if (t.id != out.size()) throw ParseError("trial ids must be 0..n-1 in order");
    out.push_back(std::move(t));
  }
  return out;
}

ParamSpace default_gbt_space() {
  return {{Dimension::log_uniform("learning_rate", 1e-3, 0.5), Dimension::uniform("gamma", 0.0, 10.0),
           Dimension::integer("max_depth", 2, 12), Dimension::integer("n_estimators", 50, 1000),
           Dimension::uniform("subsample", 0.5, 1.0), Dimension::uniform("colsample_bytree", 0.5, 1.0)}};
}

ParamSpace default_mlp_space() {
  return {{Dimension::integer("hidden_layers", 1, 8), Dimension::integer("width", 16, 8192),
           Dimension::log_uniform("learning_rate", 1e-5, 1e-2),
           Dimension::categorical("batch_size", {"128", "512", "2048"}),
           Dimension::log_uniform("l2_penalty", 1e-8, 1e-2),
           Dimension::categorical("loss", {"MAE", "MSE", "Huber", "LogCosh"})}};
}

ModelSpec apply_assignment(const ModelSpec& spec, const ParamSpace& space, const Assignment& a) {
  ModelSpec out = spec;
  for (std::size_t j = 0; j < space.dims.size(); ++j) {
    const auto& name = space.dims[j].name;
    const double v = a.at(j);
    if (out.kind == ModelKind::GBT) {
      if (name == "learning_rate") out.gbt.learning_rate = v;
      else if (name == "gamma") out.gbt.gamma = v;
      else if (name == "max_depth") out.gbt.max_depth = static_cast<int>(std::llround(v));
      else if (name == "n_estimators") out.gbt.n_estimators = static_cast<int>(std::llround(v));
      else if (name == "subsample") out.gbt.subsample = v;
      else if (name == "colsample_bytree") out.gbt.colsample_bytree = v;
      else if (name == "l2_leaf") out.gbt.l2_leaf = v;
      else throw std::invalid_argument("dimension " + name + " does not apply to gbt");
    } else if (out.kind == ModelKind::MLP) {
      if (name == "hidden_layers") out.mlp_arch.hidden_layers = static_cast<std::size_t>(std::llround(v));
      else if (name == "width") out.mlp_arch.width = static_cast<std::size_t>(std::llround(v));
      else if (name == "dropout") out.mlp_arch.dropout = v;
      else if (name == "learning_rate") out.mlp_train.learning_rate = v;
      else if (name == "batch_size")
        out.mlp_train.batch_size = static_cast<std::size_t>(std::stoul(space.format(a, j)));
      else if (name == "l2_penalty") out.mlp_train.l2_penalty = v;
      else if (name == "loss") out.mlp_train.loss = parse_loss_kind(space.format(a, j));
      else throw std::invalid_argument("dimension " + name + " does not apply to mlp");
    } else {
      throw std::invalid_argument("linear regression has no hyperparameters");
    }
  }
  return out;
}

} // namespace fmc
