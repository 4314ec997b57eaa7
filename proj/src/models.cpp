#include "fmc/models.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>

#include <json.hpp>

#include "fmc/errors.hpp"

namespace fmc {

using nlohmann::json;

std::string_view to_string(ModelKind k) {
  switch (k) {
    case ModelKind::LR: return "lr";
    case ModelKind::GBT: return "gbt";
    case ModelKind::MLP: return "mlp";
  }
  return "?";
}

ModelKind parse_model_kind(std::string_view s) {
  std::string lower(s);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (lower == "lr") return ModelKind::LR;
  if (lower == "gbt") return ModelKind::GBT;
  if (lower == "mlp") return ModelKind::MLP;
  throw std::invalid_argument("unknown model kind: " + std::string(s));
}

ModelKind kind_of(const AnyModel& m) { return static_cast<ModelKind>(m.index()); }

AnyModel fit_model(const ModelSpec& spec, const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                   const Eigen::MatrixXd& x_val, const Eigen::VectorXd& y_val, std::uint64_t seed) {
  switch (spec.kind) {
    case ModelKind::LR: return fit_linear(x, y);
    case ModelKind::GBT: return gbt_fit(x, y, spec.gbt, seed);
    case ModelKind::MLP: {
      MlpTrainConfig cfg = spec.mlp_train;
      cfg.seed = seed;
      return mlp_fit(x, y, x_val, y_val, spec.mlp_arch, cfg);
    }
  }
  throw std::invalid_argument("fit_model: bad kind");
}

Eigen::VectorXd predict(const AnyModel& model, const Eigen::MatrixXd& x) {
  return std::visit(
      [&](const auto& m) -> Eigen::VectorXd {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, MlpModel>) {
          return mlp_forward(m, x, MlpMode::Eval);
        } else {
          return m.predict(x);
        }
      },
      model);
}

Eigen::VectorXd predict_dataset(const ModelBundle& bundle, const Dataset& ds) {
  const auto n = static_cast<Eigen::Index>(ds.rows());
  Eigen::MatrixXd x(n, static_cast<Eigen::Index>(bundle.features.size()));
  for (std::size_t j = 0; j < bundle.features.size(); ++j) {
    const auto& name = bundle.features[j];
    const auto c = ds.find_column(name);
    if (!c) throw SchemaError("dataset lacks model feature '" + name + "'");
    const auto& sc = bundle.scaling.at(name);
    const auto& col = ds.column(*c);
    for (Eigen::Index r = 0; r < n; ++r) {
      if (!col.has(static_cast<std::size_t>(r)))
        throw EmptyDatasetError("missing value in model feature '" + name + "'");
      x(r, static_cast<Eigen::Index>(j)) = (col.values[static_cast<std::size_t>(r)] - sc.mean) / sc.std;
    }
  }
  if (fmc::schema_hash(bundle.features) != bundle.schema_hash)
    throw SchemaError("model schema hash mismatch");
  return inverse_standardize(predict(bundle.model, x), bundle.scaling, kTargetColumn);
}

namespace {

json vec_json(const double* p, Eigen::Index n) { return json(std::vector<double>(p, p + n)); }

void read_vec(const json& j, double* p, Eigen::Index n) {
  const auto v = j.get<std::vector<double>>();
  if (static_cast<Eigen::Index>(v.size()) != n) throw ParseError("model array length mismatch");
  std::copy(v.begin(), v.end(), p);
}

json tree_json(const RegressionTree& t) {
  // Pre-order dump; a node's children follow it, left subtree first.
  json out = json::array();
  std::function<void(int)> walk = [&](int i) {
    const auto& nd = t.nodes[static_cast<std::size_t>(i)];
    json jn = {{"feature", nd.feature}, {"weight", nd.weight}, {"cover", nd.cover}};
    if (!nd.is_leaf()) {
      jn["threshold"] = nd.threshold;
      jn["gain"] = nd.gain;
    }
    out.push_back(std::move(jn));
    if (!nd.is_leaf()) {
      walk(nd.left);
      walk(nd.right);
    }
  };
  if (!t.nodes.empty()) walk(0);
  return out;
}

RegressionTree tree_from_json(const json& j) {
  RegressionTree t;
  std::size_t pos = 0;
  std::function<int()> read = [&]() -> int {
    if (pos >= j.size()) throw ParseError("truncated tree dump");
    const json& jn = j[pos++];
    const int idx = static_cast<int>(t.nodes.size());
    TreeNode nd;
    nd.feature = jn.at("feature").get<int>();
    nd.weight = jn.at("weight").get<double>();
    nd.cover = jn.at("cover").get<double>();
    t.nodes.push_back(nd);
    if (nd.feature >= 0) {
      t.nodes[static_cast<std::size_t>(idx)].threshold = jn.at("threshold").get<double>();
      t.nodes[static_cast<std::size_t>(idx)].gain = jn.at("gain").get<double>();
      const int l = read();
      const int r = read();
      t.nodes[static_cast<std::size_t>(idx)].left = l;
      t.nodes[static_cast<std::size_t>(idx)].right = r;
    }
    return idx;
  };
  if (!j.empty()) read();
  if (pos != j.size()) throw ParseError("trailing nodes in tree dump");
  return t;
}

json model_json(const AnyModel& model) {
  return std::visit(
      [](const auto& m) -> json {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, LinearModel>) {
          return {{"coeffs", vec_json(m.coeffs.data(), m.coeffs.size())},
                  {"intercept", m.intercept}};
        } else if constexpr (std::is_same_v<T, GbtModel>) {
          json trees = json::array();
          for (const auto& t : m.trees) trees.push_back(tree_json(t));
          return {{"base_score", m.base_score},
                  {"learning_rate", m.learning_rate},
                  {"n_features", m.n_features},
                  {"trees", std::move(trees)}};
        } else {
          json layers = json::array();
          for (const auto& h : m.hidden) {
            // Row-major weights, out x in.
            const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> w = h.weight;
            layers.push_back({{"rows", w.rows()},
                              {"cols", w.cols()},
                              {"weight", vec_json(w.data(), w.size())},
                              {"bias", vec_json(h.bias.data(), h.bias.size())},
                              {"bn_scale", vec_json(h.bn_scale.data(), h.bn_scale.size())},
                              {"bn_shift", vec_json(h.bn_shift.data(), h.bn_shift.size())},
                              {"running_mean", vec_json(h.running_mean.data(), h.running_mean.size())},
                              {"running_var", vec_json(h.running_var.data(), h.running_var.size())}});
          }
          return {{"n_inputs", m.arch.n_inputs},
                  {"hidden_layers", m.arch.hidden_layers},
                  {"width", m.arch.width},
                  {"dropout", m.arch.dropout},
                  {"leaky_slope", m.arch.leaky_slope},
                  {"layers", std::move(layers)},
                  {"head_weight", vec_json(m.head_weight.data(), m.head_weight.size())},
                  {"head_bias", m.head_bias}};
        }
      },
      model);
}

AnyModel model_from_json(ModelKind kind, const json& j) {
  switch (kind) {
    case ModelKind::LR: {
      LinearModel m;
      const auto c = j.at("coeffs").get<std::vector<double>>();
      m.coeffs = Eigen::Map<const Eigen::VectorXd>(c.data(), static_cast<Eigen::Index>(c.size()));
      m.intercept = j.at("intercept").get<double>();
      return m;
    }
    case ModelKind::GBT: {
      GbtModel m;
      m.base_score = j.at("base_score").get<double>();
      m.learning_rate = j.at("learning_rate").get<double>();
      m.n_features = j.at("n_features").get<std::size_t>();
      for (const auto& t : j.at("trees")) m.trees.push_back(tree_from_json(t));
      return m;
    }
    case ModelKind::MLP: {
      MlpArchitecture arch;
      arch.n_inputs = j.at("n_inputs").get<std::size_t>();
      arch.hidden_layers = j.at("hidden_layers").get<std::size_t>();
      arch.width = j.at("width").get<std::size_t>();
      arch.dropout = j.at("dropout").get<double>();
      arch.leaky_slope = j.at("leaky_slope").get<double>();
      MlpModel m = MlpModel::zeros(arch);
      const auto& layers = j.at("layers");
      if (layers.size() != m.hidden.size()) throw ParseError("mlp layer count mismatch");
      for (std::size_t l = 0; l < m.hidden.size(); ++l) {
        auto& h = m.hidden[l];
        const auto& jl = layers[l];
        Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> w(h.weight.rows(),
                                                                                 h.weight.cols());
        read_vec(jl.at("weight"), w.data(), w.size());
        h.weight = w;
        read_vec(jl.at("bias"), h.bias.data(), h.bias.size());
        read_vec(jl.at("bn_scale"), h.bn_scale.data(), h.bn_scale.size());
        read_vec(jl.at("bn_shift"), h.bn_shift.data(), h.bn_shift.size());
        read_vec(jl.at("running_mean"), h.running_mean.data(), h.running_mean.size());
        read_vec(jl.at("running_var"), h.running_var.data(), h.running_var.size());
      }
      read_vec(j.at("head_weight"), m.head_weight.data(), m.head_weight.size());
      m.head_bias = j.at("head_bias").get<double>();
      return m;
    }
  }
  throw ParseError("bad model kind");
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

} // namespace

std::string serialize_model(const ModelBundle& b) {
  json scaling = json::object();
  for (const auto& [name, sc] : b.scaling.columns) scaling[name] = {{"mean", sc.mean}, {"std", sc.std}};
  json j = {{"format", "fmc-model"},
            {"version", 1},
            {"kind", std::string(to_string(kind_of(b.model)))},
            {"features", b.features},
            {"group_mask", b.mask.key()},
            {"schema_hash", hex64(b.schema_hash)},
            {"scaling", std::move(scaling)},
            {"model", model_json(b.model)}};
  return j.dump(1);
}

ModelBundle deserialize_model(const std::string& text) {
  try {
    const json j = json::parse(text);
    if (j.at("format").get<std::string>() != "fmc-model") throw ParseError("not a model file");
    ModelBundle b;
    const auto kind = parse_model_kind(j.at("kind").get<std::string>());
    b.features = j.at("features").get<std::vector<std::string>>();
    b.mask = GroupMask::parse(j.at("group_mask").get<std::string>());
    b.schema_hash = std::stoull(j.at("schema_hash").get<std::string>(), nullptr, 16);
    for (const auto& [name, sc] : j.at("scaling").items())
      b.scaling.columns[name] = {sc.at("mean").get<double>(), sc.at("std").get<double>()};
    b.model = model_from_json(kind, j.at("model"));
    return b;
  } catch (const json::exception& e) {
    throw ParseError(std::string("model file: ") + e.what());
  }
}

void save_model(const std::filesystem::path& path, const ModelBundle& bundle) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << serialize_model(bundle) << '\n';
}

ModelBundle load_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return deserialize_model(ss.str());
}

} // namespace fmc
