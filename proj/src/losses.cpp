#include "fmc/losses.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace fmc {

std::string_view to_string(LossKind k) {
  switch (k) {
  case LossKind::MAE:
    return "MAE";
  case LossKind::MSE:
    return "MSE";
  case LossKind::Huber:
    return "Huber";
  case LossKind::LogCosh:
    return "LogCosh";
  }
  return "?";
}

LossKind parse_loss_kind(std::string_view s) {
  if (s == "MAE" || s == "mae") return LossKind::MAE;
  if (s == "MSE" || s == "mse" || s == "RMSE" || s == "rmse") return LossKind::MSE;
  if (s == "Huber" || s == "huber") return LossKind::Huber;
  if (s == "LogCosh" || s == "logcosh" || s == "log-cosh") return LossKind::LogCosh;
  throw std::invalid_argument("unknown loss: " + std::string(s));
}

double pointwise_loss(LossKind kind, double r) {
  switch (kind) {
  case LossKind::MAE:
    return std::abs(r);
  case LossKind::MSE:
    return r * r;
  case LossKind::Huber: {
    const double a = std::abs(r);
    return a <= kHuberDelta ? 0.5 * r * r : kHuberDelta * (a - 0.5 * kHuberDelta);
  }
  case LossKind::LogCosh: {
    // log(cosh r) = |r| + log1p(exp(-2|r|)) - log 2, stable for large |r|
    const double a = std::abs(r);
    return a + std::log1p(std::exp(-2.0 * a)) - std::numbers::ln2;
  }
  }
  return 0.0;
}

double pointwise_grad(LossKind kind, double r) {
  switch (kind) {
  case LossKind::MAE:
    return r > 0.0 ? 1.0 : (r < 0.0 ? -1.0 : 0.0);
  case LossKind::MSE:
    return 2.0 * r;
  case LossKind::Huber:
    return std::abs(r) <= kHuberDelta ? r : (r > 0.0 ? kHuberDelta : -kHuberDelta);
  case LossKind::LogCosh:
    return std::tanh(r);
  }
  return 0.0;
}

LossResult loss_and_grad(LossKind kind, std::span<const double> pred, std::span<const double> target) {
  if (pred.size() != target.size()) throw std::invalid_argument("loss_and_grad: length mismatch");
  LossResult out;
  out.grad.resize(pred.size());
  if (pred.empty()) return out;
  const double inv_n = 1.0 / static_cast<double>(pred.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double r = pred[i] - target[i];
    sum += pointwise_loss(kind, r);
    out.grad[i] = pointwise_grad(kind, r) * inv_n;
  }
  out.loss = sum * inv_n;
  return out;
}

} // namespace fmc
