#pragma once

#include <span>
#include <string_view>
#include <vector>

namespace fmc {

/// Training losses. RMSE training is carried out as MSE (same minimiser).
enum class LossKind { MAE, MSE, Huber, LogCosh };

std::string_view to_string(LossKind k);
LossKind parse_loss_kind(std::string_view s);

inline constexpr double kHuberDelta = 1.0;

struct LossResult {
  double loss = 0.0;          ///< mean over elements
  std::vector<double> grad;   ///< d(mean loss)/d(pred_i)
};

/// Loss and gradient of the mean per-element loss at residuals pred - target.
LossResult loss_and_grad(LossKind kind, std::span<const double> pred, std::span<const double> target);

/// Per-element loss and derivative with respect to the residual.
double pointwise_loss(LossKind kind, double residual);
double pointwise_grad(LossKind kind, double residual);

} // namespace fmc
