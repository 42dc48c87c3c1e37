#pragma once

#include <array>
#include <vector>

#include "aigflow/losses.hpp"

namespace aigflow {

struct BalancerConfig {
  double beta = 0.9;
  double eps = 1e-8;
};

/// One balancing step as logged: instantaneous tap-gradient norms and the
/// EMA after the update, for present tasks.
struct BalanceStep {
  std::array<double, kTaskCount> norm{};
  std::array<double, kTaskCount> ema{};
  std::array<bool, kTaskCount> present{};
};

/// Divides each task loss by an EMA of the norm of its gradient at a tap
/// tensor. The first update of a task sets its EMA to the observed norm.
class LossBalancer {
 public:
  /// Throws Error(kInvalidArgument) when `tap` is empty.
  LossBalancer(std::vector<Tensor> tap, BalancerConfig config = {});

  /// ||d loss / d tap||_2 over all tap tensors.
  double tap_norm(const Tensor& loss) const;

  /// Updates the EMAs from the raw per-task gradients and returns
  /// sum_i l_i / max(EMA_i, eps).
  Tensor balance(const TaskLosses& losses, BalanceStep* step = nullptr);

  const std::array<double, kTaskCount>& ema() const noexcept { return ema_; }
  const std::array<bool, kTaskCount>& initialized() const noexcept { return init_; }
  double weight(Task t) const;
  const BalancerConfig& config() const noexcept { return config_; }

 private:
  std::vector<Tensor> tap_;
  BalancerConfig config_;
  std::array<double, kTaskCount> ema_{};
  std::array<bool, kTaskCount> init_{};
};

}  // namespace aigflow
