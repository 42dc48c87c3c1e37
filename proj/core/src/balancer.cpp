#include "aigflow/balancer.hpp"

#include <algorithm>
#include <cmath>

#include "aigflow/error.hpp"

namespace aigflow {

LossBalancer::LossBalancer(std::vector<Tensor> tap, BalancerConfig config) : tap_(std::move(tap)), config_(config) {
  if (tap_.empty()) throw Error(ErrorCode::kInvalidArgument, "balancer: tap not registered");
  for (const auto& t : tap_)
    if (!t.defined() || !t.requires_grad()) throw Error(ErrorCode::kInvalidArgument, "balancer: tap is not trainable");
}

double LossBalancer::tap_norm(const Tensor& loss) const {
  double sq = 0.0;
  for (const auto& g : grad_of(loss, tap_))
    for (double x : g) sq += x * x;
  return std::sqrt(sq);
}

double LossBalancer::weight(Task t) const {
  const auto i = static_cast<std::size_t>(t);
  return init_[i] ? 1.0 / std::max(ema_[i], config_.eps) : 1.0;
}

Tensor LossBalancer::balance(const TaskLosses& losses, BalanceStep* step) {
  Tensor sum;
  for (Task t : kAllTasks) {
    const auto i = static_cast<std::size_t>(t);
    const Tensor& l = losses.term[i];
    if (!l.defined()) continue;
    const double norm = tap_norm(l);
    ema_[i] = init_[i] ? config_.beta * ema_[i] + (1.0 - config_.beta) * norm : norm;
    init_[i] = true;
    if (step) {
      step->norm[i] = norm;
      step->ema[i] = ema_[i];
      step->present[i] = true;
    }
    Tensor term = ops::scale(l, 1.0 / std::max(ema_[i], config_.eps));
    sum = sum.defined() ? ops::add(sum, term) : term;
  }
  if (!sum.defined()) throw Error(ErrorCode::kInvalidArgument, "balancer: no task has samples");
  return sum;
}

}  // namespace aigflow
