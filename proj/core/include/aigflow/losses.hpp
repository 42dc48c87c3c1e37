#pragma once

#include <array>
#include <optional>

#include "aigflow/model.hpp"
#include "aigflow/tensor.hpp"

namespace aigflow {

/// Prediction / target tensors per task; undefined tensors mark tasks with
/// no samples in this batch.
struct TaskTensors {
  std::array<Tensor, kTaskCount> pred;
  std::array<Tensor, kTaskCount> target;
};

/// Scalar loss per task; undefined when the task had no samples.
struct TaskLosses {
  std::array<Tensor, kTaskCount> term;
  bool present(Task t) const { return term[static_cast<std::size_t>(t)].defined(); }
};

struct LossReport {
  std::array<double, kTaskCount> raw{};
  std::array<bool, kTaskCount> present{};
  std::array<double, kTaskCount> weight{};  // 1 / max(EMA, eps) when balanced, else 1
  double l_func = 0.0;
  double l_stru = 0.0;
  double l_all = 0.0;
};

/// L1 for prob, gate_tt_pair, graph_tt_pair, ged_pair, size and depth; mean
/// binary cross-entropy for con, graph_tt and in.
bool is_bce_task(Task t) noexcept;
TaskLosses compute_losses(const TaskTensors& tensors);

/// Raw values: L_func sums the functional tasks, L_stru the structural ones.
LossReport summarize(const TaskLosses& losses);

/// Unbalanced sum of all present terms.
Tensor total_loss(const TaskLosses& losses);

inline constexpr std::array<Task, kTaskCount> kAllTasks = {Task::kProb,  Task::kGateTt, Task::kCon,
                                                           Task::kGraphTt, Task::kGraphTtPair, Task::kGed,
                                                           Task::kSize,  Task::kDepth,  Task::kIn};

}  // namespace aigflow
