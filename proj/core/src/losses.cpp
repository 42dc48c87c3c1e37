#include "aigflow/losses.hpp"

#include "aigflow/error.hpp"

namespace aigflow {

bool is_bce_task(Task t) noexcept { return t == Task::kCon || t == Task::kGraphTt || t == Task::kIn; }

TaskLosses compute_losses(const TaskTensors& tensors) {
  TaskLosses out;
  for (Task t : kAllTasks) {
    const auto i = static_cast<std::size_t>(t);
    const Tensor& p = tensors.pred[i];
    const Tensor& y = tensors.target[i];
    if (p.defined() != y.defined())
      throw Error(ErrorCode::kShapeMismatch, std::string("losses: task ") + to_string(t) + " has unpaired tensors");
    if (!p.defined()) continue;
    if (p.rows() != y.rows() || p.cols() != y.cols())
      throw Error(ErrorCode::kShapeMismatch, std::string("losses: task ") + to_string(t) + " is misaligned");
    if (p.numel() == 0) continue;
    out.term[i] = is_bce_task(t) ? ops::bce_loss(p, y) : ops::l1_loss(p, y);
  }
  return out;
}

LossReport summarize(const TaskLosses& losses) {
  LossReport r;
  for (Task t : kAllTasks) {
    const auto i = static_cast<std::size_t>(t);
    r.weight[i] = 1.0;
    if (!losses.term[i].defined()) continue;
    r.present[i] = true;
    r.raw[i] = losses.term[i].item();
    (task_stream(t) == Stream::kFunctional ? r.l_func : r.l_stru) += r.raw[i];
  }
  r.l_all = r.l_func + r.l_stru;
  return r;
}

Tensor total_loss(const TaskLosses& losses) {
  Tensor sum;
  for (const auto& term : losses.term) {
    if (!term.defined()) continue;
    sum = sum.defined() ? ops::add(sum, term) : term;
  }
  if (!sum.defined()) throw Error(ErrorCode::kInvalidArgument, "total_loss: no task has samples");
  return sum;
}

}  // namespace aigflow
