#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <unordered_map>

#include "aigflow/error.hpp"
#include "aigflow/tensor.hpp"

namespace aigflow {
namespace {

std::atomic<bool> g_checked{false};
thread_local double g_kink_margin = std::numeric_limits<double>::infinity();

detail::Node& deref(const std::shared_ptr<detail::Node>& n) {
  if (!n) throw Error(ErrorCode::kInvalidArgument, "use of an undefined tensor");
  return *n;
}

std::shared_ptr<detail::Node> new_node(std::size_t rows, std::size_t cols, std::vector<double> values) {
  if (values.size() != rows * cols)
    throw Error(ErrorCode::kShapeMismatch, "tensor: " + std::to_string(values.size()) + " values for shape " +
                                               std::to_string(rows) + "x" + std::to_string(cols));
  auto n = std::make_shared<detail::Node>();
  n->rows = rows;
  n->cols = cols;
  n->values = std::move(values);
  return n;
}

// Post-order over nodes that need gradients; deterministic for a given graph.
std::vector<detail::Node*> topo_order(detail::Node* root) {
  std::vector<detail::Node*> order;
  std::unordered_map<detail::Node*, bool> seen;
  std::vector<std::pair<detail::Node*, std::size_t>> stack{{root, 0}};
  seen[root] = true;
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      detail::Node* p = node->parents[next++].get();
      if (p->requires_grad && !seen[p]) {
        seen[p] = true;
        stack.emplace_back(p, 0);
      }
      continue;
    }
    order.push_back(node);
    stack.pop_back();
  }
  return order;
}

}  // namespace

void set_checked_mode(bool enabled) noexcept { g_checked = enabled; }
bool checked_mode() noexcept { return g_checked; }

void reset_kink_margin() noexcept { g_kink_margin = std::numeric_limits<double>::infinity(); }
double kink_margin() noexcept { return g_kink_margin; }

namespace detail {
void note_kink_distance(double d) noexcept { g_kink_margin = std::min(g_kink_margin, d); }
}  // namespace detail

Tensor Tensor::constant(std::size_t rows, std::size_t cols, std::vector<double> values) {
  return Tensor(new_node(rows, cols, std::move(values)));
}

Tensor Tensor::zeros(std::size_t rows, std::size_t cols) {
  return constant(rows, cols, std::vector<double>(rows * cols, 0.0));
}

Tensor Tensor::scalar(double v) { return constant(1, 1, {v}); }

Tensor Tensor::parameter(std::size_t rows, std::size_t cols, std::vector<double> values) {
  auto n = new_node(rows, cols, std::move(values));
  n->requires_grad = true;
  return Tensor(std::move(n));
}

std::size_t Tensor::rows() const { return deref(node_).rows; }
std::size_t Tensor::cols() const { return deref(node_).cols; }
std::span<const double> Tensor::values() const { return deref(node_).values; }

std::span<double> Tensor::mutable_values() {
  auto& n = deref(node_);
  if (!n.leaf) throw Error(ErrorCode::kInvalidArgument, "mutable_values on a non-leaf tensor");
  return n.values;
}

double Tensor::at(std::size_t r, std::size_t c) const {
  auto& n = deref(node_);
  if (r >= n.rows || c >= n.cols) throw Error(ErrorCode::kOutOfRange, "tensor index out of range");
  return n.values[r * n.cols + c];
}

double Tensor::item() const {
  auto& n = deref(node_);
  if (n.values.size() != 1) throw Error(ErrorCode::kShapeMismatch, "item() on a non-scalar tensor");
  return n.values[0];
}

bool Tensor::requires_grad() const { return deref(node_).requires_grad; }
bool Tensor::is_leaf() const { return deref(node_).leaf; }
std::span<const double> Tensor::grad() const { return deref(node_).grad; }
void Tensor::zero_grad() { deref(node_).grad.clear(); }
void Tensor::reset_backward() { deref(node_).backward_done = false; }

Tensor Tensor::detach() const {
  auto& n = deref(node_);
  return constant(n.rows, n.cols, n.values);
}

namespace detail {

Tensor make_result(std::size_t rows, std::size_t cols, std::vector<double> values, std::vector<Tensor> parents,
                   BackwardFn backward) {
  auto n = new_node(rows, cols, std::move(values));
  n->leaf = false;
  if (g_checked) {
    for (double v : n->values)
      if (!std::isfinite(v)) throw Error(ErrorCode::kNonFinite, "non-finite value produced by an op");
  }
  bool needs = false;
  for (const auto& p : parents) needs |= deref(p.node()).requires_grad;
  if (needs) {
    n->requires_grad = true;
    n->backward = std::move(backward);
    n->parents.reserve(parents.size());
    for (auto& p : parents) n->parents.push_back(p.node());
  }
  return Tensor(std::move(n));
}

}  // namespace detail

namespace {

using GradMap = std::unordered_map<detail::Node*, std::vector<double>>;

void run_backward(detail::Node* root, const std::vector<detail::Node*>& order,
                  const std::function<bool(detail::Node*)>& participates, GradMap& grads) {
  grads[root].assign(1, 1.0);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    detail::Node* node = *it;
    auto found = grads.find(node);
    if (found == grads.end() || node->leaf || !node->backward) continue;
    std::vector<std::vector<double>*> pgrads(node->parents.size(), nullptr);
    for (std::size_t i = 0; i < node->parents.size(); ++i) {
      detail::Node* p = node->parents[i].get();
      if (!p->requires_grad || !participates(p)) continue;
      auto& g = grads[p];
      if (g.empty()) g.assign(p->values.size(), 0.0);
      pgrads[i] = &g;
    }
    // grads may rehash while parents are inserted; re-fetch the output gradient.
    const auto& gout = grads.at(node);
    node->backward(*node, gout, pgrads);
  }
}

}  // namespace

void backward(const Tensor& root) {
  auto& r = deref(root.node());
  if (r.values.size() != 1) throw Error(ErrorCode::kShapeMismatch, "backward: root must be a scalar");
  if (r.backward_done) throw Error(ErrorCode::kInvalidArgument, "backward called twice on the same root without reset");
  r.backward_done = true;
  if (!r.requires_grad) return;

  const auto order = topo_order(&r);
  GradMap grads;
  run_backward(&r, order, [](detail::Node*) { return true; }, grads);
  for (detail::Node* node : order) {
    if (!node->leaf) continue;
    auto it = grads.find(node);
    if (it == grads.end()) continue;
    if (node->grad.empty()) node->grad.assign(node->values.size(), 0.0);
    for (std::size_t i = 0; i < node->grad.size(); ++i) node->grad[i] += it->second[i];
  }
}

std::vector<std::vector<double>> grad_of(const Tensor& root, std::span<const Tensor> targets) {
  auto& r = deref(root.node());
  if (r.values.size() != 1) throw Error(ErrorCode::kShapeMismatch, "grad_of: root must be a scalar");
  std::vector<std::vector<double>> out;
  for (const auto& t : targets) out.emplace_back(t.numel(), 0.0);
  if (!r.requires_grad) return out;

  std::unordered_map<detail::Node*, bool> depends;
  for (const auto& t : targets) depends[t.node().get()] = true;
  const auto order = topo_order(&r);
  for (detail::Node* node : order) {  // parents precede children
    if (depends.count(node)) continue;
    bool d = false;
    for (const auto& p : node->parents) {
      auto it = depends.find(p.get());
      d |= (it != depends.end() && it->second);
    }
    depends[node] = d;
  }
  auto participates = [&](detail::Node* n) {
    auto it = depends.find(n);
    return it != depends.end() && it->second;
  };
  GradMap grads;
  run_backward(&r, order, participates, grads);
  for (std::size_t i = 0; i < targets.size(); ++i) {
    auto it = grads.find(targets[i].node().get());
    if (it != grads.end()) out[i] = it->second;
  }
  return out;
}

double grad_check(const std::function<Tensor(const std::vector<Tensor>&)>& f, const std::vector<Tensor>& inputs,
                  double h) {
  for (const auto& t : inputs)
    if (!t.is_leaf() || !t.requires_grad())
      throw Error(ErrorCode::kInvalidArgument, "grad_check: inputs must be parameter leaves");
  auto root = f(inputs);
  auto analytic = grad_of(root, inputs);

  double worst = 0.0;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    Tensor t = inputs[i];
    auto vals = t.mutable_values();
    for (std::size_t e = 0; e < vals.size(); ++e) {
      const double saved = vals[e];
      vals[e] = saved + h;
      const double plus = f(inputs).item();
      vals[e] = saved - h;
      const double minus = f(inputs).item();
      vals[e] = saved;
      const double numeric = (plus - minus) / (2.0 * h);
      const double a = analytic[i][e];
      const double rel = std::abs(a - numeric) / std::max({1.0, std::abs(a), std::abs(numeric)});
      worst = std::max(worst, rel);
    }
  }
  return worst;
}

}  // namespace aigflow
