#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <vector>

namespace aigflow {

namespace detail {
struct Node;
}

/// Dense row-major double-precision matrix with reverse-mode gradient tracking.
///
/// Tensors are cheap handles; copies share storage. Leaves created with
/// `parameter()` accumulate gradients across `backward()` calls until
/// `zero_grad()`. Intermediate results keep their inputs alive only while
/// some input requires a gradient.
class Tensor {
 public:
  Tensor() = default;

  static Tensor constant(std::size_t rows, std::size_t cols, std::vector<double> values);
  static Tensor zeros(std::size_t rows, std::size_t cols);
  static Tensor scalar(double v);
  static Tensor parameter(std::size_t rows, std::size_t cols, std::vector<double> values);

  bool defined() const noexcept { return node_ != nullptr; }
  std::size_t rows() const;
  std::size_t cols() const;
  std::size_t numel() const { return rows() * cols(); }

  std::span<const double> values() const;
  /// Leaves only; used by optimizers, initializers, and finite differences.
  std::span<double> mutable_values();
  double at(std::size_t r, std::size_t c) const;
  double item() const;

  bool requires_grad() const;
  bool is_leaf() const;
  /// Accumulated gradient of a leaf; empty before the first backward.
  std::span<const double> grad() const;
  void zero_grad();
  /// Allows `backward()` to be called again on this root.
  void reset_backward();

  /// Same values, no gradient tracking.
  Tensor detach() const;

  const detail::Node* id() const noexcept { return node_.get(); }

  // Internal
  explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}
  const std::shared_ptr<detail::Node>& node() const noexcept { return node_; }

 private:
  std::shared_ptr<detail::Node> node_;
};

namespace detail {

using BackwardFn = std::function<void(const Node& self, std::span<const double> grad_out,
                                      std::span<std::vector<double>*> parent_grads)>;

struct Node {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> values;
  std::vector<double> grad;
  bool requires_grad = false;
  bool leaf = true;
  bool backward_done = false;
  std::vector<std::shared_ptr<Node>> parents;
  BackwardFn backward;
};

/// Creates an op result; drops the graph edge when no parent needs a gradient.
Tensor make_result(std::size_t rows, std::size_t cols, std::vector<double> values,
                   std::vector<Tensor> parents, BackwardFn backward);

}  // namespace detail

/// Accumulates d(root)/d(leaf) into every reachable leaf with requires_grad.
/// `root` must be 1x1. Calling twice on the same root without
/// `reset_backward()` throws.
void backward(const Tensor& root);

/// Gradients of `root` with respect to each target, restricted to the part of
/// the graph that depends on a target. Leaf gradients are left untouched.
std::vector<std::vector<double>> grad_of(const Tensor& root, std::span<const Tensor> targets);

/// When enabled, every op result is checked for NaN/Inf.
void set_checked_mode(bool enabled) noexcept;
bool checked_mode() noexcept;

/// Smallest distance to a kink (relu-type input or L1 residual) seen on this
/// thread since the last reset. Central differences are only meaningful when
/// it is well above the step.
void reset_kink_margin() noexcept;
double kink_margin() noexcept;

namespace detail {
void note_kink_distance(double d) noexcept;
}

namespace ops {

Tensor matmul(const Tensor& a, const Tensor& b);
/// Same shape, or `b` a 1 x cols row broadcast over the rows of `a`.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double s);
Tensor concat_cols(std::span<const Tensor> parts);
Tensor concat_rows(std::span<const Tensor> parts);
Tensor gather_rows(const Tensor& a, std::span<const std::uint32_t> index);
/// out[s] = sum of rows r with segment[r] == s.
Tensor segment_sum(const Tensor& a, std::span<const std::uint32_t> segment, std::size_t num_segments);
/// Column-wise softmax over the rows of each segment.
Tensor segment_softmax(const Tensor& a, std::span<const std::uint32_t> segment, std::size_t num_segments);
Tensor relu(const Tensor& a);
Tensor leaky_relu(const Tensor& a, double slope);
Tensor sigmoid(const Tensor& a);
Tensor softplus(const Tensor& a);
/// Per-row zero-mean unit-variance normalization (no affine part).
Tensor layer_norm(const Tensor& a, double eps = 1e-5);
Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);
/// Mean absolute error; subgradient 0 at equality.
Tensor l1_loss(const Tensor& pred, const Tensor& target);
/// Mean binary cross-entropy; predictions clamped to [1e-7, 1 - 1e-7].
Tensor bce_loss(const Tensor& pred, const Tensor& target);
/// Per-head row dot product: (E x d, E x d) -> E x heads.
Tensor head_dot(const Tensor& q, const Tensor& k, std::size_t heads);
/// out[e, c] = alpha[e, c / (d / heads)] * v[e, c].
Tensor head_scale(const Tensor& alpha, const Tensor& v);

}  // namespace ops

/// Central-difference gradient check. `inputs` must be parameter leaves; `f`
/// rebuilds the graph from their current values. Returns the max over all
/// elements of |a - n| / max(1, |a|, |n|).
double grad_check(const std::function<Tensor(const std::vector<Tensor>&)>& f, const std::vector<Tensor>& inputs,
                  double h = 1e-5);

}  // namespace aigflow
