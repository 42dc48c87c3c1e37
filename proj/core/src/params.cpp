#include "aigflow/params.hpp"

#include <cmath>

#include "aigflow/error.hpp"
#include "aigflow/random.hpp"

namespace aigflow {

Tensor ParamRegistry::add(std::string name, std::size_t rows, std::size_t cols, std::vector<double> init) {
  if (index_.count(name)) throw Error(ErrorCode::kInvalidArgument, "duplicate parameter name: " + name);
  auto t = Tensor::parameter(rows, cols, std::move(init));
  index_.emplace(name, entries_.size());
  entries_.push_back({std::move(name), t});
  return t;
}

Tensor ParamRegistry::add_glorot(std::string name, std::size_t rows, std::size_t cols, std::uint64_t seed) {
  Rng rng(seed);
  const double limit = std::sqrt(6.0 / static_cast<double>(rows + cols));
  std::vector<double> init(rows * cols);
  for (auto& x : init) x = rng.uniform(-limit, limit);
  return add(std::move(name), rows, cols, std::move(init));
}

Tensor ParamRegistry::add_zeros(std::string name, std::size_t rows, std::size_t cols) {
  return add(std::move(name), rows, cols, std::vector<double>(rows * cols, 0.0));
}

const Tensor& ParamRegistry::get(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw Error(ErrorCode::kInvalidArgument, "unknown parameter: " + name);
  return entries_[it->second].tensor;
}

std::size_t ParamRegistry::element_count() const {
  std::size_t n = 0;
  for (const auto& e : entries_) n += e.tensor.numel();
  return n;
}

void ParamRegistry::zero_grad() {
  for (auto& e : entries_) e.tensor.zero_grad();
}

std::vector<double> ParamRegistry::flat_values() const {
  std::vector<double> out;
  out.reserve(element_count());
  for (const auto& e : entries_) out.insert(out.end(), e.tensor.values().begin(), e.tensor.values().end());
  return out;
}

Adam::Adam(ParamRegistry& params, AdamConfig config) : params_(&params), config_(config) {
  for (const auto& e : params.entries()) {
    m_.emplace_back(e.tensor.numel(), 0.0);
    v_.emplace_back(e.tensor.numel(), 0.0);
  }
}

void Adam::step() {
  ++t_;
  if (config_.lr == 0.0) return;
  const double c1 = 1.0 - std::pow(config_.beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(config_.beta2, static_cast<double>(t_));
  auto& entries = params_->entries();
  for (std::size_t p = 0; p < entries.size(); ++p) {
    Tensor t = entries[p].tensor;
    const auto g = t.grad();
    if (g.empty()) continue;
    auto w = t.mutable_values();
    auto& m = m_[p];
    auto& v = v_[p];
    for (std::size_t i = 0; i < w.size(); ++i) {
      m[i] = config_.beta1 * m[i] + (1.0 - config_.beta1) * g[i];
      v[i] = config_.beta2 * v[i] + (1.0 - config_.beta2) * g[i] * g[i];
      w[i] -= config_.lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + config_.eps);
    }
  }
}

}  // namespace aigflow
