#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "aigflow/tensor.hpp"

namespace aigflow {

/// Named trainable tensors in registration order.
class ParamRegistry {
 public:
  struct Entry {
    std::string name;
    Tensor tensor;
  };

  /// Throws Error(kInvalidArgument) on a duplicate name.
  Tensor add(std::string name, std::size_t rows, std::size_t cols, std::vector<double> init);
  /// Glorot-uniform initialization drawn from `seed`.
  Tensor add_glorot(std::string name, std::size_t rows, std::size_t cols, std::uint64_t seed);
  Tensor add_zeros(std::string name, std::size_t rows, std::size_t cols);

  const Tensor& get(const std::string& name) const;
  bool contains(const std::string& name) const { return index_.count(name) != 0; }
  const std::vector<Entry>& entries() const noexcept { return entries_; }
  std::size_t size() const noexcept { return entries_.size(); }
  std::size_t element_count() const;

  void zero_grad();
  /// Flat copy of all values in registration order.
  std::vector<double> flat_values() const;

 private:
  std::vector<Entry> entries_;
  std::unordered_map<std::string, std::size_t> index_;
};

struct AdamConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

class Adam {
 public:
  Adam(ParamRegistry& params, AdamConfig config);

  /// Applies one update from the accumulated leaf gradients. With lr == 0
  /// only the step counter advances.
  void step();
  std::uint64_t step_count() const noexcept { return t_; }
  const AdamConfig& config() const noexcept { return config_; }
  const std::vector<std::vector<double>>& first_moments() const noexcept { return m_; }
  const std::vector<std::vector<double>>& second_moments() const noexcept { return v_; }

 private:
  ParamRegistry* params_;
  AdamConfig config_;
  std::vector<std::vector<double>> m_, v_;
  std::uint64_t t_ = 0;
};

}  // namespace aigflow
