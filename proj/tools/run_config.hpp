#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "aigflow/labels.hpp"
#include "aigflow/model.hpp"
#include "aigflow/trainer.hpp"

namespace aigflow::cli {

/// Every tunable of the command-line pipelines. Defaults are the desk-scale
/// values; `apply_json` and the flag layer override them in that order.
struct RunConfig {
  int k = 8;
  int delta = 6;
  std::size_t batch = 128;
  std::size_t dim = 32;
  std::size_t depth = 3;
  std::size_t heads = 4;
  std::size_t pool_depth = 2;
  double lr = 1e-4;
  std::size_t epochs = 1;
  std::uint64_t seed = 0;
  std::string sim = "auto";  // auto | exhaustive | random:N
  std::size_t ged_limit = 10;
  std::size_t workers = 1;
  std::size_t pairs = 32;
  bool balance = true;
  std::string out;
  std::size_t checkpoint_every = 0;

  /// Throws Error(kInvalidArgument) on delta >= k, d % heads != 0, etc.
  void validate() const;
  ModelConfig model() const;
  TrainConfig train() const;
  /// Label config for the circuit at position `index` of the input list.
  LabelConfig labels(std::size_t index) const;
};

/// Overrides fields present in a JSON object; unknown keys are rejected.
void apply_json(RunConfig& config, const std::string& json_text);

/// Parses "auto", "exhaustive" or "random:N" into a simulation budget.
SimulationBudget parse_sim(const std::string& sim);

/// Parses "8:6,8:4" into (k, delta) pairs.
std::vector<std::pair<int, int>> parse_grid(const std::string& grid);

}  // namespace aigflow::cli
