#pragma once

#include <vector>

#include "aigflow/aig.hpp"
#include "aigflow/model.hpp"

namespace aigflow {

struct ScalingRow {
  std::size_t copies = 1;
  std::size_t nodes = 0;
  std::size_t cones = 0;
  std::size_t batches = 0;
  std::size_t peak_online_nodes = 0;
  std::size_t peak_online_bytes = 0;
  double wall_ms = 0.0;
  std::size_t tokenizer_skips = 0;
  std::size_t transformer_skips = 0;
};

struct ScalingTable {
  std::vector<ScalingRow> rows;
  /// True when every row has the same peak_online_nodes.
  bool peak_constant() const;
};

/// Eval-mode schedule with model encoding on disjoint duplications of `aig`.
ScalingTable bench_mem_runtime(const Aig& aig, const Model& model, int k, int delta, std::size_t batch,
                               const std::vector<std::size_t>& copies = {1, 2, 4},
                               AttentionMode mode = AttentionMode::kFastDegree1);

}  // namespace aigflow
