#pragma once

#include <cstdint>

#include "aigflow/aig.hpp"

namespace aigflow {

struct RandomAigConfig {
  std::size_t pis = 8;
  std::size_t gates = 64;     // AND + NOT nodes
  double not_fraction = 0.3;
  std::size_t window = 0;     // operands drawn from the last `window` nodes; 0 = any
  std::uint64_t seed = 0;
};

/// Seeded random DAG. Every AND has two distinct fanins; NOTs never feed NOTs.
Aig random_aig(const RandomAigConfig& config);

/// Complete binary AND tree of the given depth (2^depth PIs).
Aig and_tree(int depth);

/// `chains` independent AND/NOT ladders of `length` steps each.
Aig ladder(std::size_t length, std::size_t chains);

}  // namespace aigflow
