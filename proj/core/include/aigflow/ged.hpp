#pragma once

#include <cstddef>
#include <optional>
#include <utility>
#include <vector>

#include "aigflow/aig.hpp"
#include "aigflow/partition.hpp"

namespace aigflow {

/// Small directed graph with gate-type node labels.
struct LabeledGraph {
  std::vector<GateType> labels;
  std::vector<std::pair<std::uint32_t, std::uint32_t>> edges;  // (src, dst), local ids
};

/// Induced subgraph of a cone, members in ascending global-id order.
LabeledGraph cone_graph(const Aig& aig, const Cone& cone);

/// Exact graph edit distance under unit costs: node insert/delete 1, node
/// substitution 1 iff labels differ, edge insert/delete 1. Branch-and-bound
/// over node mappings; nullopt if either graph exceeds `node_limit`.
std::optional<std::size_t> ged(const LabeledGraph& a, const LabeledGraph& b, std::size_t node_limit = 10);

}  // namespace aigflow
