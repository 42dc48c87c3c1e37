#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace aigflow {

using NodeId = std::uint32_t;

enum class GateType : std::uint8_t { kPi, kAnd, kNot };

std::string_view to_string(GateType t) noexcept;

/// Required in-degree of each gate type.
constexpr std::size_t required_fanins(GateType t) noexcept {
  switch (t) {
    case GateType::kPi: return 0;
    case GateType::kAnd: return 2;
    case GateType::kNot: return 1;
  }
  return 0;
}

/// Directed edge: `src` feeds `dst`.
struct Edge {
  NodeId src = 0;
  NodeId dst = 0;
  friend auto operator<=>(const Edge&, const Edge&) = default;
};

struct FanoutStats {
  std::size_t out_and = 0;
  std::size_t out_not = 0;
  friend bool operator==(const FanoutStats&, const FanoutStats&) = default;
};

/// Explicit-gate and-inverter graph.
///
/// The raw constructor accepts arbitrary (possibly invalid) content so that
/// `validate()` can report on it. `finalize()` checks every invariant and
/// computes logic levels; all downstream modules expect a finalized graph.
/// A finalized Aig is immutable and safe to share between threads.
class Aig {
 public:
  Aig() = default;
  Aig(std::vector<GateType> types, std::vector<Edge> edges,
      std::vector<NodeId> outputs = {}, std::vector<NodeId> constants = {});

  std::size_t size() const noexcept { return types_.size(); }
  std::size_t edge_count() const noexcept { return edges_.size(); }
  bool empty() const noexcept { return types_.empty(); }

  GateType type(NodeId v) const { return types_.at(v); }
  std::span<const GateType> types() const noexcept { return types_; }
  std::span<const Edge> edges() const noexcept { return edges_; }

  /// Fanins in edge-insertion order (AIGER operand order for parsed graphs).
  std::span<const NodeId> fanins(NodeId v) const;
  std::span<const NodeId> fanouts(NodeId v) const;

  bool finalized() const noexcept { return finalized_; }
  /// Throws Error(kInvariantBreach) on any validation violation.
  void finalize();

  int level(NodeId v) const;
  std::span<const int> levels() const noexcept { return levels_; }
  int max_level() const noexcept { return max_level_; }

  /// Free primary inputs (constant nodes excluded), ascending id.
  std::span<const NodeId> inputs() const noexcept { return inputs_; }
  /// Declared outputs (AIGER output list after inverter expansion).
  std::span<const NodeId> outputs() const noexcept { return outputs_; }
  /// Nodes with out-degree 0, ascending id.
  std::span<const NodeId> pos() const noexcept { return pos_; }
  bool is_constant(NodeId v) const;
  std::span<const NodeId> constants() const noexcept { return constants_; }

  /// Weakly-connected component index per node, numbered by smallest member id.
  std::span<const std::uint32_t> components() const noexcept { return components_; }
  std::size_t component_count() const noexcept { return component_count_; }

 private:
  void build_adjacency();

  std::vector<GateType> types_;
  std::vector<Edge> edges_;
  std::vector<NodeId> outputs_;
  std::vector<NodeId> constants_;
  std::vector<bool> constant_flag_;

  std::vector<std::size_t> fanin_offsets_;
  std::vector<NodeId> fanin_ids_;
  std::vector<std::size_t> fanout_offsets_;
  std::vector<NodeId> fanout_ids_;

  bool finalized_ = false;
  std::vector<int> levels_;
  int max_level_ = -1;
  std::vector<NodeId> inputs_;
  std::vector<NodeId> pos_;
  std::vector<std::uint32_t> components_;
  std::size_t component_count_ = 0;
};

/// Incremental construction in topological order; ids are assigned densely.
class AigBuilder {
 public:
  NodeId add_pi();
  /// Constant-0 source, modeled as a PI whose simulation value is fixed.
  NodeId add_constant();
  NodeId add_and(NodeId a, NodeId b);
  NodeId add_not(NodeId a);
  void add_output(NodeId v);

  std::size_t size() const noexcept { return types_.size(); }

  /// Finalizes and returns the graph.
  Aig build() &&;

 private:
  void check(NodeId v) const;

  std::vector<GateType> types_;
  std::vector<Edge> edges_;
  std::vector<NodeId> outputs_;
  std::vector<NodeId> constants_;
};

/// Logic level per node: 0 for PIs, 1 + max fanin level otherwise.
/// Throws Error(kCycle) if the graph is cyclic.
std::vector<int> compute_levels(const Aig& aig);

/// Node ids grouped by level, ascending; ids ascending within a group.
std::vector<std::vector<NodeId>> topo_levels(const Aig& aig);

FanoutStats fanout_stats(const Aig& aig, NodeId v);

enum class ViolationKind { kDanglingId, kInDegree, kCycle, kDuplicateEdge };

std::string_view to_string(ViolationKind k) noexcept;

struct Violation {
  ViolationKind kind;
  NodeId node;
  std::string message;
};

struct ValidationReport {
  std::vector<Violation> violations;
  bool ok() const noexcept { return violations.empty(); }
  std::size_t count(ViolationKind k) const;
};

/// Diagnostics only; never throws.
ValidationReport validate(const Aig& aig);

/// Disjoint union of `copies` copies; copy c occupies ids [c*n, (c+1)*n).
Aig duplicate(const Aig& aig, std::size_t copies);

struct AigStats {
  std::size_t nodes = 0;
  std::size_t edges = 0;
  std::size_t pis = 0;
  std::size_t pos = 0;
  std::size_t ands = 0;
  std::size_t nots = 0;
  std::size_t constants = 0;
  int max_level = 0;
};

AigStats stats(const Aig& aig);

// ASCII AIGER ("aag") I/O. Complemented literals become explicit NOT nodes,
// one per distinct complemented literal.
Aig parse_aiger(std::string_view text);
Aig read_aiger_file(const std::string& path);
/// Inverse of parse_aiger for graphs without NOT-of-NOT chains.
std::string write_aiger(const Aig& aig);

}  // namespace aigflow
