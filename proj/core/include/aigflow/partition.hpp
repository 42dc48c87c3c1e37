#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include "aigflow/aig.hpp"

namespace aigflow {

/// Fan-in subgraph of every node within path distance `k` of `output_id`.
struct Cone {
  NodeId output_id = 0;
  int output_level = 0;
  std::vector<NodeId> members;   // ascending global id
  std::vector<Edge> local_edges; // induced edges (global ids), sorted by (dst, src)
  std::uint32_t component = 0;   // weakly-connected component of the output
  bool fallback = false;         // inserted only to complete coverage

  bool contains(NodeId v) const;
  /// Position of `v` in `members`.
  std::optional<std::size_t> local_index(NodeId v) const;
};

/// Reverse BFS from `v` bounded at distance k (shortest-path semantics).
Cone cone_k(const Aig& aig, NodeId v, int k);

/// Upper bound on cone size for AIGs (max in-degree 2).
constexpr std::size_t max_cone_size(int k) noexcept { return (std::size_t{1} << (k + 1)) - 1; }

/// Cones grouped by output level; `cones()` is ordered by (level, output id)
/// and a cone's id is its index in that order.
class PartitionPlan {
 public:
  struct LevelRange {
    int level;
    std::size_t begin;
    std::size_t end;
  };

  PartitionPlan() = default;
  PartitionPlan(int k, int delta, std::vector<int> sampled_levels, std::vector<Cone> cones,
                std::vector<NodeId> uncovered_before_fallback);

  int k() const noexcept { return k_; }
  int delta() const noexcept { return delta_; }
  /// [k, k+delta, ...] up to the max level.
  std::span<const int> sampled_levels() const noexcept { return sampled_levels_; }
  std::span<const Cone> cones() const noexcept { return cones_; }
  const Cone& cone(std::size_t id) const { return cones_.at(id); }
  std::span<const LevelRange> level_ranges() const noexcept { return ranges_; }
  std::span<const Cone> cones_at(int level) const;
  std::size_t fallback_count() const noexcept;
  std::span<const NodeId> uncovered_before_fallback() const noexcept { return uncovered_; }

 private:
  int k_ = 0;
  int delta_ = 0;
  std::vector<int> sampled_levels_;
  std::vector<Cone> cones_;
  std::vector<LevelRange> ranges_;
  std::vector<NodeId> uncovered_;
};

/// Sampled-level cones, then one cone per out-degree-0 node (deduplicated by
/// output id), then fallback cones until every node is covered.
/// Requires delta < k and a non-empty finalized graph.
PartitionPlan partition(const Aig& aig, int k, int delta);

/// Pairs (u, v), u != v, with a path of length <= k from u to v inside the
/// cone's induced subgraph. Sorted by (dst, src).
struct VirtualEdgeSet {
  std::vector<Edge> edges;
};

VirtualEdgeSet virtual_edges(const Cone& cone, int k);

struct CoverageReport {
  std::vector<NodeId> uncovered;                    // nodes in no non-fallback cone
  std::size_t fallback_cones = 0;
  std::map<std::size_t, std::size_t> intra_overlap; // |cone_i ∩ cone_j| (same level, non-empty) -> pair count
  std::vector<std::size_t> inter_overlap;           // |cones^{prev} ∩ cones^{l}| per consecutive level pair
  std::size_t intra_overlap_nodes = 0;              // nodes shared by >= 2 cones of one level
  std::size_t intra_fanin_closed = 0;               // ... whose in-level fanins are shared by the same cones
};

CoverageReport coverage_report(const PartitionPlan& plan, const Aig& aig);

}  // namespace aigflow
