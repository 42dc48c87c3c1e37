#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <unordered_map>
#include <vector>

#include "aigflow/aig.hpp"
#include "aigflow/partition.hpp"

namespace aigflow {

/// Functional / structural embedding pair of one node.
struct NodeState {
  std::vector<double> hf;
  std::vector<double> hs;
  friend bool operator==(const NodeState&, const NodeState&) = default;
};

/// Offline (historical) embeddings plus per-node update bookkeeping.
/// An entry exists iff the node is marked; entries are written once.
class EmbeddingStore {
 public:
  EmbeddingStore() = default;
  explicit EmbeddingStore(std::size_t node_count);

  std::size_t node_count() const noexcept { return marks_.size(); }
  bool marked(NodeId v) const { return marks_.at(v); }
  int update_count(NodeId v) const { return counts_.at(v); }
  /// Throws Error(kStoreCorruption) if a marked node has no entry.
  const NodeState& get(NodeId v) const;
  /// Throws Error(kInvariantBreach) when rewriting an already-marked node.
  void write(NodeId v, NodeState state);
  std::size_t offline_entries() const noexcept { return offline_.size(); }

  // Test hook: drop an entry while keeping its mark.
  void corrupt_for_testing(NodeId v) { offline_.erase(v); }

 private:
  std::unordered_map<NodeId, NodeState> offline_;
  std::vector<bool> marks_;
  std::vector<int> counts_;
};

enum class BatchMode { kTrain, kEval };

struct MiniBatch {
  std::vector<std::size_t> cone_ids;
};

struct LevelBatches {
  int level = 0;
  std::vector<MiniBatch> batches;
};

/// Mini-batches per level, levels ascending.
struct BatchPlan {
  std::vector<LevelBatches> levels;
  std::size_t batch_count() const;
};

/// Within each level and weakly-connected component, cones are shuffled
/// (train mode, seeded) or kept in plan order (eval mode), then chunked into
/// groups of at most `batch_size`.
BatchPlan build_batches(const PartitionPlan& plan, std::size_t batch_size, std::uint64_t seed, BatchMode mode);

struct LocalEdge {
  std::uint32_t src;
  std::uint32_t dst;
  friend auto operator<=>(const LocalEdge&, const LocalEdge&) = default;
};

/// The online working graph of one mini-batch: the union of its cones, with
/// all in-edges of already-updated (frozen) nodes removed.
struct WorkingBatch {
  std::size_t index = 0;
  int level = 0;
  std::vector<std::size_t> cone_ids;
  std::vector<NodeId> nodes;  // ascending global id; local id = position
  std::vector<bool> frozen;
  std::vector<std::optional<NodeState>> pulled;  // set for frozen nodes
  std::vector<LocalEdge> edges;      // original edges after pruning, sorted (dst, src)
  std::vector<LocalEdge> augmented;  // original + virtual edges after pruning, sorted (dst, src)
  std::vector<std::vector<std::uint32_t>> cone_members;  // local ids per cone

  std::size_t size() const noexcept { return nodes.size(); }
  std::size_t frozen_count() const;
  std::uint32_t local(NodeId v) const;
};

/// Builds the working graph of `batch`, initializing marked nodes from the store.
WorkingBatch pull(const EmbeddingStore& store, const Aig& aig, const PartitionPlan& plan, const MiniBatch& batch,
                  std::size_t batch_index = 0, int level = 0);

/// Writes every non-frozen node of the batch; returns the number written.
std::size_t push(EmbeddingStore& store, const WorkingBatch& batch, const std::vector<NodeState>& states);

struct MemoryMeter {
  std::size_t peak_online_nodes = 0;
  std::size_t peak_online_edges = 0;
  std::size_t peak_online_bytes = 0;
  std::size_t offline_entries = 0;
};

struct BatchTrace {
  std::size_t index = 0;
  int level = 0;
  std::vector<std::size_t> cone_ids;
  std::size_t pulled = 0;
  std::size_t fresh = 0;
  std::size_t online_nodes = 0;
  std::size_t peak_online_nodes = 0;
};

/// Encoder callback: returns one state per local node of the working batch.
using EncodeFn = std::function<std::vector<NodeState>(const WorkingBatch&)>;

struct ScheduleResult {
  EmbeddingStore store;
  MemoryMeter meter;
  std::vector<BatchTrace> trace;
};

/// Level-ascending pull -> encode -> push over the whole batch plan.
/// A throwing callback aborts with Error(kCallbackFailure) naming the batch.
ScheduleResult run_schedule(const Aig& aig, const PartitionPlan& plan, const BatchPlan& batches, const EncodeFn& encode);

struct ReceptiveFieldStats {
  std::size_t overlap_nodes = 0;
  std::size_t contained = 0;
  double fraction() const { return overlap_nodes ? static_cast<double>(contained) / overlap_nodes : 1.0; }
};

/// For nodes v shared by consecutive cone levels, checks whether the
/// k-ancestors of v inside the later level are a subset of those inside the
/// earlier level. `max_samples` = 0 inspects every overlap node.
ReceptiveFieldStats receptive_field_diagnostic(const PartitionPlan& plan, const Aig& aig, std::size_t max_samples = 0,
                                               std::uint64_t seed = 0);

}  // namespace aigflow
