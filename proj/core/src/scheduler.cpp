#include "aigflow/scheduler.hpp"

#include <algorithm>
#include <deque>
#include <map>
#include <unordered_set>

#include "aigflow/error.hpp"
#include "aigflow/random.hpp"

namespace aigflow {

EmbeddingStore::EmbeddingStore(std::size_t node_count) : marks_(node_count, false), counts_(node_count, 0) {}

const NodeState& EmbeddingStore::get(NodeId v) const {
  if (!marked(v)) throw Error(ErrorCode::kInvalidArgument, "store: node " + std::to_string(v) + " is not marked");
  auto it = offline_.find(v);
  if (it == offline_.end())
    throw Error(ErrorCode::kStoreCorruption, "store: marked node " + std::to_string(v) + " has no offline entry");
  return it->second;
}

void EmbeddingStore::write(NodeId v, NodeState state) {
  if (marks_.at(v))
    throw Error(ErrorCode::kInvariantBreach, "store: attempt to rewrite frozen node " + std::to_string(v));
  offline_.emplace(v, std::move(state));
  marks_[v] = true;
  ++counts_[v];
}

std::size_t BatchPlan::batch_count() const {
  std::size_t n = 0;
  for (const auto& l : levels) n += l.batches.size();
  return n;
}

BatchPlan build_batches(const PartitionPlan& plan, std::size_t batch_size, std::uint64_t seed, BatchMode mode) {
  if (batch_size == 0) throw Error(ErrorCode::kInvalidArgument, "build_batches: mini-batch size must be >= 1");
  BatchPlan out;
  for (const auto& range : plan.level_ranges()) {
    std::map<std::uint32_t, std::vector<std::size_t>> by_component;
    for (std::size_t id = range.begin; id < range.end; ++id) by_component[plan.cone(id).component].push_back(id);

    LevelBatches lb;
    lb.level = range.level;
    for (auto& [component, ids] : by_component) {
      if (mode == BatchMode::kTrain) {
        Rng rng(derive_seed(seed, {static_cast<std::uint64_t>(range.level), component}));
        rng.shuffle(ids);
      }
      for (std::size_t i = 0; i < ids.size(); i += batch_size) {
        MiniBatch mb;
        mb.cone_ids.assign(ids.begin() + static_cast<std::ptrdiff_t>(i),
                           ids.begin() + static_cast<std::ptrdiff_t>(std::min(ids.size(), i + batch_size)));
        lb.batches.push_back(std::move(mb));
      }
    }
    out.levels.push_back(std::move(lb));
  }
  return out;
}

std::size_t WorkingBatch::frozen_count() const {
  return static_cast<std::size_t>(std::count(frozen.begin(), frozen.end(), true));
}

std::uint32_t WorkingBatch::local(NodeId v) const {
  auto it = std::lower_bound(nodes.begin(), nodes.end(), v);
  if (it == nodes.end() || *it != v)
    throw Error(ErrorCode::kOutOfRange, "working batch: node " + std::to_string(v) + " not in batch");
  return static_cast<std::uint32_t>(it - nodes.begin());
}

WorkingBatch pull(const EmbeddingStore& store, const Aig& aig, const PartitionPlan& plan, const MiniBatch& batch,
                  std::size_t batch_index, int level) {
  WorkingBatch wb;
  wb.index = batch_index;
  wb.level = level;
  wb.cone_ids = batch.cone_ids;
  for (auto id : batch.cone_ids) {
    const auto& c = plan.cone(id);
    wb.nodes.insert(wb.nodes.end(), c.members.begin(), c.members.end());
  }
  std::sort(wb.nodes.begin(), wb.nodes.end());
  wb.nodes.erase(std::unique(wb.nodes.begin(), wb.nodes.end()), wb.nodes.end());
  if (store.node_count() != aig.size())
    throw Error(ErrorCode::kShapeMismatch, "pull: store size does not match the graph");

  wb.frozen.resize(wb.size(), false);
  wb.pulled.resize(wb.size());
  for (std::size_t i = 0; i < wb.size(); ++i) {
    if (store.marked(wb.nodes[i])) {
      wb.frozen[i] = true;
      wb.pulled[i] = store.get(wb.nodes[i]);
    }
  }

  std::vector<LocalEdge> edges, augmented;
  for (auto id : batch.cone_ids) {
    const auto& c = plan.cone(id);
    std::vector<std::uint32_t> members;
    members.reserve(c.members.size());
    for (NodeId m : c.members) members.push_back(wb.local(m));
    wb.cone_members.push_back(std::move(members));
    for (const auto& e : c.local_edges) edges.push_back({wb.local(e.src), wb.local(e.dst)});
    for (const auto& e : virtual_edges(c, plan.k()).edges) augmented.push_back({wb.local(e.src), wb.local(e.dst)});
  }
  auto prune = [&](std::vector<LocalEdge>& es) {
    std::erase_if(es, [&](const LocalEdge& e) { return wb.frozen[e.dst]; });
    std::sort(es.begin(), es.end(), [](const LocalEdge& a, const LocalEdge& b) {
      return a.dst != b.dst ? a.dst < b.dst : a.src < b.src;
    });
    es.erase(std::unique(es.begin(), es.end()), es.end());
  };
  prune(edges);
  prune(augmented);
  wb.edges = std::move(edges);
  wb.augmented = std::move(augmented);
  return wb;
}

std::size_t push(EmbeddingStore& store, const WorkingBatch& batch, const std::vector<NodeState>& states) {
  if (states.size() != batch.size())
    throw Error(ErrorCode::kShapeMismatch, "push: expected " + std::to_string(batch.size()) + " states, got " +
                                               std::to_string(states.size()));
  std::size_t written = 0;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    if (batch.frozen[i]) continue;
    store.write(batch.nodes[i], states[i]);
    ++written;
  }
  return written;
}

ScheduleResult run_schedule(const Aig& aig, const PartitionPlan& plan, const BatchPlan& batches,
                            const EncodeFn& encode) {
  ScheduleResult result{EmbeddingStore(aig.size()), {}, {}};
  std::size_t index = 0;
  for (const auto& level : batches.levels) {
    for (const auto& mb : level.batches) {
      WorkingBatch wb = pull(result.store, aig, plan, mb, index, level.level);
      std::vector<NodeState> states;
      try {
        states = encode(wb);
      } catch (const std::exception& e) {
        throw Error(ErrorCode::kCallbackFailure, "batch " + std::to_string(index) + ": " + e.what());
      }
      const std::size_t fresh = push(result.store, wb, states);

      auto& m = result.meter;
      std::size_t dims = 0;
      if (!states.empty()) dims = states.front().hf.size() + states.front().hs.size();
      const std::size_t bytes = wb.size() * dims * sizeof(double) + wb.augmented.size() * sizeof(LocalEdge);
      m.peak_online_nodes = std::max(m.peak_online_nodes, wb.size());
      m.peak_online_edges = std::max(m.peak_online_edges, wb.augmented.size());
      m.peak_online_bytes = std::max(m.peak_online_bytes, bytes);

      BatchTrace t;
      t.index = index;
      t.level = level.level;
      t.cone_ids = mb.cone_ids;
      t.pulled = wb.frozen_count();
      t.fresh = fresh;
      t.online_nodes = wb.size();
      t.peak_online_nodes = m.peak_online_nodes;
      result.trace.push_back(std::move(t));
      ++index;
    }
  }
  result.meter.offline_entries = result.store.offline_entries();
  return result;
}

namespace {

std::vector<NodeId> ancestors_within(const Aig& aig, NodeId v, int k) {
  std::unordered_map<NodeId, int> dist{{v, 0}};
  std::deque<NodeId> queue{v};
  std::vector<NodeId> out;
  while (!queue.empty()) {
    NodeId u = queue.front();
    queue.pop_front();
    if (dist[u] == k) continue;
    for (NodeId f : aig.fanins(u))
      if (dist.try_emplace(f, dist[u] + 1).second) {
        out.push_back(f);
        queue.push_back(f);
      }
  }
  return out;
}

}  // namespace

ReceptiveFieldStats receptive_field_diagnostic(const PartitionPlan& plan, const Aig& aig, std::size_t max_samples,
                                               std::uint64_t seed) {
  ReceptiveFieldStats stats;
  const auto sampled = plan.sampled_levels();
  auto level_union = [&](int level) {
    std::vector<bool> in(aig.size(), false);
    for (const auto& c : plan.cones_at(level))
      for (NodeId m : c.members) in[m] = true;
    return in;
  };
  for (std::size_t i = 1; i < sampled.size(); ++i) {
    const auto earlier = level_union(sampled[i - 1]);
    const auto later = level_union(sampled[i]);
    std::vector<NodeId> overlap;
    for (NodeId v = 0; v < aig.size(); ++v)
      if (earlier[v] && later[v]) overlap.push_back(v);
    if (max_samples > 0 && overlap.size() > max_samples) {
      Rng rng(derive_seed(seed, {static_cast<std::uint64_t>(i)}));
      rng.shuffle(overlap);
      overlap.resize(max_samples);
      std::sort(overlap.begin(), overlap.end());
    }
    for (NodeId v : overlap) {
      bool ok = true;
      for (NodeId u : ancestors_within(aig, v, plan.k()))
        if (later[u] && !earlier[u]) ok = false;
      ++stats.overlap_nodes;
      if (ok) ++stats.contained;
    }
  }
  return stats;
}

}  // namespace aigflow
