#include "aigflow/partition.hpp"

#include <algorithm>
#include <deque>
#include <unordered_map>

#include "aigflow/error.hpp"

namespace aigflow {

bool Cone::contains(NodeId v) const { return std::binary_search(members.begin(), members.end(), v); }

std::optional<std::size_t> Cone::local_index(NodeId v) const {
  auto it = std::lower_bound(members.begin(), members.end(), v);
  if (it == members.end() || *it != v) return std::nullopt;
  return static_cast<std::size_t>(it - members.begin());
}

Cone cone_k(const Aig& aig, NodeId v, int k) {
  if (v >= aig.size()) throw Error(ErrorCode::kOutOfRange, "cone_k: node " + std::to_string(v) + " out of range");
  if (k < 1) throw Error(ErrorCode::kInvalidArgument, "cone_k: k must be >= 1");

  std::unordered_map<NodeId, int> dist{{v, 0}};
  std::deque<NodeId> queue{v};
  while (!queue.empty()) {
    NodeId u = queue.front();
    queue.pop_front();
    const int du = dist[u];
    if (du == k) continue;
    for (NodeId f : aig.fanins(u)) {
      if (dist.try_emplace(f, du + 1).second) queue.push_back(f);
    }
  }

  Cone cone;
  cone.output_id = v;
  cone.output_level = aig.finalized() ? aig.level(v) : 0;
  cone.component = aig.finalized() ? aig.components()[v] : 0;
  cone.members.reserve(dist.size());
  for (const auto& [id, d] : dist) cone.members.push_back(id);
  std::sort(cone.members.begin(), cone.members.end());
  for (NodeId m : cone.members) {
    std::vector<NodeId> srcs;
    for (NodeId f : aig.fanins(m))
      if (cone.contains(f)) srcs.push_back(f);
    std::sort(srcs.begin(), srcs.end());
    srcs.erase(std::unique(srcs.begin(), srcs.end()), srcs.end());
    for (NodeId f : srcs) cone.local_edges.push_back({f, m});
  }
  return cone;
}

PartitionPlan::PartitionPlan(int k, int delta, std::vector<int> sampled_levels, std::vector<Cone> cones,
                             std::vector<NodeId> uncovered_before_fallback)
    : k_(k),
      delta_(delta),
      sampled_levels_(std::move(sampled_levels)),
      cones_(std::move(cones)),
      uncovered_(std::move(uncovered_before_fallback)) {
  std::stable_sort(cones_.begin(), cones_.end(), [](const Cone& a, const Cone& b) {
    return a.output_level != b.output_level ? a.output_level < b.output_level : a.output_id < b.output_id;
  });
  for (std::size_t i = 0; i < cones_.size();) {
    std::size_t j = i;
    while (j < cones_.size() && cones_[j].output_level == cones_[i].output_level) ++j;
    ranges_.push_back({cones_[i].output_level, i, j});
    i = j;
  }
}

std::span<const Cone> PartitionPlan::cones_at(int level) const {
  for (const auto& r : ranges_)
    if (r.level == level) return std::span<const Cone>(cones_).subspan(r.begin, r.end - r.begin);
  return {};
}

std::size_t PartitionPlan::fallback_count() const noexcept {
  return static_cast<std::size_t>(
      std::count_if(cones_.begin(), cones_.end(), [](const Cone& c) { return c.fallback; }));
}

PartitionPlan partition(const Aig& aig, int k, int delta) {
  if (k < 1) throw Error(ErrorCode::kInvalidArgument, "partition: k must be >= 1");
  if (delta < 1 || delta >= k)
    throw Error(ErrorCode::kInvalidArgument, "partition: stride delta must satisfy 1 <= delta < k (got k=" +
                                                 std::to_string(k) + ", delta=" + std::to_string(delta) + ")");
  if (aig.empty()) throw Error(ErrorCode::kInvalidArgument, "partition: empty graph");
  if (!aig.finalized()) throw Error(ErrorCode::kInvalidArgument, "partition: Aig must be finalized");

  const auto groups = topo_levels(aig);
  const int max_level = aig.max_level();
  std::vector<int> sampled;
  for (int l = k; l <= max_level; l += delta) sampled.push_back(l);

  std::vector<Cone> cones;
  std::vector<bool> collected(aig.size(), false);
  for (int l : sampled) {
    for (NodeId v : groups[static_cast<std::size_t>(l)]) {
      cones.push_back(cone_k(aig, v, k));
      collected[v] = true;
    }
  }
  for (NodeId v : aig.pos()) {
    if (collected[v]) continue;
    cones.push_back(cone_k(aig, v, k));
    collected[v] = true;
  }

  std::vector<bool> covered(aig.size(), false);
  for (const auto& c : cones)
    for (NodeId m : c.members) covered[m] = true;
  std::vector<NodeId> uncovered;
  for (NodeId v = 0; v < aig.size(); ++v)
    if (!covered[v]) uncovered.push_back(v);

  // Highest uncovered node first so each fallback cone absorbs its ancestors.
  std::vector<NodeId> order = uncovered;
  std::sort(order.begin(), order.end(), [&](NodeId a, NodeId b) {
    return aig.level(a) != aig.level(b) ? aig.level(a) > aig.level(b) : a < b;
  });
  for (NodeId u : order) {
    if (covered[u]) continue;
    Cone c = cone_k(aig, u, k);
    c.fallback = true;
    for (NodeId m : c.members) covered[m] = true;
    cones.push_back(std::move(c));
  }
  return PartitionPlan(k, delta, std::move(sampled), std::move(cones), std::move(uncovered));
}

VirtualEdgeSet virtual_edges(const Cone& cone, int k) {
  const std::size_t n = cone.members.size();
  std::vector<std::vector<std::size_t>> fanins(n);
  for (const auto& e : cone.local_edges) fanins[*cone.local_index(e.dst)].push_back(*cone.local_index(e.src));

  VirtualEdgeSet out;
  std::vector<int> dist(n, -1);
  std::vector<std::size_t> touched;
  for (std::size_t dst = 0; dst < n; ++dst) {
    std::deque<std::size_t> queue{dst};
    dist[dst] = 0;
    touched.assign(1, dst);
    std::vector<NodeId> sources;
    while (!queue.empty()) {
      auto u = queue.front();
      queue.pop_front();
      if (dist[u] == k) continue;
      for (auto f : fanins[u]) {
        if (dist[f] >= 0) continue;
        dist[f] = dist[u] + 1;
        touched.push_back(f);
        sources.push_back(cone.members[f]);
        queue.push_back(f);
      }
    }
    for (auto t : touched) dist[t] = -1;
    std::sort(sources.begin(), sources.end());
    for (NodeId s : sources) out.edges.push_back({s, cone.members[dst]});
  }
  return out;
}

CoverageReport coverage_report(const PartitionPlan& plan, const Aig& aig) {
  CoverageReport r;
  std::vector<bool> covered(aig.size(), false);
  for (const auto& c : plan.cones()) {
    if (c.fallback) {
      ++r.fallback_cones;
      continue;
    }
    for (NodeId m : c.members) covered[m] = true;
  }
  for (NodeId v = 0; v < aig.size(); ++v)
    if (!covered[v]) r.uncovered.push_back(v);

  std::vector<std::uint8_t> prev_union, cur_union;
  bool have_prev = false;
  for (const auto& range : plan.level_ranges()) {
    std::unordered_map<NodeId, std::vector<std::size_t>> owners;
    cur_union.assign(aig.size(), 0);
    for (std::size_t i = range.begin; i < range.end; ++i)
      for (NodeId m : plan.cone(i).members) {
        owners[m].push_back(i);
        cur_union[m] = 1;
      }

    std::map<std::pair<std::size_t, std::size_t>, std::size_t> pair_sizes;
    for (const auto& [node, list] : owners) {
      if (list.size() < 2) continue;
      ++r.intra_overlap_nodes;
      for (std::size_t a = 0; a < list.size(); ++a)
        for (std::size_t b = a + 1; b < list.size(); ++b) ++pair_sizes[{list[a], list[b]}];
      bool closed = true;
      for (NodeId f : aig.fanins(node)) {
        auto it = owners.find(f);
        if (it == owners.end()) continue;
        for (auto c : list) closed &= std::find(it->second.begin(), it->second.end(), c) != it->second.end();
      }
      if (closed) ++r.intra_fanin_closed;
    }
    for (const auto& [pair, size] : pair_sizes) ++r.intra_overlap[size];

    if (have_prev) {
      std::size_t shared = 0;
      for (std::size_t v = 0; v < aig.size(); ++v) shared += (prev_union[v] && cur_union[v]) ? 1 : 0;
      r.inter_overlap.push_back(shared);
    }
    prev_union.swap(cur_union);
    have_prev = true;
  }
  return r;
}

}  // namespace aigflow
