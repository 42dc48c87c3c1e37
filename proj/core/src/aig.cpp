#include "aigflow/aig.hpp"

#include <algorithm>
#include <numeric>
#include <set>

#include "aigflow/error.hpp"

namespace aigflow {

std::string_view to_string(GateType t) noexcept {
  switch (t) {
    case GateType::kPi: return "PI";
    case GateType::kAnd: return "AND";
    case GateType::kNot: return "NOT";
  }
  return "?";
}

std::string_view to_string(ViolationKind k) noexcept {
  switch (k) {
    case ViolationKind::kDanglingId: return "dangling_id";
    case ViolationKind::kInDegree: return "in_degree";
    case ViolationKind::kCycle: return "cycle";
    case ViolationKind::kDuplicateEdge: return "duplicate_edge";
  }
  return "?";
}

Aig::Aig(std::vector<GateType> types, std::vector<Edge> edges,
         std::vector<NodeId> outputs, std::vector<NodeId> constants)
    : types_(std::move(types)),
      edges_(std::move(edges)),
      outputs_(std::move(outputs)),
      constants_(std::move(constants)) {
  constant_flag_.assign(types_.size(), false);
  for (auto c : constants_)
    if (c < types_.size()) constant_flag_[c] = true;
  build_adjacency();
}

void Aig::build_adjacency() {
  const std::size_t n = types_.size();
  fanin_offsets_.assign(n + 1, 0);
  fanout_offsets_.assign(n + 1, 0);
  for (const auto& e : edges_) {
    if (e.src >= n || e.dst >= n) continue;
    ++fanin_offsets_[e.dst + 1];
    ++fanout_offsets_[e.src + 1];
  }
  std::partial_sum(fanin_offsets_.begin(), fanin_offsets_.end(), fanin_offsets_.begin());
  std::partial_sum(fanout_offsets_.begin(), fanout_offsets_.end(), fanout_offsets_.begin());
  fanin_ids_.assign(fanin_offsets_[n], 0);
  fanout_ids_.assign(fanout_offsets_[n], 0);
  std::vector<std::size_t> in_fill(fanin_offsets_.begin(), fanin_offsets_.end() - 1);
  std::vector<std::size_t> out_fill(fanout_offsets_.begin(), fanout_offsets_.end() - 1);
  for (const auto& e : edges_) {
    if (e.src >= n || e.dst >= n) continue;
    fanin_ids_[in_fill[e.dst]++] = e.src;
    fanout_ids_[out_fill[e.src]++] = e.dst;
  }
}

std::span<const NodeId> Aig::fanins(NodeId v) const {
  if (v >= size()) throw Error(ErrorCode::kOutOfRange, "node id " + std::to_string(v) + " out of range");
  return {fanin_ids_.data() + fanin_offsets_[v], fanin_offsets_[v + 1] - fanin_offsets_[v]};
}

std::span<const NodeId> Aig::fanouts(NodeId v) const {
  if (v >= size()) throw Error(ErrorCode::kOutOfRange, "node id " + std::to_string(v) + " out of range");
  return {fanout_ids_.data() + fanout_offsets_[v], fanout_offsets_[v + 1] - fanout_offsets_[v]};
}

bool Aig::is_constant(NodeId v) const { return v < constant_flag_.size() && constant_flag_[v]; }

int Aig::level(NodeId v) const {
  if (!finalized_) throw Error(ErrorCode::kInvalidArgument, "levels requested on a non-finalized Aig");
  if (v >= size()) throw Error(ErrorCode::kOutOfRange, "node id " + std::to_string(v) + " out of range");
  return levels_[v];
}

void Aig::finalize() {
  if (finalized_) return;
  const auto report = validate(*this);
  if (!report.ok()) {
    const auto& first = report.violations.front();
    const auto code = first.kind == ViolationKind::kCycle ? ErrorCode::kCycle : ErrorCode::kInvariantBreach;
    throw Error(code, "invalid AIG: " + first.message);
  }
  levels_ = compute_levels(*this);
  max_level_ = levels_.empty() ? -1 : *std::max_element(levels_.begin(), levels_.end());

  inputs_.clear();
  pos_.clear();
  for (NodeId v = 0; v < size(); ++v) {
    if (types_[v] == GateType::kPi && !constant_flag_[v]) inputs_.push_back(v);
    if (fanouts(v).empty()) pos_.push_back(v);
  }

  // union-find for weakly-connected components
  std::vector<NodeId> parent(size());
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](NodeId x) {
    while (parent[x] != x) {
      parent[x] = parent[parent[x]];
      x = parent[x];
    }
    return x;
  };
  for (const auto& e : edges_) {
    auto a = find(e.src), b = find(e.dst);
    if (a != b) parent[std::max(a, b)] = std::min(a, b);
  }
  components_.assign(size(), 0);
  std::vector<std::uint32_t> index(size(), UINT32_MAX);
  component_count_ = 0;
  for (NodeId v = 0; v < size(); ++v) {
    auto r = find(v);
    if (index[r] == UINT32_MAX) index[r] = static_cast<std::uint32_t>(component_count_++);
    components_[v] = index[r];
  }
  finalized_ = true;
}

void AigBuilder::check(NodeId v) const {
  if (v >= types_.size()) throw Error(ErrorCode::kOutOfRange, "builder: unknown node " + std::to_string(v));
}

NodeId AigBuilder::add_pi() {
  types_.push_back(GateType::kPi);
  return static_cast<NodeId>(types_.size() - 1);
}

NodeId AigBuilder::add_constant() {
  auto id = add_pi();
  constants_.push_back(id);
  return id;
}

NodeId AigBuilder::add_and(NodeId a, NodeId b) {
  check(a);
  check(b);
  if (a == b) throw Error(ErrorCode::kInvalidArgument, "builder: AND with identical operands");
  types_.push_back(GateType::kAnd);
  auto id = static_cast<NodeId>(types_.size() - 1);
  edges_.push_back({a, id});
  edges_.push_back({b, id});
  return id;
}

NodeId AigBuilder::add_not(NodeId a) {
  check(a);
  types_.push_back(GateType::kNot);
  auto id = static_cast<NodeId>(types_.size() - 1);
  edges_.push_back({a, id});
  return id;
}

void AigBuilder::add_output(NodeId v) {
  check(v);
  outputs_.push_back(v);
}

Aig AigBuilder::build() && {
  Aig aig(std::move(types_), std::move(edges_), std::move(outputs_), std::move(constants_));
  aig.finalize();
  return aig;
}

std::vector<int> compute_levels(const Aig& aig) {
  const std::size_t n = aig.size();
  std::vector<std::size_t> pending(n);
  std::vector<int> level(n, 0);
  std::vector<NodeId> ready;
  for (NodeId v = 0; v < n; ++v) {
    pending[v] = aig.fanins(v).size();
    if (pending[v] == 0) ready.push_back(v);
  }
  std::size_t visited = 0;
  // Kahn; the ready stack order does not affect the result.
  while (!ready.empty()) {
    NodeId v = ready.back();
    ready.pop_back();
    ++visited;
    for (NodeId w : aig.fanouts(v)) {
      level[w] = std::max(level[w], level[v] + 1);
      if (--pending[w] == 0) ready.push_back(w);
    }
  }
  if (visited != n) throw Error(ErrorCode::kCycle, "cycle detected while computing levels");
  for (NodeId v = 0; v < n; ++v)
    if (aig.type(v) == GateType::kPi) level[v] = 0;
  return level;
}

std::vector<std::vector<NodeId>> topo_levels(const Aig& aig) {
  std::vector<std::vector<NodeId>> groups;
  if (aig.empty()) return groups;
  const auto levels = aig.finalized() ? std::vector<int>(aig.levels().begin(), aig.levels().end())
                                      : compute_levels(aig);
  const int max_level = *std::max_element(levels.begin(), levels.end());
  groups.resize(static_cast<std::size_t>(max_level) + 1);
  for (NodeId v = 0; v < aig.size(); ++v) groups[levels[v]].push_back(v);
  return groups;
}

FanoutStats fanout_stats(const Aig& aig, NodeId v) {
  FanoutStats s;
  for (NodeId w : aig.fanouts(v)) {
    switch (aig.type(w)) {
      case GateType::kAnd: ++s.out_and; break;
      case GateType::kNot: ++s.out_not; break;
      case GateType::kPi: break;  // only reachable in invalid graphs
    }
  }
  return s;
}

std::size_t ValidationReport::count(ViolationKind k) const {
  return static_cast<std::size_t>(std::count_if(violations.begin(), violations.end(),
                                                [k](const Violation& v) { return v.kind == k; }));
}

namespace {

// Strongly connected components of size > 1 (or self-loops); iterative Tarjan.
std::vector<std::vector<NodeId>> cyclic_components(const Aig& aig) {
  const std::size_t n = aig.size();
  constexpr std::uint32_t kUnset = UINT32_MAX;
  std::vector<std::uint32_t> index(n, kUnset), low(n, 0);
  std::vector<bool> on_stack(n, false);
  std::vector<NodeId> stack;
  std::vector<std::vector<NodeId>> result;
  std::uint32_t counter = 0;

  struct Frame {
    NodeId v;
    std::size_t next;
  };
  for (NodeId root = 0; root < n; ++root) {
    if (index[root] != kUnset) continue;
    std::vector<Frame> frames{{root, 0}};
    index[root] = low[root] = counter++;
    stack.push_back(root);
    on_stack[root] = true;
    while (!frames.empty()) {
      auto& f = frames.back();
      auto outs = aig.fanouts(f.v);
      if (f.next < outs.size()) {
        NodeId w = outs[f.next++];
        if (index[w] == kUnset) {
          index[w] = low[w] = counter++;
          stack.push_back(w);
          on_stack[w] = true;
          frames.push_back({w, 0});
        } else if (on_stack[w]) {
          low[f.v] = std::min(low[f.v], index[w]);
        }
        continue;
      }
      NodeId v = f.v;
      frames.pop_back();
      if (!frames.empty()) low[frames.back().v] = std::min(low[frames.back().v], low[v]);
      if (low[v] == index[v]) {
        std::vector<NodeId> comp;
        NodeId w;
        do {
          w = stack.back();
          stack.pop_back();
          on_stack[w] = false;
          comp.push_back(w);
        } while (w != v);
        bool self_loop = false;
        for (NodeId x : aig.fanouts(v)) self_loop |= (x == v);
        if (comp.size() > 1 || self_loop) {
          std::sort(comp.begin(), comp.end());
          result.push_back(std::move(comp));
        }
      }
    }
  }
  std::sort(result.begin(), result.end());
  return result;
}

}  // namespace

ValidationReport validate(const Aig& aig) {
  ValidationReport report;
  const std::size_t n = aig.size();
  auto add = [&](ViolationKind k, NodeId v, std::string msg) {
    report.violations.push_back({k, v, std::move(msg)});
  };

  for (const auto& e : aig.edges()) {
    if (e.src >= n || e.dst >= n)
      add(ViolationKind::kDanglingId, e.src >= n ? e.src : e.dst,
          "edge (" + std::to_string(e.src) + ", " + std::to_string(e.dst) + ") references a missing node");
  }
  for (NodeId o : aig.outputs())
    if (o >= n) add(ViolationKind::kDanglingId, o, "output " + std::to_string(o) + " references a missing node");
  for (NodeId c : aig.constants())
    if (c >= n || aig.type(c) != GateType::kPi)
      add(ViolationKind::kDanglingId, c, "constant " + std::to_string(c) + " is not a PI node");

  std::set<Edge> seen;
  for (const auto& e : aig.edges()) {
    if (!seen.insert(e).second)
      add(ViolationKind::kDuplicateEdge, e.dst,
          "duplicate edge (" + std::to_string(e.src) + ", " + std::to_string(e.dst) + ")");
  }

  for (NodeId v = 0; v < n; ++v) {
    const auto want = required_fanins(aig.type(v));
    const auto have = aig.fanins(v).size();
    if (want != have)
      add(ViolationKind::kInDegree, v,
          std::string(to_string(aig.type(v))) + " node " + std::to_string(v) + " has in-degree " +
              std::to_string(have) + ", expected " + std::to_string(want));
  }

  for (const auto& comp : cyclic_components(aig)) {
    std::string msg = "cycle through nodes {";
    for (std::size_t i = 0; i < comp.size(); ++i) msg += (i ? ", " : "") + std::to_string(comp[i]);
    add(ViolationKind::kCycle, comp.front(), msg + "}");
  }
  return report;
}

Aig duplicate(const Aig& aig, std::size_t copies) {
  if (copies == 0) throw Error(ErrorCode::kInvalidArgument, "duplicate: copies must be >= 1");
  const auto n = static_cast<NodeId>(aig.size());
  std::vector<GateType> types;
  std::vector<Edge> edges;
  std::vector<NodeId> outputs, constants;
  types.reserve(n * copies);
  edges.reserve(aig.edge_count() * copies);
  for (std::size_t c = 0; c < copies; ++c) {
    const auto off = static_cast<NodeId>(c * n);
    types.insert(types.end(), aig.types().begin(), aig.types().end());
    for (const auto& e : aig.edges()) edges.push_back({e.src + off, e.dst + off});
    for (auto o : aig.outputs()) outputs.push_back(o + off);
    for (auto k : aig.constants()) constants.push_back(k + off);
  }
  Aig out(std::move(types), std::move(edges), std::move(outputs), std::move(constants));
  out.finalize();
  return out;
}

AigStats stats(const Aig& aig) {
  AigStats s;
  s.nodes = aig.size();
  s.edges = aig.edge_count();
  s.pis = aig.inputs().size();
  s.pos = aig.pos().size();
  s.constants = aig.constants().size();
  for (auto t : aig.types()) {
    if (t == GateType::kAnd) ++s.ands;
    if (t == GateType::kNot) ++s.nots;
  }
  s.max_level = std::max(aig.max_level(), 0);
  return s;
}

}  // namespace aigflow
