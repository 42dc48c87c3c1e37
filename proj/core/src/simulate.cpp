#include "aigflow/simulate.hpp"

#include <algorithm>
#include <bit>

#include "aigflow/error.hpp"
#include "aigflow/random.hpp"

namespace aigflow {

std::size_t BitVector::popcount() const {
  std::size_t n = 0;
  for (auto w : words_) n += static_cast<std::size_t>(std::popcount(w));
  return n;
}

void BitVector::mask_tail() {
  if (size_ % 64 != 0 && !words_.empty()) words_.back() &= (std::uint64_t{1} << (size_ % 64)) - 1;
}

std::string BitVector::to_string() const {
  std::string s(size_, '0');
  for (std::size_t i = 0; i < size_; ++i)
    if (get(i)) s[i] = '1';
  return s;
}

PatternSet PatternSet::exhaustive(std::vector<NodeId> pi_ids) {
  if (pi_ids.size() > 24)
    throw Error(ErrorCode::kInvalidArgument, "exhaustive simulation limited to 24 inputs");
  PatternSet p;
  p.pi_ids = std::move(pi_ids);
  p.mode = PatternMode::kExhaustive;
  p.num_patterns = std::size_t{1} << p.pi_ids.size();
  for (std::size_t j = 0; j < p.pi_ids.size(); ++j) {
    BitVector col(p.num_patterns);
    for (std::size_t r = 0; r < p.num_patterns; ++r)
      if ((r >> j) & 1U) col.set(r, true);
    p.columns.push_back(std::move(col));
  }
  return p;
}

PatternSet PatternSet::random(std::vector<NodeId> pi_ids, std::size_t count, std::uint64_t seed) {
  PatternSet p;
  p.pi_ids = std::move(pi_ids);
  p.mode = PatternMode::kRandom;
  p.seed = seed;
  p.num_patterns = count;
  for (std::size_t j = 0; j < p.pi_ids.size(); ++j) {
    Rng rng(derive_seed(seed, {j}));
    BitVector col(count);
    for (auto& w : col.words()) w = rng.next();
    col.mask_tail();
    p.columns.push_back(std::move(col));
  }
  return p;
}

PatternSet default_patterns(const Aig& aig, std::uint64_t seed, const SimulationBudget& budget) {
  std::vector<NodeId> pis(aig.inputs().begin(), aig.inputs().end());
  if (pis.size() <= budget.exhaustive_max_pis) return PatternSet::exhaustive(std::move(pis));
  return PatternSet::random(std::move(pis), budget.random_patterns, seed);
}

ResponseTable simulate(const Aig& aig, const PatternSet& patterns) {
  if (!std::equal(aig.inputs().begin(), aig.inputs().end(), patterns.pi_ids.begin(), patterns.pi_ids.end()))
    throw Error(ErrorCode::kShapeMismatch, "simulate: pattern PI list does not match the graph inputs");
  if (patterns.columns.size() != patterns.pi_ids.size())
    throw Error(ErrorCode::kShapeMismatch, "simulate: pattern columns do not match the PI list");

  ResponseTable table;
  table.num_patterns = patterns.num_patterns;
  table.rows.assign(aig.size(), BitVector(patterns.num_patterns));
  for (std::size_t j = 0; j < patterns.pi_ids.size(); ++j) table.rows[patterns.pi_ids[j]] = patterns.columns[j];

  for (const auto& group : topo_levels(aig)) {
    for (NodeId v : group) {
      auto out = table.rows[v].words();
      switch (aig.type(v)) {
        case GateType::kPi:
          break;  // inputs already placed, constants stay 0
        case GateType::kAnd: {
          auto f = aig.fanins(v);
          auto a = table.rows[f[0]].words();
          auto b = table.rows[f[1]].words();
          for (std::size_t w = 0; w < out.size(); ++w) out[w] = a[w] & b[w];
          break;
        }
        case GateType::kNot: {
          auto a = table.rows[aig.fanins(v)[0]].words();
          for (std::size_t w = 0; w < out.size(); ++w) out[w] = ~a[w];
          table.rows[v].mask_tail();
          break;
        }
      }
    }
  }
  return table;
}

std::vector<double> gate_prob(const ResponseTable& responses) {
  if (responses.num_patterns == 0) throw Error(ErrorCode::kInvalidArgument, "gate_prob: zero patterns");
  std::vector<double> p;
  p.reserve(responses.rows.size());
  for (const auto& row : responses.rows)
    p.push_back(static_cast<double>(row.popcount()) / static_cast<double>(responses.num_patterns));
  return p;
}

double tt_pair_distance(const BitVector& a, const BitVector& b) {
  if (a.size() != b.size()) throw Error(ErrorCode::kShapeMismatch, "tt_pair_distance: length mismatch");
  if (a.size() == 0) throw Error(ErrorCode::kInvalidArgument, "tt_pair_distance: empty vectors");
  std::size_t diff = 0;
  auto wa = a.words();
  auto wb = b.words();
  for (std::size_t w = 0; w < wa.size(); ++w) diff += static_cast<std::size_t>(std::popcount(wa[w] ^ wb[w]));
  return static_cast<double>(diff) / static_cast<double>(a.size());
}

std::vector<GatePair> sample_gate_tt_pairs(const ResponseTable& responses, std::size_t count, std::uint64_t seed) {
  const std::size_t n = responses.rows.size();
  if (n < 2) throw Error(ErrorCode::kInvalidArgument, "sample_gate_tt_pairs: need at least 2 nodes");
  Rng rng(seed);
  std::vector<GatePair> out;
  out.reserve(count);
  for (std::size_t s = 0; s < count; ++s) {
    auto i = static_cast<NodeId>(rng.below(n));
    auto j = static_cast<NodeId>(rng.below(n - 1));
    if (j >= i) ++j;
    out.push_back({i, j, tt_pair_distance(responses.rows[i], responses.rows[j])});
  }
  return out;
}

Reachability::Reachability(const Aig& aig) : ancestors_(aig.size(), BitVector(aig.size())) {
  for (const auto& group : topo_levels(aig))
    for (NodeId v : group)
      for (NodeId f : aig.fanins(v)) {
        auto dst = ancestors_[v].words();
        auto src = ancestors_[f].words();
        for (std::size_t w = 0; w < dst.size(); ++w) dst[w] |= src[w];
        ancestors_[v].set(f, true);
      }
}

namespace {

// Position of the r-th set bit.
std::size_t select_bit(const BitVector& bits, std::size_t r) {
  auto words = bits.words();
  for (std::size_t w = 0; w < words.size(); ++w) {
    auto c = static_cast<std::size_t>(std::popcount(words[w]));
    if (r < c) {
      auto word = words[w];
      for (std::size_t i = 0; i < r; ++i) word &= word - 1;
      return w * 64 + static_cast<std::size_t>(std::countr_zero(word));
    }
    r -= c;
  }
  throw Error(ErrorCode::kOutOfRange, "select_bit: rank out of range");
}

}  // namespace

std::vector<ConPair> sample_con_pairs(const Aig& aig, const Reachability& reach, std::size_t count,
                                      std::uint64_t seed) {
  const std::size_t n = aig.size();
  std::vector<ConPair> out;
  if (n < 2 || count == 0) return out;
  Rng rng(seed);

  std::vector<NodeId> with_ancestors;
  std::vector<std::size_t> ancestor_count(n, 0);
  for (NodeId v = 0; v < n; ++v) {
    ancestor_count[v] = reach.ancestors(v).popcount();
    if (ancestor_count[v] > 0) with_ancestors.push_back(v);
  }

  const std::size_t want_pos = with_ancestors.empty() ? 0 : count / 2;
  for (std::size_t s = 0; s < want_pos; ++s) {
    NodeId v = with_ancestors[rng.below(with_ancestors.size())];
    auto u = static_cast<NodeId>(select_bit(reach.ancestors(v), rng.below(ancestor_count[v])));
    if (rng.coin()) out.push_back({u, v, 1});
    else out.push_back({v, u, 1});
  }
  const std::size_t max_attempts = 64 * count + 1024;
  std::size_t attempts = 0;
  while (out.size() < count) {
    auto i = static_cast<NodeId>(rng.below(n));
    auto j = static_cast<NodeId>(rng.below(n - 1));
    if (j >= i) ++j;
    const bool conn = reach.connected(i, j);
    if (conn && attempts++ < max_attempts) continue;  // hunting for negatives
    out.push_back({i, j, conn ? 1 : 0});
  }
  rng.shuffle(out);
  return out;
}

std::vector<ConPair> sample_con_pairs(const Aig& aig, std::size_t count, std::uint64_t seed) {
  return sample_con_pairs(aig, Reachability(aig), count, seed);
}

std::vector<NodeId> cone_support(const Aig& aig, const Cone& cone) {
  std::vector<NodeId> support;
  for (NodeId m : cone.members) {
    if (aig.type(m) == GateType::kPi) {
      if (!aig.is_constant(m)) support.push_back(m);
      continue;
    }
    for (NodeId f : aig.fanins(m))
      if (!cone.contains(f)) {
        support.push_back(m);
        break;
      }
  }
  return support;
}

std::optional<std::uint64_t> cone_truth_table(const Aig& aig, const Cone& cone) {
  static constexpr std::uint64_t kProjection[6] = {
      0xAAAAAAAAAAAAAAAAULL, 0xCCCCCCCCCCCCCCCCULL, 0xF0F0F0F0F0F0F0F0ULL,
      0xFF00FF00FF00FF00ULL, 0xFFFF0000FFFF0000ULL, 0xFFFFFFFF00000000ULL};
  const auto support = cone_support(aig, cone);
  if (support.size() != 6) return std::nullopt;

  std::vector<NodeId> order = cone.members;
  std::stable_sort(order.begin(), order.end(), [&](NodeId a, NodeId b) { return aig.level(a) < aig.level(b); });
  std::vector<std::uint64_t> value(cone.members.size(), 0);
  auto at = [&](NodeId v) -> std::uint64_t& { return value[*cone.local_index(v)]; };
  for (NodeId v : order) {
    auto it = std::lower_bound(support.begin(), support.end(), v);
    if (it != support.end() && *it == v) {
      at(v) = kProjection[it - support.begin()];
      continue;
    }
    switch (aig.type(v)) {
      case GateType::kPi: at(v) = 0; break;  // constant
      case GateType::kAnd: at(v) = at(aig.fanins(v)[0]) & at(aig.fanins(v)[1]); break;
      case GateType::kNot: at(v) = ~at(aig.fanins(v)[0]); break;
    }
  }
  return at(cone.output_id);
}

SizeDepth cone_size_depth(const Cone& cone) {
  const std::size_t n = cone.members.size();
  std::vector<std::vector<std::size_t>> fanouts(n);
  std::vector<std::size_t> indeg(n, 0);
  for (const auto& e : cone.local_edges) {
    fanouts[*cone.local_index(e.src)].push_back(*cone.local_index(e.dst));
    ++indeg[*cone.local_index(e.dst)];
  }
  std::vector<std::size_t> longest(n, 0), ready;
  for (std::size_t i = 0; i < n; ++i)
    if (indeg[i] == 0) ready.push_back(i);
  while (!ready.empty()) {
    auto u = ready.back();
    ready.pop_back();
    for (auto w : fanouts[u]) {
      longest[w] = std::max(longest[w], longest[u] + 1);
      if (--indeg[w] == 0) ready.push_back(w);
    }
  }
  return {n, longest[*cone.local_index(cone.output_id)]};
}

std::vector<InPair> sample_in_pairs(const PartitionPlan& plan, std::size_t node_count, std::size_t count,
                                    std::uint64_t seed) {
  std::vector<InPair> out;
  const auto cones = plan.cones();
  if (cones.empty() || node_count == 0 || count == 0) return out;
  Rng rng(seed);
  const std::size_t want_pos = count / 2;
  for (std::size_t s = 0; s < want_pos; ++s) {
    auto c = static_cast<std::size_t>(rng.below(cones.size()));
    const auto& members = cones[c].members;
    out.push_back({members[rng.below(members.size())], c, 1});
  }
  const std::size_t max_attempts = 64 * count + 1024;
  std::size_t attempts = 0;
  while (out.size() < count) {
    auto c = static_cast<std::size_t>(rng.below(cones.size()));
    auto g = static_cast<NodeId>(rng.below(node_count));
    const bool in = cones[c].contains(g);
    if (in && attempts++ < max_attempts) continue;
    out.push_back({g, c, in ? 1 : 0});
  }
  rng.shuffle(out);
  return out;
}

}  // namespace aigflow
