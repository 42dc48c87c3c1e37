#include "aigflow/generate.hpp"

#include <algorithm>

#include "aigflow/error.hpp"
#include "aigflow/random.hpp"

namespace aigflow {

Aig random_aig(const RandomAigConfig& config) {
  if (config.pis == 0) throw Error(ErrorCode::kInvalidArgument, "random_aig: need at least one PI");
  Rng rng(config.seed);
  AigBuilder b;
  std::vector<GateType> type;
  for (std::size_t i = 0; i < config.pis; ++i) {
    b.add_pi();
    type.push_back(GateType::kPi);
  }
  auto pick = [&](std::size_t exclude) {
    const std::size_t n = type.size();
    const std::size_t lo = config.window ? n - std::min(n, config.window) : 0;
    for (;;) {
      const auto v = lo + static_cast<std::size_t>(rng.below(n - lo));
      if (v != exclude) return v;
    }
  };
  while (type.size() < config.pis + config.gates) {
    const bool want_not = rng.uniform() < config.not_fraction;
    if (want_not) {
      const auto a = pick(type.size());
      if (type[a] == GateType::kNot) continue;
      b.add_not(static_cast<NodeId>(a));
      type.push_back(GateType::kNot);
    } else {
      if (type.size() < 2) continue;
      const auto a = pick(type.size());
      const auto c = pick(a);
      b.add_and(static_cast<NodeId>(a), static_cast<NodeId>(c));
      type.push_back(GateType::kAnd);
    }
  }
  return std::move(b).build();
}

Aig and_tree(int depth) {
  if (depth < 0 || depth > 20) throw Error(ErrorCode::kOutOfRange, "and_tree: depth out of range");
  AigBuilder b;
  std::vector<NodeId> layer;
  for (std::size_t i = 0; i < (std::size_t{1} << depth); ++i) layer.push_back(b.add_pi());
  while (layer.size() > 1) {
    std::vector<NodeId> next;
    for (std::size_t i = 0; i < layer.size(); i += 2) next.push_back(b.add_and(layer[i], layer[i + 1]));
    layer = std::move(next);
  }
  b.add_output(layer[0]);
  return std::move(b).build();
}

Aig ladder(std::size_t length, std::size_t chains) {
  AigBuilder b;
  for (std::size_t c = 0; c < chains; ++c) {
    NodeId cur = b.add_pi();
    for (std::size_t s = 0; s < length; ++s) {
      const NodeId side = b.add_pi();
      cur = b.add_and(b.add_not(cur), side);
    }
    b.add_output(cur);
  }
  return std::move(b).build();
}

}  // namespace aigflow
