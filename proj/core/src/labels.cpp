#include "aigflow/labels.hpp"

#include <bit>

#include "aigflow/ged.hpp"
#include "aigflow/random.hpp"

namespace aigflow {

double tt64_distance(std::uint64_t a, std::uint64_t b) { return std::popcount(a ^ b) / 64.0; }

namespace {
std::uint64_t stream_seed(std::uint64_t seed, LabelStream s) {
  return derive_seed(seed, {static_cast<std::uint64_t>(s)});
}
}  // namespace

LabelSet generate_labels(const Aig& aig, const PartitionPlan& plan, const LabelConfig& config,
                         ResponseTable* responses_out) {
  LabelSet labels;
  labels.seed = config.seed;

  const auto patterns = default_patterns(aig, stream_seed(config.seed, LabelStream::kPatterns), config.budget);
  labels.sim_mode = patterns.mode;
  labels.num_patterns = patterns.num_patterns;
  auto responses = simulate(aig, patterns);
  labels.gate_prob = gate_prob(responses);
  if (aig.size() >= 2)
    labels.gate_tt_pairs =
        sample_gate_tt_pairs(responses, config.gate_tt_pairs, stream_seed(config.seed, LabelStream::kGateTt));
  labels.con_pairs = sample_con_pairs(aig, config.con_pairs, stream_seed(config.seed, LabelStream::kCon));
  labels.in_pairs =
      sample_in_pairs(plan, aig.size(), config.in_pairs, stream_seed(config.seed, LabelStream::kIn));

  std::vector<std::size_t> small;
  for (std::size_t id = 0; id < plan.cones().size(); ++id) {
    const auto& cone = plan.cone(id);
    const auto sd = cone_size_depth(cone);
    ConeLabel cl{id, sd.size, sd.depth, cone_truth_table(aig, cone)};
    if (!cl.tt64) ++labels.tt_skipped;
    labels.cones.push_back(cl);
    if (cone.members.size() <= config.ged_node_limit) small.push_back(id);
  }
  labels.ged_eligible = small.size();
  if (small.size() >= 2) {
    Rng rng(stream_seed(config.seed, LabelStream::kGed));
    for (std::size_t s = 0; s < config.ged_pairs; ++s) {
      auto a = rng.below(small.size());
      auto b = rng.below(small.size() - 1);
      if (b >= a) ++b;
      const auto s1 = small[a], s2 = small[b];
      auto d = ged(cone_graph(aig, plan.cone(s1)), cone_graph(aig, plan.cone(s2)), config.ged_node_limit);
      labels.ged_pairs.push_back({s1, s2, *d});
    }
  }
  if (responses_out) *responses_out = std::move(responses);
  return labels;
}

}  // namespace aigflow
