#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "aigflow/aig.hpp"
#include "aigflow/partition.hpp"
#include "aigflow/simulate.hpp"

namespace aigflow {

struct ConeLabel {
  std::size_t id = 0;
  std::size_t size = 0;
  std::size_t depth = 0;
  std::optional<std::uint64_t> tt64;
};

struct GedPair {
  std::size_t s1 = 0;
  std::size_t s2 = 0;
  std::size_t distance = 0;
};

/// Simulation-derived supervision for one circuit and its partition.
struct LabelSet {
  std::vector<double> gate_prob;
  std::vector<GatePair> gate_tt_pairs;
  std::vector<ConPair> con_pairs;
  std::vector<ConeLabel> cones;  // index = cone id
  std::vector<GedPair> ged_pairs;
  std::vector<InPair> in_pairs;
  std::uint64_t seed = 0;
  PatternMode sim_mode = PatternMode::kExhaustive;
  std::size_t num_patterns = 0;
  std::size_t tt_skipped = 0;   // cones whose support is not exactly 6
  std::size_t ged_eligible = 0; // cones within the GED node limit
};

struct LabelConfig {
  std::size_t gate_tt_pairs = 1000;
  std::size_t con_pairs = 1000;
  std::size_t in_pairs = 1000;
  std::size_t ged_pairs = 200;
  std::size_t ged_node_limit = 10;
  SimulationBudget budget;
  std::uint64_t seed = 0;
};

// Seed tags for the per-task RNG streams.
enum class LabelStream : std::uint64_t { kPatterns = 1, kGateTt, kCon, kIn, kGed };

LabelSet generate_labels(const Aig& aig, const PartitionPlan& plan, const LabelConfig& config,
                         ResponseTable* responses_out = nullptr);

/// Normalized Hamming distance of two 64-bit tables.
double tt64_distance(std::uint64_t a, std::uint64_t b);

}  // namespace aigflow
