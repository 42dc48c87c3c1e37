#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "aigflow/aig.hpp"
#include "aigflow/partition.hpp"

namespace aigflow {

/// Fixed-length bit vector packed into 64-bit words; bits past size() are 0.
class BitVector {
 public:
  BitVector() = default;
  explicit BitVector(std::size_t bits) : words_((bits + 63) / 64, 0), size_(bits) {}

  std::size_t size() const noexcept { return size_; }
  bool get(std::size_t i) const { return (words_[i / 64] >> (i % 64)) & 1U; }
  void set(std::size_t i, bool value) {
    const auto mask = std::uint64_t{1} << (i % 64);
    words_[i / 64] = value ? (words_[i / 64] | mask) : (words_[i / 64] & ~mask);
  }
  std::span<const std::uint64_t> words() const noexcept { return words_; }
  std::span<std::uint64_t> words() noexcept { return words_; }
  std::size_t popcount() const;
  /// Clears bits at positions >= size().
  void mask_tail();
  std::string to_string() const;  // bit 0 first

  friend bool operator==(const BitVector&, const BitVector&) = default;

 private:
  std::vector<std::uint64_t> words_;
  std::size_t size_ = 0;
};

enum class PatternMode { kExhaustive, kRandom };

/// Input stimuli, stored per PI (column-major) for bit-parallel simulation.
/// In exhaustive mode row r assigns PI j the value (r >> j) & 1.
struct PatternSet {
  std::vector<NodeId> pi_ids;
  std::vector<BitVector> columns;  // one per PI
  std::size_t num_patterns = 0;
  PatternMode mode = PatternMode::kExhaustive;
  std::uint64_t seed = 0;

  static PatternSet exhaustive(std::vector<NodeId> pi_ids);
  static PatternSet random(std::vector<NodeId> pi_ids, std::size_t count, std::uint64_t seed);
  bool value(std::size_t row, std::size_t pi) const { return columns[pi].get(row); }
};

struct SimulationBudget {
  std::size_t exhaustive_max_pis = 12;
  std::size_t random_patterns = 4096;
};

/// Exhaustive when the graph has at most `exhaustive_max_pis` inputs, else random.
PatternSet default_patterns(const Aig& aig, std::uint64_t seed, const SimulationBudget& budget = {});

/// Per-node response bit-vectors; constant nodes evaluate to 0.
struct ResponseTable {
  std::vector<BitVector> rows;
  std::size_t num_patterns = 0;
  const BitVector& operator[](NodeId v) const { return rows.at(v); }
};

ResponseTable simulate(const Aig& aig, const PatternSet& patterns);

/// Fraction of 1-bits per node.
std::vector<double> gate_prob(const ResponseTable& responses);

/// Normalized Hamming distance; lengths must match and be non-zero.
double tt_pair_distance(const BitVector& a, const BitVector& b);

struct GatePair {
  NodeId i = 0;
  NodeId j = 0;
  double distance = 0.0;
};

std::vector<GatePair> sample_gate_tt_pairs(const ResponseTable& responses, std::size_t count, std::uint64_t seed);

/// Transitive closure as one ancestor bitset per node.
class Reachability {
 public:
  explicit Reachability(const Aig& aig);
  /// Path from u to v (u != v).
  bool reaches(NodeId u, NodeId v) const { return ancestors_[v].get(u); }
  bool connected(NodeId u, NodeId v) const { return u != v && (reaches(u, v) || reaches(v, u)); }
  const BitVector& ancestors(NodeId v) const { return ancestors_[v]; }
  std::size_t size() const noexcept { return ancestors_.size(); }

 private:
  std::vector<BitVector> ancestors_;
};

struct ConPair {
  NodeId i = 0;
  NodeId j = 0;
  int label = 0;
};

/// Roughly half positive where feasible; label 1 iff connected by a path either way.
std::vector<ConPair> sample_con_pairs(const Aig& aig, const Reachability& reach, std::size_t count, std::uint64_t seed);
std::vector<ConPair> sample_con_pairs(const Aig& aig, std::size_t count, std::uint64_t seed);

/// Members that are PIs (non-constant) or have a fanin outside the cone.
std::vector<NodeId> cone_support(const Aig& aig, const Cone& cone);

/// 64-row table of the cone output over a 6-node support (support j = bit j of
/// the row index, support sorted by id). nullopt for any other support size.
std::optional<std::uint64_t> cone_truth_table(const Aig& aig, const Cone& cone);

struct SizeDepth {
  std::size_t size = 0;
  std::size_t depth = 0;
};

/// depth = longest path inside the cone ending at the output.
SizeDepth cone_size_depth(const Cone& cone);

struct InPair {
  NodeId gate = 0;
  std::size_t cone = 0;
  int label = 0;
};

std::vector<InPair> sample_in_pairs(const PartitionPlan& plan, std::size_t node_count, std::size_t count,
                                    std::uint64_t seed);

}  // namespace aigflow
