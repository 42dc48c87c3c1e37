#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "aigflow/aig.hpp"
#include "aigflow/balancer.hpp"
#include "aigflow/labels.hpp"
#include "aigflow/losses.hpp"
#include "aigflow/model.hpp"
#include "aigflow/params.hpp"
#include "aigflow/partition.hpp"
#include "aigflow/scheduler.hpp"
#include "aigflow/simulate.hpp"

namespace aigflow {

/// One circuit with everything the training loop reads.
struct CircuitData {
  std::string name;
  Aig aig;
  PartitionPlan plan;
  LabelSet labels;
  ResponseTable responses;
  Reachability reach;
};

CircuitData prepare_circuit(std::string name, Aig aig, int k, int delta, const LabelConfig& label_config);

struct TrainConfig {
  std::size_t batch = 128;
  double lr = 1e-4;
  std::uint64_t seed = 0;
  bool balance = true;
  BalancerConfig balancer;
  std::size_t pairs_per_batch = 32;
  std::size_t ged_node_limit = 10;
  AttentionMode mode = AttentionMode::kFastDegree1;
};

/// Index lists and targets for one mini-batch. Node indices are local to the
/// working batch; cone indices are positions in its cone list.
struct BatchSamples {
  std::vector<std::uint32_t> prob_nodes;
  std::vector<double> prob_target;
  std::vector<std::uint32_t> gate_i, gate_j;
  std::vector<double> gate_target;
  std::vector<std::uint32_t> con_i, con_j;
  std::vector<int> con_label;
  std::vector<std::uint32_t> tt_cones;
  std::vector<std::uint64_t> tt_truth;
  std::vector<std::uint32_t> gpair_a, gpair_b;
  std::vector<double> gpair_target;
  std::vector<std::uint32_t> ged_a, ged_b;
  std::vector<double> ged_target;
  std::vector<double> size_target, depth_target;  // one per cone
  std::vector<std::uint32_t> in_node, in_cone;
  std::vector<int> in_label;
};

using GedCache = std::map<std::pair<std::size_t, std::size_t>, std::optional<std::size_t>>;

/// Seeded in-batch sampling of every supervision task from the oracles.
BatchSamples sample_batch(const CircuitData& circuit, const WorkingBatch& batch, std::size_t pairs,
                          std::size_t ged_node_limit, std::uint64_t seed, GedCache& ged_cache);

TaskTensors predict(const Model& model, const BatchOutput& out, const BatchSamples& samples);

std::vector<NodeState> node_states(const BatchOutput& out);

/// Sums behind the reported metrics; merged in circuit order.
struct MetricTally {
  std::array<double, kTaskCount> loss_sum{};
  std::array<std::size_t, kTaskCount> loss_batches{};
  double tt_dist_sum = 0.0;
  std::size_t tt_count = 0;
  std::size_t con_hits = 0, con_count = 0;
  std::size_t in_hits = 0, in_count = 0;

  void add_losses(const LossReport& r);
  void add_predictions(const TaskTensors& t);
  void merge(const MetricTally& other);
};

struct EpochReport {
  std::size_t epoch = 0;
  std::array<std::optional<double>, kTaskCount> loss;  // mean raw loss per task
  double l_func = 0.0;
  double l_stru = 0.0;
  double l_all = 0.0;
  std::optional<double> p_tt, p_con, p_in;
  std::size_t peak_online_nodes = 0;
  std::size_t steps = 0;
  double wall_ms = 0.0;  // not part of the deterministic payload
};

EpochReport make_report(const MetricTally& tally);

class Trainer {
 public:
  Trainer(Model& model, TrainConfig config);

  EpochReport train_epoch(const std::vector<CircuitData>& corpus, std::size_t epoch);

  const std::vector<BalanceStep>& balance_log() const noexcept { return balance_log_; }
  const Adam& optimizer() const noexcept { return adam_; }
  const TrainConfig& config() const noexcept { return config_; }

 private:
  Model* model_;
  TrainConfig config_;
  Adam adam_;
  LossBalancer balancer_;
  std::vector<BalanceStep> balance_log_;
  std::vector<GedCache> ged_cache_;
};

/// Eval-mode schedule over every circuit without parameter updates.
EpochReport evaluate(const Model& model, const std::vector<CircuitData>& corpus, const TrainConfig& config,
                     std::size_t workers = 1);

/// Pooled functional cone states of every cone, indexed by cone id.
std::vector<std::vector<double>> cone_embeddings(const Model& model, const CircuitData& circuit,
                                                 std::size_t batch_size);

struct LecConfig {
  double positive_rate = 0.03;
  std::size_t max_pis = 12;
  std::size_t batch = 128;
  std::uint64_t seed = 0;
};

struct LecPair {
  std::size_t circuit = 0;
  std::size_t a = 0;  // cone ids
  std::size_t b = 0;
  int label = 0;
  double score = 0.0;
};

struct LecReport {
  std::vector<LecPair> pairs;
  std::size_t positives = 0;
  double prevalence = 0.0;
  double ap = 0.0;
  double pr_auc = 0.0;
  double random_ap = 0.0;  // seeded uniform scores on the same pairs
};

/// Cone pairs labelled equivalent iff the outputs' exhaustive responses are
/// equal; negatives are subsampled toward `positive_rate`. Score is
/// 1 - predicted truth-table distance.
LecReport lec_eval(const Model& model, const std::vector<CircuitData>& corpus, const LecConfig& config);

}  // namespace aigflow
