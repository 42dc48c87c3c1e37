#include "aigflow/bench.hpp"

#include <chrono>

#include "aigflow/partition.hpp"
#include "aigflow/scheduler.hpp"
#include "aigflow/trainer.hpp"

namespace aigflow {

bool ScalingTable::peak_constant() const {
  for (const auto& r : rows)
    if (r.peak_online_nodes != rows.front().peak_online_nodes) return false;
  return true;
}

ScalingTable bench_mem_runtime(const Aig& aig, const Model& model, int k, int delta, std::size_t batch,
                               const std::vector<std::size_t>& copies, AttentionMode mode) {
  ScalingTable table;
  for (std::size_t c : copies) {
    const Aig g = c == 1 ? aig : duplicate(aig, c);
    const auto plan = partition(g, k, delta);
    const auto batches = build_batches(plan, batch, 0, BatchMode::kEval);
    ScalingRow row;
    row.copies = c;
    row.nodes = g.size();
    row.cones = plan.cones().size();
    row.batches = batches.batch_count();
    auto encode = [&](const WorkingBatch& wb) {
      const BatchOutput out = model.forward(g, wb, mode);
      row.tokenizer_skips += out.stats.tokenizer_skips;
      row.transformer_skips += out.stats.transformer_skips;
      return node_states(out);
    };
    const auto start = std::chrono::steady_clock::now();
    const auto result = run_schedule(g, plan, batches, encode);
    row.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    row.peak_online_nodes = result.meter.peak_online_nodes;
    row.peak_online_bytes = result.meter.peak_online_bytes;
    table.rows.push_back(row);
  }
  return table;
}

}  // namespace aigflow
