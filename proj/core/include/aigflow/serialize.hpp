#pragma once

#include <string>

#include "aigflow/aig.hpp"
#include "aigflow/bench.hpp"
#include "aigflow/labels.hpp"
#include "aigflow/partition.hpp"
#include "aigflow/scheduler.hpp"
#include "aigflow/trainer.hpp"

namespace aigflow {

// JSON documents emitted by the command-line tool. `indent` < 0 gives a
// single line. Output is a pure function of the input (no timestamps).

std::string stats_json(const AigStats& s, int indent = 2);
/// {k, delta, levels, cones:[{id, output, level, members, fallback}]}
std::string plan_json(const PartitionPlan& plan, int indent = 2);
std::string coverage_json(const CoverageReport& r, int indent = 2);
/// {gate_prob, gate_tt_pairs, con_pairs, cones:[{id, size, depth, tt64?}], ged_pairs, in_pairs, seed, sim_mode}
std::string labels_json(const LabelSet& labels, int indent = 2);
std::string schedule_json(const BatchPlan& batches, const ScheduleResult& result, int indent = 2);
/// One line per epoch; wall time excluded.
std::string epoch_json(const EpochReport& r);
std::string eval_json(const EpochReport& r, int indent = 2);
std::string lec_json(const LecReport& r, int indent = 2);
std::string scaling_json(const ScalingTable& t, int indent = 2);

}  // namespace aigflow
