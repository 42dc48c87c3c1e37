#include "aigflow/serialize.hpp"

#include <cstdio>

#include <json.hpp>

namespace aigflow {

using nlohmann::json;

namespace {

std::string dump(const json& j, int indent) { return j.dump(indent); }

json opt(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::string hex64(std::uint64_t v) {
  char buf[19];
  std::snprintf(buf, sizeof buf, "0x%016llx", static_cast<unsigned long long>(v));
  return buf;
}

json losses(const EpochReport& r) {
  json j = json::object();
  for (Task t : kAllTasks) j[to_string(t)] = opt(r.loss[static_cast<std::size_t>(t)]);
  return j;
}

json report(const EpochReport& r) {
  return {{"loss", losses(r)},       {"L_func", r.l_func}, {"L_stru", r.l_stru},
          {"L_all", r.l_all},        {"P_tt", opt(r.p_tt)}, {"P_con", opt(r.p_con)},
          {"P_in", opt(r.p_in)},     {"peak_online_nodes", r.peak_online_nodes}};
}

}  // namespace

std::string stats_json(const AigStats& s, int indent) {
  return dump({{"nodes", s.nodes},
               {"edges", s.edges},
               {"pis", s.pis},
               {"pos", s.pos},
               {"max_level", s.max_level},
               {"types", {{"pi", s.pis + s.constants}, {"and", s.ands}, {"not", s.nots}}},
               {"constants", s.constants}},
              indent);
}

std::string plan_json(const PartitionPlan& plan, int indent) {
  json cones = json::array();
  for (std::size_t id = 0; id < plan.cones().size(); ++id) {
    const auto& c = plan.cone(id);
    cones.push_back({{"id", id},
                     {"output", c.output_id},
                     {"level", c.output_level},
                     {"members", c.members},
                     {"fallback", c.fallback}});
  }
  std::vector<int> levels(plan.sampled_levels().begin(), plan.sampled_levels().end());
  std::vector<NodeId> uncovered(plan.uncovered_before_fallback().begin(), plan.uncovered_before_fallback().end());
  return dump({{"k", plan.k()},
               {"delta", plan.delta()},
               {"levels", levels},
               {"cone_count", plan.cones().size()},
               {"fallback_count", plan.fallback_count()},
               {"uncovered_before_fallback", uncovered},
               {"cones", cones}},
              indent);
}

std::string coverage_json(const CoverageReport& r, int indent) {
  json intra = json::array();
  for (const auto& [size, pairs] : r.intra_overlap) intra.push_back({{"size", size}, {"pairs", pairs}});
  return dump({{"uncovered", r.uncovered},
               {"fallback_cones", r.fallback_cones},
               {"intra_overlap", intra},
               {"inter_overlap", r.inter_overlap},
               {"intra_overlap_nodes", r.intra_overlap_nodes},
               {"intra_fanin_closed", r.intra_fanin_closed}},
              indent);
}

std::string labels_json(const LabelSet& l, int indent) {
  json gate = json::array(), con = json::array(), cones = json::array(), ged = json::array(), in = json::array();
  for (const auto& p : l.gate_tt_pairs) gate.push_back({p.i, p.j, p.distance});
  for (const auto& p : l.con_pairs) con.push_back({p.i, p.j, p.label});
  for (const auto& c : l.cones) {
    json j = {{"id", c.id}, {"size", c.size}, {"depth", c.depth}};
    if (c.tt64) j["tt64"] = hex64(*c.tt64);
    cones.push_back(j);
  }
  for (const auto& p : l.ged_pairs) ged.push_back({p.s1, p.s2, p.distance});
  for (const auto& p : l.in_pairs) in.push_back({p.gate, p.cone, p.label});
  return dump({{"gate_prob", l.gate_prob},
               {"gate_tt_pairs", gate},
               {"con_pairs", con},
               {"cones", cones},
               {"ged_pairs", ged},
               {"in_pairs", in},
               {"seed", l.seed},
               {"sim_mode", l.sim_mode == PatternMode::kExhaustive ? "exhaustive" : "random"},
               {"num_patterns", l.num_patterns},
               {"tt_skipped", l.tt_skipped},
               {"ged_eligible", l.ged_eligible}},
              indent);
}

std::string schedule_json(const BatchPlan& batches, const ScheduleResult& result, int indent) {
  json trace = json::array();
  for (const auto& t : result.trace)
    trace.push_back({{"index", t.index},
                     {"level", t.level},
                     {"cones", t.cone_ids},
                     {"pulled", t.pulled},
                     {"fresh", t.fresh},
                     {"online_nodes", t.online_nodes}});
  std::size_t encoded = 0;
  for (NodeId v = 0; v < result.store.node_count(); ++v) encoded += result.store.update_count(v);
  return dump({{"batch_count", batches.batch_count()},
               {"meter",
                {{"peak_online_nodes", result.meter.peak_online_nodes},
                 {"peak_online_edges", result.meter.peak_online_edges},
                 {"peak_online_bytes", result.meter.peak_online_bytes},
                 {"offline_entries", result.meter.offline_entries}}},
               {"encoded_nodes", encoded},
               {"trace", trace}},
              indent);
}

std::string epoch_json(const EpochReport& r) {
  json j = report(r);
  j["epoch"] = r.epoch;
  j["steps"] = r.steps;
  return j.dump();
}

std::string eval_json(const EpochReport& r, int indent) { return dump(report(r), indent); }

std::string lec_json(const LecReport& r, int indent) {
  return dump({{"pairs", r.pairs.size()},
               {"positives", r.positives},
               {"prevalence", r.prevalence},
               {"AP", r.ap},
               {"PR_AUC", r.pr_auc},
               {"random_AP", r.random_ap}},
              indent);
}

std::string scaling_json(const ScalingTable& t, int indent) {
  json rows = json::array();
  for (const auto& r : t.rows)
    rows.push_back({{"copies", r.copies},
                    {"nodes", r.nodes},
                    {"cones", r.cones},
                    {"batches", r.batches},
                    {"peak_online_nodes", r.peak_online_nodes},
                    {"peak_online_bytes", r.peak_online_bytes},
                    {"wall_ms", r.wall_ms},
                    {"tokenizer_skips", r.tokenizer_skips},
                    {"transformer_skips", r.transformer_skips}});
  return dump({{"rows", rows}, {"peak_constant", t.peak_constant()}}, indent);
}

}  // namespace aigflow
