#include "aigflow/trainer.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <thread>

#include "aigflow/error.hpp"
#include "aigflow/ged.hpp"
#include "aigflow/metrics.hpp"
#include "aigflow/random.hpp"

namespace aigflow {

using Index = std::vector<std::uint32_t>;

CircuitData prepare_circuit(std::string name, Aig aig, int k, int delta, const LabelConfig& label_config) {
  PartitionPlan plan = partition(aig, k, delta);
  ResponseTable responses;
  LabelSet labels = generate_labels(aig, plan, label_config, &responses);
  Reachability reach(aig);
  return CircuitData{std::move(name), std::move(aig), std::move(plan), std::move(labels), std::move(responses),
                     std::move(reach)};
}

BatchSamples sample_batch(const CircuitData& circuit, const WorkingBatch& batch, std::size_t pairs,
                          std::size_t ged_node_limit, std::uint64_t seed, GedCache& ged_cache) {
  BatchSamples s;
  Rng rng(seed);
  const auto n = static_cast<std::uint32_t>(batch.size());
  const auto& resp = circuit.responses;
  auto glob = [&](std::uint32_t v) { return batch.nodes[v]; };

  Index fresh;
  for (std::uint32_t v = 0; v < n; ++v)
    if (!batch.frozen[v]) fresh.push_back(v);

  for (auto v : fresh) {
    s.prob_nodes.push_back(v);
    s.prob_target.push_back(circuit.labels.gate_prob.at(glob(v)));
  }

  if (!fresh.empty() && n >= 2) {
    for (std::size_t p = 0; p < pairs; ++p) {
      const auto i = fresh[rng.below(fresh.size())];
      auto j = static_cast<std::uint32_t>(rng.below(n - 1));
      if (j >= i) ++j;
      s.gate_i.push_back(i);
      s.gate_j.push_back(j);
      s.gate_target.push_back(tt_pair_distance(resp[glob(i)], resp[glob(j)]));
    }
    Index candidates;
    for (std::size_t p = 0; p < pairs; ++p) {
      const bool want = p % 2 == 0;
      const auto i = fresh[rng.below(fresh.size())];
      candidates.clear();
      for (std::uint32_t j = 0; j < n; ++j)
        if (j != i && circuit.reach.connected(glob(i), glob(j)) == want) candidates.push_back(j);
      if (candidates.empty()) continue;
      s.con_i.push_back(i);
      s.con_j.push_back(candidates[rng.below(candidates.size())]);
      s.con_label.push_back(want ? 1 : 0);
    }
  }

  const auto cones = static_cast<std::uint32_t>(batch.cone_ids.size());
  Index small;
  for (std::uint32_t c = 0; c < cones; ++c) {
    const auto id = batch.cone_ids[c];
    const auto& label = circuit.labels.cones.at(id);
    if (label.tt64) {
      s.tt_cones.push_back(c);
      s.tt_truth.push_back(*label.tt64);
    }
    s.size_target.push_back(static_cast<double>(label.size));
    s.depth_target.push_back(static_cast<double>(label.depth));
    if (circuit.plan.cone(id).members.size() <= ged_node_limit) small.push_back(c);
  }
  if (cones >= 2) {
    for (std::size_t p = 0; p < pairs; ++p) {
      const auto a = static_cast<std::uint32_t>(rng.below(cones));
      auto b = static_cast<std::uint32_t>(rng.below(cones - 1));
      if (b >= a) ++b;
      const auto oa = circuit.plan.cone(batch.cone_ids[a]).output_id;
      const auto ob = circuit.plan.cone(batch.cone_ids[b]).output_id;
      s.gpair_a.push_back(a);
      s.gpair_b.push_back(b);
      s.gpair_target.push_back(tt_pair_distance(resp[oa], resp[ob]));
    }
  }
  if (small.size() >= 2) {
    for (std::size_t p = 0; p < pairs; ++p) {
      const auto x = rng.below(small.size());
      auto y = rng.below(small.size() - 1);
      if (y >= x) ++y;
      const auto a = small[x], b = small[y];
      const auto ia = batch.cone_ids[a], ib = batch.cone_ids[b];
      const auto key = std::minmax(ia, ib);
      auto it = ged_cache.find(key);
      if (it == ged_cache.end()) {
        const auto& aig = circuit.aig;
        it = ged_cache
                 .emplace(key, ged(cone_graph(aig, circuit.plan.cone(key.first)),
                                   cone_graph(aig, circuit.plan.cone(key.second)), ged_node_limit))
                 .first;
      }
      if (!it->second) continue;
      s.ged_a.push_back(a);
      s.ged_b.push_back(b);
      s.ged_target.push_back(static_cast<double>(*it->second));
    }
  }
  if (cones >= 1) {
    std::vector<bool> in_cone(n);
    Index outside;
    for (std::size_t p = 0; p < pairs; ++p) {
      const bool want = p % 2 == 0;
      const auto c = static_cast<std::uint32_t>(rng.below(cones));
      const auto& members = batch.cone_members[c];
      std::uint32_t v;
      if (want) {
        v = members[rng.below(members.size())];
      } else {
        std::fill(in_cone.begin(), in_cone.end(), false);
        for (auto m : members) in_cone[m] = true;
        outside.clear();
        for (std::uint32_t u = 0; u < n; ++u)
          if (!in_cone[u]) outside.push_back(u);
        if (outside.empty()) continue;
        v = outside[rng.below(outside.size())];
      }
      s.in_node.push_back(v);
      s.in_cone.push_back(c);
      s.in_label.push_back(want ? 1 : 0);
    }
  }
  return s;
}

namespace {

Tensor column(const std::vector<double>& v) { return Tensor::constant(v.size(), 1, v); }

Tensor column(const std::vector<int>& v) {
  return Tensor::constant(v.size(), 1, std::vector<double>(v.begin(), v.end()));
}

void set(TaskTensors& t, Task task, Tensor pred, Tensor target) {
  t.pred[static_cast<std::size_t>(task)] = std::move(pred);
  t.target[static_cast<std::size_t>(task)] = std::move(target);
}

}  // namespace

TaskTensors predict(const Model& model, const BatchOutput& out, const BatchSamples& s) {
  TaskTensors t;
  auto rows = [](const Tensor& x, const Index& idx) { return ops::gather_rows(x, idx); };
  if (!s.prob_nodes.empty())
    set(t, Task::kProb, model.prob(Hf{rows(out.hf, s.prob_nodes)}), column(s.prob_target));
  if (!s.gate_i.empty())
    set(t, Task::kGateTt, model.gate_tt(Hf{rows(out.hf, s.gate_i)}, Hf{rows(out.hf, s.gate_j)}),
        column(s.gate_target));
  if (!s.con_i.empty())
    set(t, Task::kCon, model.con(Hs{rows(out.hs, s.con_i)}, Hs{rows(out.hs, s.con_j)}), column(s.con_label));
  if (!s.tt_cones.empty()) {
    std::vector<double> bits;
    for (auto tt : s.tt_truth)
      for (int b = 0; b < 64; ++b) bits.push_back(static_cast<double>((tt >> b) & 1U));
    set(t, Task::kGraphTt, model.graph_tt(Hf{rows(out.cone_hf, s.tt_cones)}),
        Tensor::constant(s.tt_cones.size(), 64, std::move(bits)));
  }
  if (!s.gpair_a.empty())
    set(t, Task::kGraphTtPair,
        model.graph_tt_pair(Hf{rows(out.cone_hf, s.gpair_a)}, Hf{rows(out.cone_hf, s.gpair_b)}),
        column(s.gpair_target));
  if (!s.ged_a.empty())
    set(t, Task::kGed, model.ged(Hs{rows(out.cone_hs, s.ged_a)}, Hs{rows(out.cone_hs, s.ged_b)}),
        column(s.ged_target));
  if (!s.size_target.empty()) {
    set(t, Task::kSize, model.size(Hs{out.cone_hs}), column(s.size_target));
    set(t, Task::kDepth, model.depth(Hs{out.cone_hs}), column(s.depth_target));
  }
  if (!s.in_node.empty())
    set(t, Task::kIn, model.in(Hs{rows(out.hs, s.in_node)}, Hs{rows(out.cone_hs, s.in_cone)}), column(s.in_label));
  return t;
}

std::vector<NodeState> node_states(const BatchOutput& out) {
  const std::size_t n = out.hf.rows(), d = out.hf.cols();
  const auto f = out.hf.values();
  const auto s = out.hs.values();
  std::vector<NodeState> states(n);
  for (std::size_t v = 0; v < n; ++v) {
    states[v].hf.assign(f.begin() + v * d, f.begin() + (v + 1) * d);
    states[v].hs.assign(s.begin() + v * d, s.begin() + (v + 1) * d);
  }
  return states;
}

void MetricTally::add_losses(const LossReport& r) {
  for (std::size_t i = 0; i < kTaskCount; ++i) {
    if (!r.present[i]) continue;
    loss_sum[i] += r.raw[i];
    ++loss_batches[i];
  }
}

void MetricTally::add_predictions(const TaskTensors& t) {
  auto binary = [](const TaskTensors& t, Task task, std::size_t& hits, std::size_t& count) {
    const auto i = static_cast<std::size_t>(task);
    if (!t.pred[i].defined()) return;
    const auto p = t.pred[i].values();
    const auto y = t.target[i].values();
    for (std::size_t k = 0; k < p.size(); ++k) hits += (p[k] >= 0.5) == (y[k] >= 0.5);
    count += p.size();
  };
  binary(t, Task::kCon, con_hits, con_count);
  binary(t, Task::kIn, in_hits, in_count);
  const auto i = static_cast<std::size_t>(Task::kGraphTt);
  if (t.pred[i].defined()) {
    const auto p = t.pred[i].values();
    const auto y = t.target[i].values();
    for (std::size_t r = 0; r < t.pred[i].rows(); ++r) {
      std::uint64_t truth = 0;
      for (std::size_t b = 0; b < 64; ++b)
        if (y[r * 64 + b] >= 0.5) truth |= std::uint64_t{1} << b;
      tt_dist_sum += tt_prediction_distance(p.subspan(r * 64, 64), truth);
      ++tt_count;
    }
  }
}

void MetricTally::merge(const MetricTally& o) {
  for (std::size_t i = 0; i < kTaskCount; ++i) {
    loss_sum[i] += o.loss_sum[i];
    loss_batches[i] += o.loss_batches[i];
  }
  tt_dist_sum += o.tt_dist_sum;
  tt_count += o.tt_count;
  con_hits += o.con_hits;
  con_count += o.con_count;
  in_hits += o.in_hits;
  in_count += o.in_count;
}

EpochReport make_report(const MetricTally& tally) {
  EpochReport r;
  for (Task t : kAllTasks) {
    const auto i = static_cast<std::size_t>(t);
    if (tally.loss_batches[i] == 0) continue;
    const double mean = tally.loss_sum[i] / static_cast<double>(tally.loss_batches[i]);
    r.loss[i] = mean;
    (task_stream(t) == Stream::kFunctional ? r.l_func : r.l_stru) += mean;
  }
  r.l_all = r.l_func + r.l_stru;
  if (tally.tt_count) r.p_tt = tally.tt_dist_sum / static_cast<double>(tally.tt_count);
  if (tally.con_count) r.p_con = static_cast<double>(tally.con_hits) / static_cast<double>(tally.con_count);
  if (tally.in_count) r.p_in = static_cast<double>(tally.in_hits) / static_cast<double>(tally.in_count);
  return r;
}

Trainer::Trainer(Model& model, TrainConfig config)
    : model_(&model),
      config_(config),
      adam_(model.params(), AdamConfig{config.lr}),
      balancer_(model.balancer_tap(), config.balancer) {
  if (config_.batch == 0) throw Error(ErrorCode::kInvalidArgument, "train: batch size must be >= 1");
}

EpochReport Trainer::train_epoch(const std::vector<CircuitData>& corpus, std::size_t epoch) {
  if (corpus.empty()) throw Error(ErrorCode::kInvalidArgument, "train: empty corpus");
  const auto start = std::chrono::steady_clock::now();
  ged_cache_.resize(corpus.size());
  MetricTally tally;
  std::size_t peak = 0, steps = 0;
  for (std::size_t ci = 0; ci < corpus.size(); ++ci) {
    const auto& circuit = corpus[ci];
    if (circuit.labels.gate_prob.size() != circuit.aig.size())
      throw Error(ErrorCode::kShapeMismatch, "train: labels of '" + circuit.name + "' do not match its graph");
    const auto batches = build_batches(circuit.plan, config_.batch, derive_seed(config_.seed, {epoch, ci}),
                                       BatchMode::kTrain);
    auto encode = [&](const WorkingBatch& wb) {
      const BatchOutput out = model_->forward(circuit.aig, wb, config_.mode);
      const auto samples = sample_batch(circuit, wb, config_.pairs_per_batch, config_.ged_node_limit,
                                        derive_seed(config_.seed, {epoch, ci, wb.index, 0x5a}), ged_cache_[ci]);
      const TaskTensors tensors = predict(*model_, out, samples);
      const TaskLosses losses = compute_losses(tensors);
      LossReport report = summarize(losses);
      Tensor objective;
      if (config_.balance) {
        BalanceStep step;
        objective = balancer_.balance(losses, &step);
        balance_log_.push_back(step);
      } else {
        objective = total_loss(losses);
      }
      model_->params().zero_grad();
      backward(objective);
      adam_.step();
      ++steps;
      tally.add_losses(report);
      tally.add_predictions(tensors);
      return node_states(out);
    };
    const auto result = run_schedule(circuit.aig, circuit.plan, batches, encode);
    peak = std::max(peak, result.meter.peak_online_nodes);
  }
  EpochReport r = make_report(tally);
  r.epoch = epoch;
  r.peak_online_nodes = peak;
  r.steps = steps;
  r.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  return r;
}

namespace {

template <class Fn>
void parallel_for(std::size_t count, std::size_t workers, Fn&& fn) {
  workers = std::max<std::size_t>(1, std::min(workers, count));
  if (workers == 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(count);
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) {
        try {
          fn(i);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    });
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace

EpochReport evaluate(const Model& model, const std::vector<CircuitData>& corpus, const TrainConfig& config,
                     std::size_t workers) {
  if (corpus.empty()) throw Error(ErrorCode::kInvalidArgument, "evaluate: empty eval set");
  std::vector<MetricTally> tallies(corpus.size());
  std::vector<std::size_t> peaks(corpus.size());
  parallel_for(corpus.size(), workers, [&](std::size_t ci) {
    const auto& circuit = corpus[ci];
    GedCache cache;
    const auto batches = build_batches(circuit.plan, config.batch, config.seed, BatchMode::kEval);
    auto encode = [&](const WorkingBatch& wb) {
      const BatchOutput out = model.forward(circuit.aig, wb, config.mode);
      const auto samples = sample_batch(circuit, wb, config.pairs_per_batch, config.ged_node_limit,
                                        derive_seed(config.seed, {0xe7a1, ci, wb.index}), cache);
      const TaskTensors tensors = predict(model, out, samples);
      tallies[ci].add_losses(summarize(compute_losses(tensors)));
      tallies[ci].add_predictions(tensors);
      return node_states(out);
    };
    peaks[ci] = run_schedule(circuit.aig, circuit.plan, batches, encode).meter.peak_online_nodes;
  });
  MetricTally total;
  for (const auto& t : tallies) total.merge(t);
  EpochReport r = make_report(total);
  r.peak_online_nodes = *std::max_element(peaks.begin(), peaks.end());
  return r;
}

std::vector<std::vector<double>> cone_embeddings(const Model& model, const CircuitData& circuit,
                                                 std::size_t batch_size) {
  std::vector<std::vector<double>> out(circuit.plan.cones().size());
  const auto batches = build_batches(circuit.plan, batch_size, 0, BatchMode::kEval);
  const std::size_t d = model.config().d;
  auto encode = [&](const WorkingBatch& wb) {
    const BatchOutput o = model.forward(circuit.aig, wb);
    const auto v = o.cone_hf.values();
    for (std::size_t c = 0; c < wb.cone_ids.size(); ++c) out[wb.cone_ids[c]].assign(v.begin() + c * d, v.begin() + (c + 1) * d);
    return node_states(o);
  };
  run_schedule(circuit.aig, circuit.plan, batches, encode);
  return out;
}

LecReport lec_eval(const Model& model, const std::vector<CircuitData>& corpus, const LecConfig& config) {
  LecReport rep;
  std::vector<LecPair> positives, negatives;
  std::vector<std::vector<std::vector<double>>> emb(corpus.size());
  for (std::size_t ci = 0; ci < corpus.size(); ++ci) {
    const auto& c = corpus[ci];
    if (c.aig.inputs().size() > config.max_pis || c.labels.sim_mode != PatternMode::kExhaustive) continue;
    emb[ci] = cone_embeddings(model, c, config.batch);
    const auto cones = c.plan.cones();
    for (std::size_t a = 0; a < cones.size(); ++a)
      for (std::size_t b = a + 1; b < cones.size(); ++b) {
        const bool eq = c.responses[cones[a].output_id] == c.responses[cones[b].output_id];
        (eq ? positives : negatives).push_back({ci, a, b, eq ? 1 : 0, 0.0});
      }
  }
  if (positives.empty()) throw Error(ErrorCode::kInvalidArgument, "lec: no equivalent pairs in the corpus");
  Rng rng(derive_seed(config.seed, {0x1ec}));
  rng.shuffle(negatives);
  const double r = std::clamp(config.positive_rate, 1e-6, 1.0);
  const auto want = static_cast<std::size_t>(std::ceil(positives.size() * (1.0 - r) / r));
  negatives.resize(std::min(negatives.size(), want));
  rep.pairs = positives;
  rep.pairs.insert(rep.pairs.end(), negatives.begin(), negatives.end());
  std::sort(rep.pairs.begin(), rep.pairs.end(),
            [](const LecPair& x, const LecPair& y) { return std::tie(x.circuit, x.a, x.b) < std::tie(y.circuit, y.a, y.b); });

  const std::size_t d = model.config().d;
  std::vector<double> fa, fb;
  for (const auto& p : rep.pairs) {
    fa.insert(fa.end(), emb[p.circuit][p.a].begin(), emb[p.circuit][p.a].end());
    fb.insert(fb.end(), emb[p.circuit][p.b].begin(), emb[p.circuit][p.b].end());
  }
  const std::size_t n = rep.pairs.size();
  const Tensor dist = model.graph_tt_pair(Hf{Tensor::constant(n, d, std::move(fa))}, Hf{Tensor::constant(n, d, std::move(fb))});
  std::vector<double> scores, random_scores;
  std::vector<int> labels;
  for (std::size_t i = 0; i < n; ++i) {
    rep.pairs[i].score = 1.0 - dist.values()[i];
    scores.push_back(rep.pairs[i].score);
    labels.push_back(rep.pairs[i].label);
    random_scores.push_back(rng.uniform());
  }
  rep.positives = positives.size();
  rep.prevalence = static_cast<double>(positives.size()) / static_cast<double>(n);
  rep.ap = average_precision(scores, labels);
  rep.pr_auc = pr_auc(scores, labels);
  rep.random_ap = average_precision(random_scores, labels);
  return rep;
}

}  // namespace aigflow
