#include "aigflow/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>

#include "aigflow/generate.hpp"
#include "aigflow/losses.hpp"
#include "aigflow/model.hpp"
#include "aigflow/random.hpp"
#include "aigflow/trainer.hpp"

namespace aigflow {

namespace {

using Inputs = std::vector<Tensor>;
using Fn = std::function<Tensor(const Inputs&)>;

class Suite {
 public:
  explicit Suite(std::uint64_t seed) : seed_(seed) {}

  /// Values bounded away from zero so relu-type kinks stay outside the stencil.
  Tensor param(std::size_t r, std::size_t c, double lo = -1.0, double hi = 1.0, double gap = 0.05) {
    Rng rng(derive_seed(seed_, {++tag_}));
    std::vector<double> v(r * c);
    for (auto& x : v) {
      do {
        x = rng.uniform(lo, hi);
      } while (std::abs(x) < gap);
    }
    return Tensor::parameter(r, c, std::move(v));
  }

  /// Fixed random projection to a scalar so every output element matters.
  Tensor reduce(const Tensor& y) {
    if (!weights_.count(y.rows() * 1000003 + y.cols())) {
      Rng rng(derive_seed(seed_, {0x5eed, y.rows(), y.cols()}));
      std::vector<double> w(y.numel());
      for (auto& x : w) x = rng.uniform(-1.0, 1.0);
      weights_[y.rows() * 1000003 + y.cols()] = Tensor::constant(y.rows(), y.cols(), std::move(w));
    }
    return ops::sum(ops::mul(y, weights_[y.rows() * 1000003 + y.cols()]));
  }

  void check(std::string name, const Fn& f, const Inputs& inputs) {
    std::size_t n = 0;
    for (const auto& t : inputs) n += t.numel();
    reset_kink_margin();
    f(inputs);
    const double margin = kink_margin();
    out_.push_back({std::move(name), grad_check(f, inputs), n, margin});
  }

  std::vector<GradCheckEntry> take() { return std::move(out_); }

 private:
  std::uint64_t seed_;
  std::uint64_t tag_ = 0;
  std::map<std::size_t, Tensor> weights_;
  std::vector<GradCheckEntry> out_;
};

void op_checks(Suite& s, std::uint64_t seed) {
  Rng rng(derive_seed(seed, {0x0b5}));
  const std::size_t r = 3 + rng.below(3), c = 2 + rng.below(3), k = 2 + rng.below(3);
  auto a = s.param(r, c), b = s.param(r, c), m = s.param(c, k), row = s.param(1, c);

  s.check("op.matmul", [&](const Inputs& x) { return s.reduce(ops::matmul(x[0], x[1])); }, {a, m});
  s.check("op.add", [&](const Inputs& x) { return s.reduce(ops::add(x[0], x[1])); }, {a, b});
  s.check("op.add_broadcast", [&](const Inputs& x) { return s.reduce(ops::add(x[0], x[1])); }, {a, row});
  s.check("op.sub", [&](const Inputs& x) { return s.reduce(ops::sub(x[0], x[1])); }, {a, b});
  s.check("op.mul", [&](const Inputs& x) { return s.reduce(ops::mul(x[0], x[1])); }, {a, b});
  s.check("op.scale", [&](const Inputs& x) { return s.reduce(ops::scale(x[0], -1.7)); }, {a});
  s.check("op.concat_cols", [&](const Inputs& x) { return s.reduce(ops::concat_cols(x)); }, {a, b});
  s.check("op.concat_rows", [&](const Inputs& x) { return s.reduce(ops::concat_rows(x)); }, {a, row});

  std::vector<std::uint32_t> idx;
  for (std::size_t i = 0; i < 2 * r; ++i) idx.push_back(static_cast<std::uint32_t>(rng.below(r)));
  s.check("op.gather_rows", [&](const Inputs& x) { return s.reduce(ops::gather_rows(x[0], idx)); }, {a});

  // rows of `e` grouped into 3 segments, one left empty
  auto e = s.param(7, c);
  const std::vector<std::uint32_t> seg = {0, 0, 2, 0, 2, 2, 0};
  s.check("op.segment_sum", [&](const Inputs& x) { return s.reduce(ops::segment_sum(x[0], seg, 3)); }, {e});
  s.check("op.segment_softmax", [&](const Inputs& x) { return s.reduce(ops::segment_softmax(x[0], seg, 3)); }, {e});

  s.check("op.relu", [&](const Inputs& x) { return s.reduce(ops::relu(x[0])); }, {a});
  s.check("op.leaky_relu", [&](const Inputs& x) { return s.reduce(ops::leaky_relu(x[0], 0.2)); }, {a});
  auto wide = s.param(r, c, -6.0, 6.0);
  s.check("op.sigmoid", [&](const Inputs& x) { return s.reduce(ops::sigmoid(x[0])); }, {wide});
  s.check("op.softplus", [&](const Inputs& x) { return s.reduce(ops::softplus(x[0])); }, {wide});
  s.check("op.layer_norm", [&](const Inputs& x) { return s.reduce(ops::layer_norm(x[0])); }, {a});
  s.check("op.sum", [&](const Inputs& x) { return ops::sum(x[0]); }, {a});
  s.check("op.mean", [&](const Inputs& x) { return ops::mean(x[0]); }, {a});

  // L1 at pred != target; the targets are shifted by at least the gap
  auto pred = s.param(r, 1);
  std::vector<double> tv;
  for (auto v : pred.values()) tv.push_back(v + (rng.coin() ? 0.3 : -0.3));
  const auto target = Tensor::constant(r, 1, tv);
  s.check("op.l1_loss", [&](const Inputs& x) { return ops::l1_loss(x[0], target); }, {pred});

  auto prob = s.param(r, 2, 0.05, 0.95);
  std::vector<double> lv;
  for (std::size_t i = 0; i < 2 * r; ++i) lv.push_back(static_cast<double>(rng.coin()));
  const auto labels = Tensor::constant(r, 2, lv);
  s.check("op.bce_loss", [&](const Inputs& x) { return ops::bce_loss(x[0], labels); }, {prob});

  auto q = s.param(r, 4), kk = s.param(r, 4), alpha = s.param(r, 2);
  s.check("op.head_dot", [&](const Inputs& x) { return s.reduce(ops::head_dot(x[0], x[1], 2)); }, {q, kk});
  s.check("op.head_scale", [&](const Inputs& x) { return s.reduce(ops::head_scale(x[0], x[1])); }, {alpha, q});
}

Inputs with_prefix(const Model& model, std::initializer_list<const char*> prefixes) {
  Inputs out;
  for (const auto& e : model.params().entries())
    for (const char* p : prefixes)
      if (e.name.rfind(p, 0) == 0) {
        out.push_back(e.tensor);
        break;
      }
  return out;
}

void model_checks(Suite& s, std::uint64_t seed) {
  ModelConfig mc;
  mc.d = 4;
  mc.heads = 2;
  mc.tx_depth = 2;
  mc.pool_depth = 1;
  mc.tokenizer_rounds = 2;
  mc.seed = derive_seed(seed, {0x30de1});
  Model model(mc);
  const std::vector<double> init = model.params().flat_values();

  RandomAigConfig rc;
  rc.pis = 4;
  rc.gates = 22;
  rc.window = 8;
  rc.seed = derive_seed(seed, {0xa16});
  LabelConfig lc;
  lc.gate_tt_pairs = lc.con_pairs = lc.in_pairs = 20;
  lc.ged_pairs = 5;
  lc.seed = seed;
  const CircuitData circuit = prepare_circuit("gradcheck", random_aig(rc), 3, 2, lc);

  // Capture one working batch without and, if the schedule has one, one with
  // frozen nodes; states come from the model so pulled rows are realistic.
  // Single-node batches are skipped: their zero state is a layer-norm saddle.
  std::vector<WorkingBatch> batches;
  const auto plan = build_batches(circuit.plan, 4, 0, BatchMode::kEval);
  run_schedule(circuit.aig, circuit.plan, plan, [&](const WorkingBatch& wb) {
    batches.push_back(wb);
    return node_states(model.forward(circuit.aig, wb));
  });
  std::vector<const WorkingBatch*> picks;
  for (const auto& wb : batches)
    if (wb.frozen_count() == 0 && wb.augmented.size() >= 4) {
      picks.push_back(&wb);
      break;
    }
  for (const auto& wb : batches)
    if (wb.frozen_count() > 0 && wb.frozen_count() < wb.size()) {
      picks.push_back(&wb);
      break;
    }

  std::vector<BatchSamples> samples;
  for (std::size_t p = 0; p < picks.size(); ++p) {
    GedCache cache;
    samples.push_back(sample_batch(circuit, *picks[p], 6, 10, derive_seed(seed, {0x5a, p}), cache));
  }

  // Zero-initialized biases put relu inputs exactly on the kink, and a random
  // point can land within a step of one; re-draw until every kink is clear.
  constexpr double kMinMargin = 1e-4;
  for (std::uint64_t attempt = 0;; ++attempt) {
    Rng jitter(derive_seed(seed, {0x717, attempt}));
    std::size_t offset = 0;
    for (const auto& e : model.params().entries()) {
      Tensor t = e.tensor;
      for (auto& v : t.mutable_values()) v = init[offset++] + (jitter.coin() ? 1.0 : -1.0) * jitter.uniform(0.05, 0.3);
    }
    reset_kink_margin();
    for (std::size_t p = 0; p < picks.size(); ++p)
      for (auto mode : {AttentionMode::kGeneral, AttentionMode::kFastDegree1})
        total_loss(compute_losses(predict(model, model.forward(circuit.aig, *picks[p], mode), samples[p])));
    if (kink_margin() >= kMinMargin || attempt == 63) break;
  }

  for (std::size_t p = 0; p < picks.size(); ++p) {
    const WorkingBatch& wb = *picks[p];
    const std::string tag = p == 0 ? "" : ".frozen";
    s.check("block.structural_encoding" + tag,
            [&](const Inputs&) { return s.reduce(model.structural_encoding(circuit.aig, wb.nodes)); },
            with_prefix(model, {"se."}));
    for (auto mode : {AttentionMode::kGeneral, AttentionMode::kFastDegree1}) {
      const std::string m = mode == AttentionMode::kGeneral ? ".general" : ".fast";
      s.check("block.tokenizer" + m + tag,
              [&](const Inputs&) {
                auto [hf, hs] = model.tokenize(circuit.aig, wb, mode);
                return ops::add(s.reduce(hf.t), s.reduce(hs.t));
              },
              with_prefix(model, {"se.", "tok."}));
      s.check("block.transformer" + m + tag,
              [&](const Inputs&) {
                auto [hf0, hs0] = model.tokenize(circuit.aig, wb, mode);
                auto [hf, hs] = model.transform(wb, Hf{hf0.t.detach()}, Hs{hs0.t.detach()}, mode);
                return ops::add(s.reduce(hf.t), s.reduce(hs.t));
              },
              with_prefix(model, {"tx."}));
    }
    s.check("block.pooling" + tag,
            [&](const Inputs&) {
              const auto out = model.forward(circuit.aig, wb);
              auto [cf, cs] = model.pool(wb, Hf{out.hf.detach()}, Hs{out.hs.detach()});
              return ops::add(s.reduce(cf.t), s.reduce(cs.t));
            },
            with_prefix(model, {"pool."}));

    s.check("block.heads" + tag,
            [&](const Inputs&) {
              const auto out = model.forward(circuit.aig, wb);
              BatchOutput fixed{out.hf.detach(), out.hs.detach(), out.cone_hf.detach(), out.cone_hs.detach(), {}};
              return total_loss(compute_losses(predict(model, fixed, samples[p])));
            },
            with_prefix(model, {"head."}));
    s.check("block.end_to_end" + tag,
            [&](const Inputs&) {
              return total_loss(compute_losses(predict(model, model.forward(circuit.aig, wb), samples[p])));
            },
            with_prefix(model, {""}));
  }
}

}  // namespace

std::vector<GradCheckEntry> gradcheck_suite(std::uint64_t seed) {
  Suite s(seed);
  op_checks(s, seed);
  model_checks(s, seed);
  return s.take();
}

}  // namespace aigflow
