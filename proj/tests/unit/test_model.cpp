#include <doctest.h>

#include <cmath>
#include <map>

#include "aigflow/error.hpp"
#include "aigflow/generate.hpp"
#include "aigflow/model.hpp"
#include "aigflow/random.hpp"
#include "aigflow/scheduler.hpp"
#include "aigflow/trainer.hpp"
#include "corpus.hpp"
#include "oracles.hpp"

using namespace aigflow;

namespace {

ModelConfig small_config(std::uint64_t seed = 1) {
  ModelConfig c;
  c.d = 8;
  c.heads = 2;
  c.tx_depth = 2;
  c.pool_depth = 2;
  c.seed = seed;
  return c;
}

void fill(const Model& m, const std::string& name, std::vector<double> v) {
  Tensor t = m.params().get(name);
  REQUIRE(t.numel() == v.size());
  std::copy(v.begin(), v.end(), t.mutable_values().begin());
}

void zero_all(const Model& m, const std::string& prefix) {
  for (const auto& e : m.params().entries())
    if (e.name.rfind(prefix, 0) == 0) {
      Tensor t = e.tensor;
      for (auto& x : t.mutable_values()) x = 0.0;
    }
}

/// Every working batch of a schedule, with states produced by `model`.
std::vector<WorkingBatch> capture(const Model& model, const Aig& aig, const PartitionPlan& plan, std::size_t batch) {
  std::vector<WorkingBatch> out;
  run_schedule(aig, plan, build_batches(plan, batch, 0, BatchMode::kEval), [&](const WorkingBatch& wb) {
    out.push_back(wb);
    return node_states(model.forward(aig, wb));
  });
  return out;
}

double max_dev(const Tensor& a, const Tensor& b) {
  REQUIRE(a.numel() == b.numel());
  double m = 0.0;
  for (std::size_t i = 0; i < a.numel(); ++i) m = std::max(m, std::abs(a.values()[i] - b.values()[i]));
  return m;
}

std::vector<double> vals(const Tensor& t) { return {t.values().begin(), t.values().end()}; }

std::vector<double> row(const Tensor& t, std::size_t r) {
  return {t.values().begin() + static_cast<long>(r * t.cols()), t.values().begin() + static_cast<long>((r + 1) * t.cols())};
}

}  // namespace

TEST_CASE("config validation") {
  ModelConfig c = small_config();
  c.heads = 3;
  CHECK_THROWS_AS(Model{c}, Error);
  c = small_config();
  c.tx_depth = 0;
  CHECK_THROWS_AS(Model{c}, Error);
}

TEST_CASE("structural encoding examples") {
  const Aig aig = testing::load("b02_profile.aag");
  std::vector<NodeId> all(aig.size());
  for (NodeId v = 0; v < aig.size(); ++v) all[v] = v;

  ModelConfig c = small_config();
  c.d = 2;
  c.heads = 1;
  const Model m(c);
  zero_all(m, "se.");
  const auto z = m.structural_encoding(aig, all);
  for (double x : z.values()) CHECK(x == 0.0);

  NodeId at3 = 0;
  while (aig.level(at3) != 3) ++at3;
  fill(m, "se.level.w", {1.0, 0.0});
  const auto one = m.structural_encoding(aig, std::vector<NodeId>{at3});
  CHECK(one.at(0, 0) == std::log1p(3.0));
  CHECK(one.at(0, 1) == 0.0);

  // additivity: the full encoding is the sum of three separately evaluated maps
  const Model r(small_config(4));
  const auto se = r.structural_encoding(aig, all);
  const auto& p = r.params();
  for (NodeId v = 0; v < aig.size(); ++v) {
    const auto fs = fanout_stats(aig, v);
    const double x[3] = {std::log1p(double(aig.level(v))), std::log1p(double(fs.out_and)), std::log1p(double(fs.out_not))};
    const char* names[3] = {"level", "and", "not"};
    for (std::size_t j = 0; j < 8; ++j) {
      double want = 0.0;
      for (int i = 0; i < 3; ++i)
        want += p.get(std::string("se.") + names[i] + ".w").values()[j] * x[i] + p.get(std::string("se.") + names[i] + ".b").values()[j];
      CHECK(se.at(v, j) == doctest::Approx(want).epsilon(1e-14));
    }
  }
}

TEST_CASE("tokenizer: a lone PI gets the learned constant and its encoding") {
  AigBuilder b;
  b.add_pi();
  const Aig aig = std::move(b).build();
  const auto plan = partition(aig, 4, 2);
  const Model m(small_config());
  const auto wb = pull(EmbeddingStore(aig.size()), aig, plan, MiniBatch{{0}});
  const auto [hf, hs] = m.tokenize(aig, wb, AttentionMode::kGeneral);
  CHECK(row(hf.t, 0) == std::vector<double>(m.params().get("tok.f.pi").values().begin(), m.params().get("tok.f.pi").values().end()));
  CHECK(row(hs.t, 0) == row(m.structural_encoding(aig, wb.nodes), 0));
}

TEST_CASE("tokenizer: NOT aggregation is a singleton softmax") {
  AigBuilder b;
  const NodeId x = b.add_pi(), y = b.add_pi();
  b.add_not(b.add_and(x, y));
  const Aig aig = std::move(b).build();
  const auto plan = partition(aig, 4, 2);
  const Model m(small_config());
  const auto wb = pull(EmbeddingStore(aig.size()), aig, plan, MiniBatch{{0}});
  AttentionProbe probe;
  m.tokenize(aig, wb, AttentionMode::kGeneral, nullptr, &probe);
  bool saw_not = false;
  for (const auto& r : probe.records) {
    std::map<std::uint32_t, int> count;
    for (auto s : r.segment) ++count[s];
    for (std::size_t e = 0; e < r.segment.size(); ++e)
      if (aig.type(wb.nodes[r.segment[e]]) == GateType::kNot) {
        CHECK(count[r.segment[e]] == 1);
        CHECK(r.weights[e] == 1.0);
        saw_not = true;
      }
  }
  CHECK(saw_not);
}

TEST_CASE("tokenizer: outputs do not depend on node numbering within a level") {
  // the same circuit built with independent gates in two different orders
  auto build = [](bool swap) {
    AigBuilder b;
    std::vector<NodeId> x;
    for (int i = 0; i < 4; ++i) x.push_back(b.add_pi());
    NodeId g1, g2, n1;
    if (!swap) {
      g1 = b.add_and(x[0], x[1]);
      g2 = b.add_and(x[2], x[3]);
      n1 = b.add_not(x[1]);
    } else {
      n1 = b.add_not(x[1]);
      g2 = b.add_and(x[2], x[3]);
      g1 = b.add_and(x[0], x[1]);
    }
    const NodeId top = b.add_and(b.add_and(g1, n1), b.add_not(g2));
    b.add_output(top);
    return std::pair{std::move(b).build(), std::vector<NodeId>{g1, g2, n1, top}};
  };
  const auto [a, ida] = build(false);
  const auto [c, idc] = build(true);
  const Model m(small_config(7));
  auto states = [&](const Aig& aig) {
    const auto plan = partition(aig, 6, 4);
    REQUIRE(plan.cones().size() == 1);
    const auto wb = pull(EmbeddingStore(aig.size()), aig, plan, MiniBatch{{0}});
    auto [hf, hs] = m.tokenize(aig, wb, AttentionMode::kGeneral);
    return std::tuple{wb, hf.t, hs.t};
  };
  const auto [wa, fa, sa] = states(a);
  const auto [wc, fc, sc] = states(c);
  for (std::size_t i = 0; i < ida.size(); ++i) {
    const auto la = wa.local(ida[i]), lc = wc.local(idc[i]);
    for (std::size_t j = 0; j < 8; ++j) {
      CHECK(fa.at(la, j) == doctest::Approx(fc.at(lc, j)).epsilon(1e-13));
      CHECK(sa.at(la, j) == doctest::Approx(sc.at(lc, j)).epsilon(1e-13));
    }
  }
}

TEST_CASE("transformer: attention weights sum to one everywhere") {
  const Aig aig = testing::load("toy_2.aag");
  const auto plan = partition(aig, 8, 6);
  const Model m(small_config(3));
  double worst = 0.0;
  std::size_t sites = 0;
  for (const auto& wb : capture(m, aig, plan, 4)) {
    for (auto mode : {AttentionMode::kGeneral, AttentionMode::kFastDegree1}) {
      AttentionProbe probe;
      m.forward(aig, wb, mode, &probe);
      for (const auto& r : probe.records) {
        std::map<std::pair<std::uint32_t, std::size_t>, double> sum;
        for (std::size_t e = 0; e < r.segment.size(); ++e)
          for (std::size_t h = 0; h < r.heads; ++h) sum[{r.segment[e], h}] += r.weights[e * r.heads + h];
        for (const auto& [key, s] : sum) worst = std::max(worst, std::abs(s - 1.0));
        ++sites;
      }
    }
  }
  CHECK(sites > 0);
  CHECK(worst <= 1e-12);
}

TEST_CASE("fast path equals the general path on many cones") {
  const Model m(small_config(5));
  std::size_t cones = 0;
  double worst = 0.0;
  for (const auto& name : {"toy_0.aag", "rand_small_1.aag", "ladder_4x12.aag", "tree_mixed_d5.aag"}) {
    const Aig aig = testing::load(name);
    const auto plan = partition(aig, 8, 6);
    for (const auto& wb : capture(m, aig, plan, 2)) {
      const auto g = m.forward(aig, wb, AttentionMode::kGeneral);
      const auto f = m.forward(aig, wb, AttentionMode::kFastDegree1);
      worst = std::max({worst, max_dev(g.hf, f.hf), max_dev(g.hs, f.hs), max_dev(g.cone_hf, f.cone_hf),
                        max_dev(g.cone_hs, f.cone_hs)});
      cones += wb.cone_ids.size();
    }
  }
  CHECK(cones >= 50);
  CHECK(worst < 1e-12);
}

TEST_CASE("fast path on a chain skips every internal destination") {
  AigBuilder b;
  NodeId v = b.add_pi();
  for (int i = 0; i < 5; ++i) v = b.add_not(v);
  const Aig aig = std::move(b).build();
  const auto plan = partition(aig, 6, 4);
  const Model m(small_config());
  const auto wb = pull(EmbeddingStore(aig.size()), aig, plan, MiniBatch{{0}});
  // k-closure turns the chain into a DAG where only node 1 has one in-edge
  std::size_t one = 0;
  for (NodeId d = 0; d < wb.size(); ++d)
    one += std::count_if(wb.augmented.begin(), wb.augmented.end(), [&](const LocalEdge& e) { return e.dst == d; }) == 1;
  const auto out = m.forward(aig, wb, AttentionMode::kFastDegree1);
  CHECK(out.stats.transformer_skips == one);
  CHECK(out.stats.tokenizer_skips == 5);  // every NOT has one fanin
  const auto gen = m.forward(aig, wb, AttentionMode::kGeneral);
  CHECK(gen.stats.transformer_skips == 0);
  CHECK(max_dev(out.hf, gen.hf) == 0.0);
}

TEST_CASE("skip counts equal the in-degree-1 counts of an independent closure") {
  const Aig aig = testing::load("tree_mixed_d5.aag");
  const auto g = oracle::graph_of(aig);
  const auto plan = partition(aig, 4, 2);
  const Model m(small_config());
  for (const auto& wb : capture(m, aig, plan, 1)) {
    if (wb.frozen_count() != 0) continue;
    REQUIRE(wb.cone_ids.size() == 1);
    const auto& cone = plan.cone(wb.cone_ids[0]);
    const auto pairs = oracle::closure_pairs(g, std::set<NodeId>(cone.members.begin(), cone.members.end()), 4);
    std::map<NodeId, std::size_t> indeg;
    for (const auto& [u, w] : pairs) ++indeg[w];
    std::size_t want = 0;
    for (const auto& [w, c] : indeg) want += c == 1;
    std::size_t nots = 0;
    for (NodeId v : cone.members) nots += aig.type(v) == GateType::kNot && cone.contains(aig.fanins(v)[0]);
    const auto out = m.forward(aig, wb, AttentionMode::kFastDegree1);
    CHECK(out.stats.transformer_skips == want);
    CHECK(out.stats.tokenizer_skips == nots);
  }
}

TEST_CASE("zero value/projection weights remove the attention contribution") {
  const Aig aig = testing::load("rand_small_0.aag");
  const auto plan = partition(aig, 8, 6);
  const Model m(small_config(2));
  auto wb = capture(m, aig, plan, 3).front();
  for (const auto& e : m.params().entries())
    if (e.name.rfind("tx.", 0) == 0 && (e.name.ends_with(".wv") || e.name.ends_with(".wo"))) zero_all(m, e.name);
  const auto [hf, hs] = m.tokenize(aig, wb, AttentionMode::kGeneral);
  const auto [f1, s1] = m.transform(wb, hf, hs, AttentionMode::kGeneral);
  WorkingBatch bare = wb;
  bare.augmented.clear();
  const auto [f2, s2] = m.transform(bare, hf, hs, AttentionMode::kGeneral);
  CHECK(max_dev(f1.t, f2.t) == 0.0);
  CHECK(max_dev(s1.t, s2.t) == 0.0);
}

TEST_CASE("frozen rows are never rewritten") {
  const Aig aig = testing::load("rand_large.aag");
  const auto plan = partition(aig, 8, 6);
  const Model m(small_config(6));
  std::size_t checked = 0;
  for (const auto& wb : capture(m, aig, plan, 8)) {
    if (wb.frozen_count() == 0) continue;
    const auto out = m.forward(aig, wb);
    for (std::size_t i = 0; i < wb.size(); ++i)
      if (wb.frozen[i]) {
        CHECK(row(out.hf, i) == wb.pulled[i]->hf);
        CHECK(row(out.hs, i) == wb.pulled[i]->hs);
        ++checked;
      }
    if (checked > 200) break;
  }
  CHECK(checked > 0);
}

TEST_CASE("pooling: member order does not matter; empty cones are rejected") {
  const Aig aig = testing::load("toy_3.aag");
  const auto plan = partition(aig, 8, 6);
  const Model m(small_config(8));
  const auto wb = capture(m, aig, plan, 4).front();
  const auto out = m.forward(aig, wb);
  WorkingBatch shuffled = wb;
  Rng rng(3);
  for (auto& members : shuffled.cone_members) rng.shuffle(members);
  const auto [cf, cs] = m.pool(shuffled, Hf{out.hf}, Hs{out.hs});
  CHECK(max_dev(cf.t, out.cone_hf) < 1e-13);
  CHECK(max_dev(cs.t, out.cone_hs) < 1e-13);

  AttentionProbe probe;
  m.pool(wb, Hf{out.hf}, Hs{out.hs}, &probe);
  CHECK(probe.records.size() == 2 * 2);  // two streams, two blocks
  for (const auto& r : probe.records) {
    std::map<std::pair<std::uint32_t, std::size_t>, double> sum;
    for (std::size_t e = 0; e < r.segment.size(); ++e)
      for (std::size_t h = 0; h < r.heads; ++h) sum[{r.segment[e], h}] += r.weights[e * r.heads + h];
    CHECK(sum.size() == wb.cone_members.size() * r.heads);
    for (const auto& [k, s] : sum) CHECK(std::abs(s - 1.0) <= 1e-12);
  }

  WorkingBatch empty = wb;
  empty.cone_members[0].clear();
  CHECK_THROWS_AS(m.pool(empty, Hf{out.hf}, Hs{out.hs}), Error);
}

TEST_CASE("pooling a single-member cone depends only on that member") {
  const Aig aig = testing::load("toy_3.aag");
  const auto plan = partition(aig, 8, 6);
  const Model m(small_config(8));
  const auto wb = capture(m, aig, plan, 4).front();
  const auto out = m.forward(aig, wb);
  WorkingBatch single = wb;
  single.cone_members = {{0}, {0}};
  const auto [a, as] = m.pool(single, Hf{out.hf}, Hs{out.hs});
  CHECK(row(a.t, 0) == row(a.t, 1));
  // changing every other row leaves the pooled state unchanged
  std::vector<double> other(out.hf.values().begin(), out.hf.values().end());
  for (std::size_t i = out.hf.cols(); i < other.size(); ++i) other[i] += 1.0;
  const auto [b, bs] = m.pool(single, Hf{Tensor::constant(out.hf.rows(), out.hf.cols(), other)}, Hs{out.hs});
  CHECK(row(a.t, 0) == row(b.t, 0));
}

TEST_CASE("heads: stream misuse, zero last layer, ranges") {
  ParamRegistry reg;
  CHECK_THROWS_AS(MlpHead(reg, Task::kProb, Stream::kStructural, 4, 4, 1, HeadOutput::kProbability, 0), Error);
  CHECK_THROWS_AS(MlpHead(reg, Task::kCon, Stream::kFunctional, 8, 4, 1, HeadOutput::kProbability, 0), Error);
  CHECK_NOTHROW(MlpHead(reg, Task::kSize, Stream::kStructural, 4, 4, 1, HeadOutput::kCount, 0));

  Model m(small_config(9));
  Rng rng(1);
  auto random_rows = [&](std::size_t n, std::size_t d, double scale) {
    std::vector<double> v(n * d);
    for (auto& x : v) x = rng.uniform(-scale, scale);
    return Tensor::constant(n, d, std::move(v));
  };
  const auto x = random_rows(1000, 8, 5.0), y = random_rows(1000, 8, 5.0);
  auto in01 = [](const Tensor& t) {
    for (double v : t.values())
      if (!(v >= 0.0 && v <= 1.0)) return false;
    return true;
  };
  auto nonneg = [](const Tensor& t) {
    for (double v : t.values())
      if (!(std::isfinite(v) && v >= 0.0)) return false;
    return true;
  };
  CHECK(in01(m.prob(Hf{x})));
  CHECK(in01(m.gate_tt(Hf{x}, Hf{y})));
  CHECK(in01(m.con(Hs{x}, Hs{x})));
  CHECK(in01(m.graph_tt(Hf{x})));
  CHECK(m.graph_tt(Hf{x}).cols() == 64);
  CHECK(in01(m.graph_tt_pair(Hf{x}, Hf{y})));
  CHECK(in01(m.in(Hs{x}, Hs{y})));
  CHECK(nonneg(m.ged(Hs{x}, Hs{y})));
  CHECK(nonneg(m.size(Hs{x})));
  CHECK(nonneg(m.depth(Hs{x})));

  zero_all(m, "head.prob.w2");
  zero_all(m, "head.prob.b2");
  for (double v : vals(m.prob(Hf{x}))) CHECK(v == 0.5);
}

TEST_CASE("streams are disentangled") {
  const Aig aig = testing::load("toy_4.aag");
  const auto plan = partition(aig, 8, 6);
  auto run = [&](const std::string& perturb) {
    Model m(small_config(10));
    for (const auto& e : m.params().entries())
      if (!perturb.empty() && e.name.find(perturb) != std::string::npos) {
        Tensor t = e.tensor;
        for (auto& v : t.mutable_values()) v += 0.25;
      }
    std::vector<double> prob, con;
    for (const auto& wb : capture(m, aig, plan, 8)) {
      const auto out = m.forward(aig, wb);
      for (double v : vals(m.prob(Hf{out.hf}))) prob.push_back(v);
      for (double v : vals(m.graph_tt(Hf{out.cone_hf}))) prob.push_back(v);
      for (double v : vals(m.con(Hs{out.hs}, Hs{out.hs}))) con.push_back(v);
      for (double v : vals(m.size(Hs{out.cone_hs}))) con.push_back(v);
    }
    return std::pair{prob, con};
  };
  const auto base = run("");
  for (const char* s : {".s.", "se."}) {
    CAPTURE(s);
    const auto p = run(s);
    CHECK(p.first == base.first);
    CHECK(p.second != base.second);
  }
  const auto f = run(".f.");
  CHECK(f.second == base.second);
  CHECK(f.first != base.first);
}

TEST_CASE("fixed seed gives bit-identical parameters and outputs") {
  const Aig aig = testing::load("b02_profile.aag");
  const auto plan = partition(aig, 8, 6);
  const Model a(small_config(11)), b(small_config(11)), c(small_config(12));
  CHECK(a.params().flat_values() == b.params().flat_values());
  CHECK(a.params().flat_values() != c.params().flat_values());
  const auto wa = capture(a, aig, plan, 8), wb = capture(b, aig, plan, 8);
  for (std::size_t i = 0; i < wa.size(); ++i) {
    const auto x = a.forward(aig, wa[i]), y = b.forward(aig, wb[i]);
    CHECK(max_dev(x.hf, y.hf) == 0.0);
    CHECK(max_dev(x.cone_hs, y.cone_hs) == 0.0);
  }
}
