#include "aigflow/model.hpp"

#include <algorithm>
#include <cmath>

#include "aigflow/error.hpp"
#include "aigflow/random.hpp"

namespace aigflow {

using Index = std::vector<std::uint32_t>;

void ModelConfig::validate() const {
  if (d == 0 || tokenizer_rounds == 0 || tx_depth == 0 || heads == 0 || pool_depth == 0)
    throw Error(ErrorCode::kInvalidArgument, "model config: all sizes must be >= 1");
  if (d % heads != 0)
    throw Error(ErrorCode::kInvalidArgument,
                "model config: d=" + std::to_string(d) + " not divisible by heads=" + std::to_string(heads));
}

const char* to_string(Stream s) noexcept { return s == Stream::kFunctional ? "functional" : "structural"; }

const char* to_string(Task t) noexcept {
  switch (t) {
    case Task::kProb: return "prob";
    case Task::kGateTt: return "gate_tt_pair";
    case Task::kCon: return "con";
    case Task::kGraphTt: return "graph_tt";
    case Task::kGraphTtPair: return "graph_tt_pair";
    case Task::kGed: return "ged_pair";
    case Task::kSize: return "size";
    case Task::kDepth: return "depth";
    case Task::kIn: return "in";
  }
  return "?";
}

Stream task_stream(Task t) noexcept {
  switch (t) {
    case Task::kProb:
    case Task::kGateTt:
    case Task::kGraphTt:
    case Task::kGraphTtPair: return Stream::kFunctional;
    default: return Stream::kStructural;
  }
}

MlpHead::MlpHead(ParamRegistry& params, Task task, Stream input, std::size_t in_width, std::size_t hidden,
                 std::size_t out, HeadOutput kind, std::uint64_t seed)
    : task_(task), kind_(kind) {
  if (input != task_stream(task))
    throw Error(ErrorCode::kInvalidArgument, std::string("head '") + to_string(task) + "' reads the " +
                                                 to_string(task_stream(task)) + " stream, not " + to_string(input));
  const std::size_t widths[4] = {in_width, hidden, hidden, out};
  const std::string base = std::string("head.") + to_string(task);
  for (std::size_t l = 0; l < 3; ++l) {
    w_[l] = params.add_glorot(base + ".w" + std::to_string(l), widths[l], widths[l + 1], derive_seed(seed, {l}));
    b_[l] = params.add_zeros(base + ".b" + std::to_string(l), 1, widths[l + 1]);
  }
}

Tensor MlpHead::operator()(const Tensor& x) const {
  Tensor h = ops::relu(ops::add(ops::matmul(x, w_[0]), b_[0]));
  h = ops::relu(ops::add(ops::matmul(h, w_[1]), b_[1]));
  h = ops::add(ops::matmul(h, w_[2]), b_[2]);
  return kind_ == HeadOutput::kProbability ? ops::sigmoid(h) : ops::softplus(h);
}

namespace {

Tensor cat_cols(const Tensor& a, const Tensor& b) {
  const Tensor parts[2] = {a, b};
  return ops::concat_cols(parts);
}

Tensor cat_rows(const std::vector<Tensor>& parts) {
  if (parts.size() == 1) return parts[0];
  return ops::concat_rows(parts);
}

Tensor broadcast_row(const Tensor& row, std::size_t n) { return ops::gather_rows(row, Index(n, 0)); }

Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b) { return ops::add(ops::matmul(x, w), b); }

}  // namespace

Model::Mlp2 Model::add_mlp2(const std::string& name, std::size_t in, std::size_t hidden, std::size_t out,
                            std::uint64_t tag) {
  Mlp2 m;
  m.w1 = params_.add_glorot(name + ".w1", in, hidden, derive_seed(config_.seed, {tag, 1}));
  m.b1 = params_.add_zeros(name + ".b1", 1, hidden);
  m.w2 = params_.add_glorot(name + ".w2", hidden, out, derive_seed(config_.seed, {tag, 2}));
  m.b2 = params_.add_zeros(name + ".b2", 1, out);
  return m;
}

Model::Block Model::add_block(const std::string& name, std::uint64_t tag) {
  const std::size_t d = config_.d;
  Block b;
  b.wq = params_.add_glorot(name + ".wq", d, d, derive_seed(config_.seed, {tag, 1}));
  b.wk = params_.add_glorot(name + ".wk", d, d, derive_seed(config_.seed, {tag, 2}));
  b.wv = params_.add_glorot(name + ".wv", d, d, derive_seed(config_.seed, {tag, 3}));
  b.wo = params_.add_glorot(name + ".wo", d, d, derive_seed(config_.seed, {tag, 4}));
  b.w1 = params_.add_glorot(name + ".ff.w1", d, 2 * d, derive_seed(config_.seed, {tag, 5}));
  b.b1 = params_.add_zeros(name + ".ff.b1", 1, 2 * d);
  b.w2 = params_.add_glorot(name + ".ff.w2", 2 * d, d, derive_seed(config_.seed, {tag, 6}));
  b.b2 = params_.add_zeros(name + ".ff.b2", 1, d);
  return b;
}

Tensor Model::apply_mlp2(const Mlp2& m, const Tensor& x) const {
  return linear(ops::relu(linear(x, m.w1, m.b1)), m.w2, m.b2);
}

Model::Model(ModelConfig config) : config_(config) {
  config_.validate();
  const std::size_t d = config_.d;
  std::uint64_t tag = 0;
  auto seed = [&] { return derive_seed(config_.seed, {++tag}); };

  const char* se_names[3] = {"se.level", "se.and", "se.not"};
  for (int i = 0; i < 3; ++i) {
    se_w_[i] = params_.add_glorot(std::string(se_names[i]) + ".w", 1, d, seed());
    se_b_[i] = params_.add_zeros(std::string(se_names[i]) + ".b", 1, d);
  }

  pi_hf_ = params_.add_glorot("tok.f.pi", 1, d, seed());
  type_query_ = params_.add_glorot("tok.f.type_query", 3, d, seed());
  tok_wk_f_ = params_.add_glorot("tok.f.wk", d, d, seed());
  upd_and_ = add_mlp2("tok.f.and", d, d, d, ++tag);
  upd_not_ = add_mlp2("tok.f.not", d, d, d, ++tag);
  tok_wq_s_ = params_.add_glorot("tok.s.wq", d, d, seed());
  tok_wk_s_ = params_.add_glorot("tok.s.wk", d, d, seed());
  upd_s_ = add_mlp2("tok.s.upd", 2 * d, d, d, ++tag);
  for (std::size_t r = 1; r < config_.tokenizer_rounds; ++r) {
    round_f_.push_back(add_mlp2("tok.f.round" + std::to_string(r), d, d, d, ++tag));
    round_s_.push_back(add_mlp2("tok.s.round" + std::to_string(r), d, d, d, ++tag));
  }

  for (std::size_t b = 0; b < config_.tx_depth; ++b) tx_f_.push_back(add_block("tx.f." + std::to_string(b), ++tag));
  for (std::size_t b = 0; b < config_.tx_depth; ++b) tx_s_.push_back(add_block("tx.s." + std::to_string(b), ++tag));

  pool_token_f_ = params_.add_glorot("pool.f.token", 1, d, seed());
  pool_token_s_ = params_.add_glorot("pool.s.token", 1, d, seed());
  for (std::size_t b = 0; b < config_.pool_depth; ++b) {
    auto blk = add_block("pool.f." + std::to_string(b), ++tag);
    pool_f_.push_back({blk.wq, blk.wk, blk.wv, blk.wo, blk.w1, blk.b1, blk.w2, blk.b2});
  }
  for (std::size_t b = 0; b < config_.pool_depth; ++b) {
    auto blk = add_block("pool.s." + std::to_string(b), ++tag);
    pool_s_.push_back({blk.wq, blk.wk, blk.wv, blk.wo, blk.w1, blk.b1, blk.w2, blk.b2});
  }

  using S = Stream;
  using O = HeadOutput;
  prob_ = MlpHead(params_, Task::kProb, S::kFunctional, d, d, 1, O::kProbability, seed());
  gate_tt_ = MlpHead(params_, Task::kGateTt, S::kFunctional, 2 * d, d, 1, O::kProbability, seed());
  con_ = MlpHead(params_, Task::kCon, S::kStructural, 2 * d, d, 1, O::kProbability, seed());
  tt_ = MlpHead(params_, Task::kGraphTt, S::kFunctional, d, d, 64, O::kProbability, seed());
  graph_tt_ = MlpHead(params_, Task::kGraphTtPair, S::kFunctional, 2 * d, d, 1, O::kProbability, seed());
  ged_ = MlpHead(params_, Task::kGed, S::kStructural, 2 * d, d, 1, O::kCount, seed());
  size_ = MlpHead(params_, Task::kSize, S::kStructural, d, d, 1, O::kCount, seed());
  depth_ = MlpHead(params_, Task::kDepth, S::kStructural, d, d, 1, O::kCount, seed());
  in_ = MlpHead(params_, Task::kIn, S::kStructural, 2 * d, d, 1, O::kProbability, seed());
}

MlpHead& Model::head(Task t) {
  switch (t) {
    case Task::kProb: return prob_;
    case Task::kGateTt: return gate_tt_;
    case Task::kCon: return con_;
    case Task::kGraphTt: return tt_;
    case Task::kGraphTtPair: return graph_tt_;
    case Task::kGed: return ged_;
    case Task::kSize: return size_;
    case Task::kDepth: return depth_;
    case Task::kIn: return in_;
  }
  throw Error(ErrorCode::kInvalidArgument, "unknown task");
}

Tensor Model::gate_tt(const Hf& a, const Hf& b) const { return gate_tt_(cat_cols(a.t, b.t)); }
Tensor Model::con(const Hs& a, const Hs& b) const { return con_(cat_cols(a.t, b.t)); }
Tensor Model::graph_tt_pair(const Hf& a, const Hf& b) const { return graph_tt_(cat_cols(a.t, b.t)); }
Tensor Model::ged(const Hs& a, const Hs& b) const { return ged_(cat_cols(a.t, b.t)); }
Tensor Model::in(const Hs& node, const Hs& cone) const { return in_(cat_cols(node.t, cone.t)); }

std::vector<Tensor> Model::balancer_tap() const { return {tx_f_.back().wo, tx_s_.back().wo}; }

Tensor Model::structural_encoding(const Aig& aig, std::span<const NodeId> nodes) const {
  const std::size_t n = nodes.size();
  std::vector<double> cols[3];
  for (auto& c : cols) c.reserve(n);
  for (NodeId v : nodes) {
    const auto fs = fanout_stats(aig, v);
    cols[0].push_back(std::log1p(static_cast<double>(aig.level(v))));
    cols[1].push_back(std::log1p(static_cast<double>(fs.out_and)));
    cols[2].push_back(std::log1p(static_cast<double>(fs.out_not)));
  }
  Tensor se;
  for (int i = 0; i < 3; ++i) {
    Tensor part = linear(Tensor::constant(n, 1, std::move(cols[i])), se_w_[i], se_b_[i]);
    se = se.defined() ? ops::add(se, part) : part;
  }
  return se;
}

namespace {

// Destinations and their incoming edges for one aggregation step.
struct Aggregation {
  Index dst_pos;  // per edge: position of its destination in the group
  Index src;      // per edge: row of the source in the current table
  std::vector<std::size_t> indegree;  // per destination
};

void record(AttentionProbe* probe, const std::string& site, std::size_t heads, const Index& seg, const Tensor& alpha,
            const Index& single_seg) {
  if (!probe) return;
  AttentionProbe::Record r;
  r.site = site;
  r.heads = heads;
  r.segment = seg;
  if (alpha.defined()) r.weights.assign(alpha.values().begin(), alpha.values().end());
  for (auto s : single_seg) {
    r.segment.push_back(s);
    r.weights.insert(r.weights.end(), heads, 1.0);
  }
  probe->records.push_back(std::move(r));
}

}  // namespace

namespace {

// Attention-weighted sum of source rows per destination with one head.
// `queries` holds one row per destination; keys are `table[src] @ wk`.
Tensor aggregate_single_head(const Tensor& table, const Tensor& queries, const Tensor& wk, const Aggregation& agg,
                             std::size_t groups, double slope, AttentionMode mode, std::size_t* skips,
                             AttentionProbe* probe, const std::string& site, const Index& dst_local) {
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(table.cols()));
  Index m_dst, m_src, s_dst, s_src;
  for (std::size_t e = 0; e < agg.src.size(); ++e) {
    const bool single = mode == AttentionMode::kFastDegree1 && agg.indegree[agg.dst_pos[e]] == 1;
    (single ? s_dst : m_dst).push_back(agg.dst_pos[e]);
    (single ? s_src : m_src).push_back(agg.src[e]);
  }
  if (skips) *skips += s_dst.size();

  std::vector<Tensor> msgs;
  Index seg;
  Tensor alpha;
  if (!m_dst.empty()) {
    Tensor src_rows = ops::gather_rows(table, m_src);
    Tensor k = ops::matmul(src_rows, wk);
    Tensor q = ops::gather_rows(queries, m_dst);
    Tensor s = ops::leaky_relu(ops::scale(ops::head_dot(q, k, 1), inv_sqrt), slope);
    alpha = ops::segment_softmax(s, m_dst, groups);
    msgs.push_back(ops::head_scale(alpha, src_rows));
    seg.insert(seg.end(), m_dst.begin(), m_dst.end());
  }
  if (!s_dst.empty()) {
    msgs.push_back(ops::gather_rows(table, s_src));
    seg.insert(seg.end(), s_dst.begin(), s_dst.end());
  }
  if (probe) {
    Index mseg, sseg;
    for (auto p : m_dst) mseg.push_back(dst_local[p]);
    for (auto p : s_dst) sseg.push_back(dst_local[p]);
    record(probe, site, 1, mseg, alpha, sseg);
  }
  if (msgs.empty()) return Tensor::zeros(groups, table.cols());
  return ops::segment_sum(cat_rows(msgs), seg, groups);
}

}  // namespace

std::pair<Hf, Hs> Model::tokenize(const Aig& aig, const WorkingBatch& batch, AttentionMode mode, ForwardStats* stats,
                                  AttentionProbe* probe) const {
  const std::size_t n = batch.size();
  const std::size_t d = config_.d;
  if (n == 0) throw Error(ErrorCode::kInvalidArgument, "tokenize: empty batch");
  const Tensor se = structural_encoding(aig, batch.nodes);

  // Local fanins and level-synchronous depth within the working graph.
  std::vector<std::vector<std::uint32_t>> fanins(n);
  for (const auto& e : batch.edges) fanins[e.dst].push_back(e.src);
  Index order(n);
  for (std::uint32_t i = 0; i < n; ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(),
                   [&](auto a, auto b) { return aig.level(batch.nodes[a]) < aig.level(batch.nodes[b]); });
  std::vector<std::size_t> depth(n, 0);
  std::size_t max_depth = 0;
  for (auto v : order) {
    if (batch.frozen[v]) {
      if (!fanins[v].empty()) throw Error(ErrorCode::kInvariantBreach, "tokenize: frozen node with in-edges");
      continue;
    }
    for (auto u : fanins[v]) depth[v] = std::max(depth[v], depth[u] + 1);
    max_depth = std::max(max_depth, depth[v]);
  }
  std::vector<Index> groups(max_depth + 1);
  for (std::uint32_t v = 0; v < n; ++v) groups[depth[v]].push_back(v);

  std::vector<Tensor> parts_f, parts_s;
  Index loc(n, 0);
  std::uint32_t rows = 0;
  auto append = [&](const Tensor& f, const Tensor& s, const Index& members) {
    parts_f.push_back(f);
    parts_s.push_back(s);
    for (auto v : members) loc[v] = rows++;
  };

  // Sources: frozen rows, fresh PIs, and fresh gates without working fanins.
  {
    Index frozen, pis, and_gates, not_gates;
    for (auto v : groups[0]) {
      if (batch.frozen[v]) frozen.push_back(v);
      else if (aig.type(batch.nodes[v]) == GateType::kPi) pis.push_back(v);
      else if (aig.type(batch.nodes[v]) == GateType::kAnd) and_gates.push_back(v);
      else not_gates.push_back(v);
    }
    if (!frozen.empty()) {
      std::vector<double> f, s;
      for (auto v : frozen) {
        const auto& st = *batch.pulled[v];
        if (st.hf.size() != d || st.hs.size() != d)
          throw Error(ErrorCode::kShapeMismatch, "tokenize: pulled state has the wrong width");
        f.insert(f.end(), st.hf.begin(), st.hf.end());
        s.insert(s.end(), st.hs.begin(), st.hs.end());
      }
      append(Tensor::constant(frozen.size(), d, std::move(f)), Tensor::constant(frozen.size(), d, std::move(s)),
             frozen);
    }
    if (!pis.empty()) append(broadcast_row(pi_hf_, pis.size()), ops::gather_rows(se, pis), pis);
    for (const Index* gates : {&and_gates, &not_gates}) {
      if (gates->empty()) continue;
      const Tensor zero = Tensor::zeros(gates->size(), d);
      const Mlp2& upd = gates == &and_gates ? upd_and_ : upd_not_;
      append(ops::layer_norm(apply_mlp2(upd, zero)),
             ops::layer_norm(apply_mlp2(upd_s_, cat_cols(zero, ops::gather_rows(se, *gates)))), *gates);
    }
  }

  std::size_t skips = 0;
  for (std::size_t g = 1; g < groups.size(); ++g) {
    const Index& group = groups[g];
    const Tensor table_f = cat_rows(parts_f);
    const Tensor table_s = cat_rows(parts_s);
    Aggregation agg;
    Index dst_types;
    for (std::uint32_t p = 0; p < group.size(); ++p) {
      const auto v = group[p];
      agg.indegree.push_back(fanins[v].size());
      dst_types.push_back(static_cast<std::uint32_t>(aig.type(batch.nodes[v])));
      for (auto u : fanins[v]) {
        agg.dst_pos.push_back(p);
        agg.src.push_back(loc[u]);
      }
    }
    const Tensor q_f = ops::gather_rows(type_query_, dst_types);
    const Tensor se_group = ops::gather_rows(se, group);
    const Tensor q_s = ops::matmul(se_group, tok_wq_s_);
    std::size_t skipped = 0;
    const Tensor m_f = aggregate_single_head(table_f, q_f, tok_wk_f_, agg, group.size(), config_.leaky_slope, mode,
                                             &skipped, probe, "tok.f", group);
    const Tensor m_s = aggregate_single_head(table_s, q_s, tok_wk_s_, agg, group.size(), config_.leaky_slope, mode,
                                             nullptr, probe, "tok.s", group);
    skips += skipped;

    Index and_pos, not_pos, and_nodes, not_nodes;
    for (std::uint32_t p = 0; p < group.size(); ++p) {
      const bool is_and = aig.type(batch.nodes[group[p]]) == GateType::kAnd;
      (is_and ? and_pos : not_pos).push_back(p);
      (is_and ? and_nodes : not_nodes).push_back(group[p]);
    }
    const Tensor hs_all = ops::layer_norm(apply_mlp2(upd_s_, cat_cols(m_s, se_group)));
    if (!and_pos.empty())
      append(ops::layer_norm(apply_mlp2(upd_and_, ops::gather_rows(m_f, and_pos))), ops::gather_rows(hs_all, and_pos),
             and_nodes);
    if (!not_pos.empty())
      append(ops::layer_norm(apply_mlp2(upd_not_, ops::gather_rows(m_f, not_pos))), ops::gather_rows(hs_all, not_pos),
             not_nodes);
  }

  Tensor hf = ops::gather_rows(cat_rows(parts_f), loc);
  Tensor hs = ops::gather_rows(cat_rows(parts_s), loc);

  // Further rounds refine every fresh gate with working fanins from the
  // previous round's states.
  if (!round_f_.empty()) {
    Aggregation agg;
    Index group, dst_types;
    for (std::uint32_t v = 0; v < n; ++v) {
      if (fanins[v].empty()) continue;
      const auto p = static_cast<std::uint32_t>(group.size());
      group.push_back(v);
      agg.indegree.push_back(fanins[v].size());
      dst_types.push_back(static_cast<std::uint32_t>(aig.type(batch.nodes[v])));
      for (auto u : fanins[v]) {
        agg.dst_pos.push_back(p);
        agg.src.push_back(u);
      }
    }
    if (!group.empty()) {
      Index reset(n);
      for (std::uint32_t v = 0; v < n; ++v) reset[v] = v;
      for (std::uint32_t p = 0; p < group.size(); ++p) reset[group[p]] = static_cast<std::uint32_t>(n + p);
      const Tensor q_f = ops::gather_rows(type_query_, dst_types);
      const Tensor q_s = ops::matmul(ops::gather_rows(se, group), tok_wq_s_);
      for (std::size_t r = 0; r < round_f_.size(); ++r) {
        std::size_t skipped = 0;
        const Tensor m_f = aggregate_single_head(hf, q_f, tok_wk_f_, agg, group.size(), config_.leaky_slope, mode,
                                                 &skipped, probe, "tok.f", group);
        const Tensor m_s = aggregate_single_head(hs, q_s, tok_wk_s_, agg, group.size(), config_.leaky_slope, mode,
                                                 nullptr, probe, "tok.s", group);
        skips += skipped;
        const Tensor nf = ops::layer_norm(ops::add(ops::gather_rows(hf, group), apply_mlp2(round_f_[r], m_f)));
        const Tensor ns = ops::layer_norm(ops::add(ops::gather_rows(hs, group), apply_mlp2(round_s_[r], m_s)));
        hf = ops::gather_rows(cat_rows({hf, nf}), reset);
        hs = ops::gather_rows(cat_rows({hs, ns}), reset);
      }
    }
  }
  if (stats) stats->tokenizer_skips += skips;
  return {Hf{hf}, Hs{hs}};
}

Tensor Model::attend(const Block& blk, const Tensor& x, const WorkingBatch& batch, AttentionMode mode,
                     ForwardStats* stats, AttentionProbe* probe, const std::string& site) const {
  const std::size_t n = batch.size();
  const std::size_t heads = config_.heads;
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(config_.d / heads));

  std::vector<std::size_t> indeg(n, 0);
  for (const auto& e : batch.augmented) ++indeg[e.dst];
  Index m_dst, m_src, s_dst, s_src;
  for (const auto& e : batch.augmented) {
    const bool single = mode == AttentionMode::kFastDegree1 && indeg[e.dst] == 1;
    (single ? s_dst : m_dst).push_back(e.dst);
    (single ? s_src : m_src).push_back(e.src);
  }
  if (stats) stats->transformer_skips = s_dst.size();

  const Tensor v = ops::matmul(x, blk.wv);
  std::vector<Tensor> msgs;
  Index seg;
  Tensor alpha;
  if (!m_dst.empty()) {
    Tensor qe, ke;
    if (mode == AttentionMode::kGeneral) {
      qe = ops::gather_rows(ops::matmul(x, blk.wq), m_dst);
      ke = ops::gather_rows(ops::matmul(x, blk.wk), m_src);
    } else {
      // Project only the rows that take part in a softmax.
      auto compact = [n](const Index& ids, Index& pos) {
        Index uniq;
        std::vector<std::int64_t> slot(n, -1);
        for (auto id : ids) {
          if (slot[id] < 0) {
            slot[id] = static_cast<std::int64_t>(uniq.size());
            uniq.push_back(id);
          }
          pos.push_back(static_cast<std::uint32_t>(slot[id]));
        }
        return uniq;
      };
      Index qpos, kpos;
      const Index qrows = compact(m_dst, qpos);
      const Index krows = compact(m_src, kpos);
      qe = ops::gather_rows(ops::matmul(ops::gather_rows(x, qrows), blk.wq), qpos);
      ke = ops::gather_rows(ops::matmul(ops::gather_rows(x, krows), blk.wk), kpos);
    }
    Tensor s = ops::leaky_relu(ops::scale(ops::head_dot(qe, ke, heads), inv_sqrt), config_.leaky_slope);
    alpha = ops::segment_softmax(s, m_dst, n);
    msgs.push_back(ops::head_scale(alpha, ops::gather_rows(v, m_src)));
    seg.insert(seg.end(), m_dst.begin(), m_dst.end());
  }
  if (!s_dst.empty()) {
    msgs.push_back(ops::gather_rows(v, s_src));
    seg.insert(seg.end(), s_dst.begin(), s_dst.end());
  }
  record(probe, site, heads, m_dst, alpha, s_dst);
  const Tensor agg = msgs.empty() ? Tensor::zeros(n, config_.d) : ops::segment_sum(cat_rows(msgs), seg, n);
  return ops::matmul(agg, blk.wo);
}

Tensor Model::refine_stream(const std::vector<Block>& blocks, const Tensor& x0, const WorkingBatch& batch,
                            const Tensor& fixed, std::span<const std::uint32_t> reset_index, AttentionMode mode,
                            ForwardStats* stats, AttentionProbe* probe, const char* stream) const {
  Tensor x = x0;
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    const Block& blk = blocks[b];
    const Tensor a = attend(blk, x, batch, mode, stats, probe, std::string("tx.") + stream + "." + std::to_string(b));
    const Tensor x1 = ops::layer_norm(ops::add(x, a));
    const Tensor ff = linear(ops::relu(linear(x1, blk.w1, blk.b1)), blk.w2, blk.b2);
    x = ops::layer_norm(ops::add(x1, ff));
    if (fixed.defined()) x = ops::gather_rows(cat_rows({x, fixed}), reset_index);
  }
  return x;
}

std::pair<Hf, Hs> Model::transform(const WorkingBatch& batch, const Hf& hf, const Hs& hs, AttentionMode mode,
                                   ForwardStats* stats, AttentionProbe* probe) const {
  const std::size_t n = batch.size();
  const std::size_t d = config_.d;
  Index reset(n);
  std::vector<double> ff, fs;
  std::uint32_t frozen = 0;
  for (std::uint32_t v = 0; v < n; ++v) {
    if (batch.frozen[v]) {
      reset[v] = static_cast<std::uint32_t>(n) + frozen++;
      const auto& st = *batch.pulled[v];
      ff.insert(ff.end(), st.hf.begin(), st.hf.end());
      fs.insert(fs.end(), st.hs.begin(), st.hs.end());
    } else {
      reset[v] = v;
    }
  }
  Tensor fixed_f, fixed_s;
  if (frozen > 0) {
    fixed_f = Tensor::constant(frozen, d, std::move(ff));
    fixed_s = Tensor::constant(frozen, d, std::move(fs));
  }
  if (stats) stats->augmented_edges = batch.augmented.size();
  Tensor f = refine_stream(tx_f_, hf.t, batch, fixed_f, reset, mode, stats, probe, "f");
  Tensor s = refine_stream(tx_s_, hs.t, batch, fixed_s, reset, mode, stats, probe, "s");
  return {Hf{f}, Hs{s}};
}

Tensor Model::pool_stream(const std::vector<PoolBlock>& blocks, const Tensor& token, const Tensor& x,
                          const WorkingBatch& batch, AttentionProbe* probe, const char* stream) const {
  const std::size_t cones = batch.cone_members.size();
  const std::size_t heads = config_.heads;
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(config_.d / heads));
  Index seg, rows;
  for (std::uint32_t c = 0; c < cones; ++c) {
    if (batch.cone_members[c].empty()) throw Error(ErrorCode::kInvalidArgument, "pool: empty cone");
    for (auto m : batch.cone_members[c]) {
      seg.push_back(c);
      rows.push_back(m);
    }
  }
  Tensor t = broadcast_row(token, cones);
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    const PoolBlock& blk = blocks[b];
    const Tensor qe = ops::gather_rows(ops::matmul(t, blk.wq), seg);
    const Tensor ke = ops::gather_rows(ops::matmul(x, blk.wk), rows);
    const Tensor ve = ops::gather_rows(ops::matmul(x, blk.wv), rows);
    const Tensor alpha = ops::segment_softmax(ops::scale(ops::head_dot(qe, ke, heads), inv_sqrt), seg, cones);
    record(probe, std::string("pool.") + stream + "." + std::to_string(b), heads, seg, alpha, {});
    const Tensor pooled = ops::segment_sum(ops::head_scale(alpha, ve), seg, cones);
    const Tensor t1 = ops::layer_norm(ops::add(t, ops::matmul(pooled, blk.wo)));
    t = ops::layer_norm(ops::add(t1, linear(ops::relu(linear(t1, blk.w1, blk.b1)), blk.w2, blk.b2)));
  }
  return t;
}

std::pair<Hf, Hs> Model::pool(const WorkingBatch& batch, const Hf& hf, const Hs& hs, AttentionProbe* probe) const {
  if (batch.cone_members.empty()) throw Error(ErrorCode::kInvalidArgument, "pool: batch has no cones");
  return {Hf{pool_stream(pool_f_, pool_token_f_, hf.t, batch, probe, "f")},
          Hs{pool_stream(pool_s_, pool_token_s_, hs.t, batch, probe, "s")}};
}

BatchOutput Model::forward(const Aig& aig, const WorkingBatch& batch, AttentionMode mode,
                           AttentionProbe* probe) const {
  BatchOutput out;
  auto [hf0, hs0] = tokenize(aig, batch, mode, &out.stats, probe);
  auto [hf, hs] = transform(batch, hf0, hs0, mode, &out.stats, probe);
  auto [cf, cs] = pool(batch, hf, hs, probe);
  out.hf = hf.t;
  out.hs = hs.t;
  out.cone_hf = cf.t;
  out.cone_hs = cs.t;
  return out;
}

}  // namespace aigflow
