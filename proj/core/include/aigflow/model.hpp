#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "aigflow/aig.hpp"
#include "aigflow/params.hpp"
#include "aigflow/partition.hpp"
#include "aigflow/scheduler.hpp"
#include "aigflow/tensor.hpp"

namespace aigflow {

struct ModelConfig {
  std::size_t d = 32;
  std::size_t tokenizer_rounds = 1;
  std::size_t tx_depth = 3;
  std::size_t heads = 4;
  std::size_t pool_depth = 2;
  double leaky_slope = 0.2;
  std::uint64_t seed = 0;

  /// Throws Error(kInvalidArgument) unless d % heads == 0 and all counts >= 1.
  void validate() const;
  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

enum class Stream { kFunctional, kStructural };
const char* to_string(Stream s) noexcept;

/// Functional-stream rows.
struct Hf {
  Tensor t;
};
/// Structural-stream rows.
struct Hs {
  Tensor t;
};

enum class Task { kProb, kGateTt, kCon, kGraphTt, kGraphTtPair, kGed, kSize, kDepth, kIn };
inline constexpr std::size_t kTaskCount = 9;
const char* to_string(Task t) noexcept;
Stream task_stream(Task t) noexcept;

enum class HeadOutput { kProbability, kCount };

/// Three-layer perceptron head (in -> d -> d -> out).
class MlpHead {
 public:
  MlpHead() = default;
  /// Throws Error(kInvalidArgument) when `input` is not the stream `task` reads.
  MlpHead(ParamRegistry& params, Task task, Stream input, std::size_t in_width, std::size_t hidden, std::size_t out,
          HeadOutput kind, std::uint64_t seed);

  Task task() const noexcept { return task_; }
  Tensor operator()(const Tensor& x) const;
  /// Last layer weights and bias; used by tests that zero them.
  Tensor last_weight() const { return w_[2]; }
  Tensor last_bias() const { return b_[2]; }

 private:
  Task task_ = Task::kProb;
  HeadOutput kind_ = HeadOutput::kProbability;
  std::array<Tensor, 3> w_, b_;
};

enum class AttentionMode { kGeneral, kFastDegree1 };

/// Records attention weights so callers can check normalization.
struct AttentionProbe {
  struct Record {
    std::string site;                  // e.g. "tx.f.0", "tok.s", "pool.f.1"
    std::size_t heads = 1;
    std::vector<std::uint32_t> segment;  // destination (or cone) per edge
    std::vector<double> weights;         // edges x heads
  };
  std::vector<Record> records;
};

struct ForwardStats {
  std::size_t tokenizer_skips = 0;    // in-degree-1 tokenizer destinations aggregated without softmax
  std::size_t transformer_skips = 0;  // augmented in-degree-1 destinations per block and stream
  std::size_t augmented_edges = 0;
};

struct BatchOutput {
  Tensor hf;       // one row per local node
  Tensor hs;
  Tensor cone_hf;  // one row per cone of the batch
  Tensor cone_hs;
  ForwardStats stats;
};

class Model {
 public:
  explicit Model(ModelConfig config);

  const ModelConfig& config() const noexcept { return config_; }
  ParamRegistry& params() noexcept { return params_; }
  const ParamRegistry& params() const noexcept { return params_; }

  /// Log-scaled level and fan-out encoding for the given nodes, one row each.
  Tensor structural_encoding(const Aig& aig, std::span<const NodeId> nodes) const;

  /// Level-synchronous tokenizer over the working graph; frozen rows are
  /// their pulled states.
  std::pair<Hf, Hs> tokenize(const Aig& aig, const WorkingBatch& batch, AttentionMode mode,
                             ForwardStats* stats = nullptr, AttentionProbe* probe = nullptr) const;

  /// Sparse transformer over the augmented edges; frozen rows stay fixed.
  std::pair<Hf, Hs> transform(const WorkingBatch& batch, const Hf& hf, const Hs& hs, AttentionMode mode,
                              ForwardStats* stats = nullptr, AttentionProbe* probe = nullptr) const;

  /// Pooled cone states, one row per cone of the batch.
  std::pair<Hf, Hs> pool(const WorkingBatch& batch, const Hf& hf, const Hs& hs, AttentionProbe* probe = nullptr) const;

  BatchOutput forward(const Aig& aig, const WorkingBatch& batch, AttentionMode mode = AttentionMode::kFastDegree1,
                      AttentionProbe* probe = nullptr) const;

  Tensor prob(const Hf& x) const { return prob_(x.t); }
  Tensor gate_tt(const Hf& a, const Hf& b) const;
  Tensor con(const Hs& a, const Hs& b) const;
  Tensor graph_tt(const Hf& s) const { return tt_(s.t); }
  Tensor graph_tt_pair(const Hf& a, const Hf& b) const;
  Tensor ged(const Hs& a, const Hs& b) const;
  Tensor size(const Hs& s) const { return size_(s.t); }
  Tensor depth(const Hs& s) const { return depth_(s.t); }
  Tensor in(const Hs& node, const Hs& cone) const;

  /// Final output projections of the last transformer block (hf, hs).
  std::vector<Tensor> balancer_tap() const;

  MlpHead& head(Task t);

 private:
  struct Mlp2 {
    Tensor w1, b1, w2, b2;
  };
  struct Block {
    Tensor wq, wk, wv, wo, w1, b1, w2, b2;
  };
  struct PoolBlock {
    Tensor wq, wk, wv, wo, w1, b1, w2, b2;
  };

  Mlp2 add_mlp2(const std::string& name, std::size_t in, std::size_t hidden, std::size_t out, std::uint64_t tag);
  Block add_block(const std::string& name, std::uint64_t tag);
  Tensor attend(const Block& blk, const Tensor& x, const WorkingBatch& batch, AttentionMode mode, ForwardStats* stats,
                AttentionProbe* probe, const std::string& site) const;
  Tensor refine_stream(const std::vector<Block>& blocks, const Tensor& x, const WorkingBatch& batch, const Tensor& fixed,
                       std::span<const std::uint32_t> reset_index, AttentionMode mode, ForwardStats* stats,
                       AttentionProbe* probe, const char* stream) const;
  Tensor pool_stream(const std::vector<PoolBlock>& blocks, const Tensor& token, const Tensor& x,
                     const WorkingBatch& batch, AttentionProbe* probe, const char* stream) const;
  Tensor apply_mlp2(const Mlp2& m, const Tensor& x) const;

  ModelConfig config_;
  ParamRegistry params_;

  // structural encoding
  Tensor se_w_[3], se_b_[3];
  // tokenizer
  Tensor pi_hf_, type_query_, tok_wk_f_, tok_wq_s_, tok_wk_s_;
  Mlp2 upd_and_, upd_not_, upd_s_;
  std::vector<Mlp2> round_f_, round_s_;  // extra tokenizer rounds
  // transformer
  std::vector<Block> tx_f_, tx_s_;
  // pooling
  Tensor pool_token_f_, pool_token_s_;
  std::vector<PoolBlock> pool_f_, pool_s_;
  // heads
  MlpHead prob_, gate_tt_, con_, tt_, graph_tt_, ged_, size_, depth_, in_;
};

}  // namespace aigflow
