#include "run_config.hpp"

#include <charconv>

#include <json.hpp>

#include "aigflow/error.hpp"
#include "aigflow/random.hpp"

namespace aigflow::cli {

namespace {

[[noreturn]] void bad(const std::string& msg) { throw Error(ErrorCode::kInvalidArgument, msg); }

std::size_t parse_size(std::string_view s, const char* what) {
  std::size_t v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) bad(std::string("bad ") + what + ": '" + std::string(s) + "'");
  return v;
}

}  // namespace

void RunConfig::validate() const {
  if (k < 1) bad("k must be >= 1");
  if (delta < 1 || delta >= k) bad("delta must satisfy 1 <= delta < k (got k=" + std::to_string(k) +
                                   ", delta=" + std::to_string(delta) + ")");
  if (batch == 0) bad("batch must be >= 1");
  if (!(lr >= 0.0)) bad("lr must be >= 0");
  if (workers == 0) bad("workers must be >= 1");
  parse_sim(sim);
  model().validate();
}

ModelConfig RunConfig::model() const {
  ModelConfig m;
  m.d = dim;
  m.tx_depth = depth;
  m.heads = heads;
  m.pool_depth = pool_depth;
  m.seed = derive_seed(seed, {0x30de1});
  return m;
}

TrainConfig RunConfig::train() const {
  TrainConfig t;
  t.batch = batch;
  t.lr = lr;
  t.seed = derive_seed(seed, {0x7a1});
  t.balance = balance;
  t.pairs_per_batch = pairs;
  t.ged_node_limit = ged_limit;
  return t;
}

LabelConfig RunConfig::labels(std::size_t index) const {
  LabelConfig l;
  l.ged_node_limit = ged_limit;
  l.budget = parse_sim(sim);
  l.seed = derive_seed(seed, {0x1abe1, index});
  return l;
}

SimulationBudget parse_sim(const std::string& sim) {
  SimulationBudget b;
  if (sim == "auto") return b;
  if (sim == "exhaustive") {
    b.exhaustive_max_pis = 20;
    return b;
  }
  if (sim.rfind("random:", 0) == 0) {
    b.exhaustive_max_pis = 0;
    b.random_patterns = parse_size(std::string_view(sim).substr(7), "pattern count");
    if (b.random_patterns == 0) bad("random pattern count must be >= 1");
    return b;
  }
  bad("sim must be auto, exhaustive or random:N (got '" + sim + "')");
}

std::vector<std::pair<int, int>> parse_grid(const std::string& grid) {
  std::vector<std::pair<int, int>> out;
  std::string_view rest = grid;
  while (!rest.empty()) {
    const auto comma = rest.find(',');
    const auto item = rest.substr(0, comma);
    if (comma == rest.size() - 1) bad("grid has a trailing comma");
    const auto colon = item.find(':');
    if (colon == std::string_view::npos) bad("grid entries are k:delta (got '" + std::string(item) + "')");
    out.emplace_back(static_cast<int>(parse_size(item.substr(0, colon), "k")),
                     static_cast<int>(parse_size(item.substr(colon + 1), "delta")));
    rest = comma == std::string_view::npos ? std::string_view{} : rest.substr(comma + 1);
  }
  if (out.empty()) bad("empty grid");
  return out;
}

void apply_json(RunConfig& c, const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kParse, std::string("config: ") + e.what());
  }
  if (!j.is_object()) throw Error(ErrorCode::kParse, "config: top level must be an object");
  try {
    for (auto it = j.begin(); it != j.end(); ++it) {
      const auto& key = it.key();
      const auto& v = it.value();
      if (key == "k") c.k = v.get<int>();
      else if (key == "delta") c.delta = v.get<int>();
      else if (key == "batch") c.batch = v.get<std::size_t>();
      else if (key == "dim") c.dim = v.get<std::size_t>();
      else if (key == "depth") c.depth = v.get<std::size_t>();
      else if (key == "heads") c.heads = v.get<std::size_t>();
      else if (key == "pool_depth") c.pool_depth = v.get<std::size_t>();
      else if (key == "lr") c.lr = v.get<double>();
      else if (key == "epochs") c.epochs = v.get<std::size_t>();
      else if (key == "seed") c.seed = v.get<std::uint64_t>();
      else if (key == "sim") c.sim = v.get<std::string>();
      else if (key == "ged_limit") c.ged_limit = v.get<std::size_t>();
      else if (key == "workers") c.workers = v.get<std::size_t>();
      else if (key == "pairs") c.pairs = v.get<std::size_t>();
      else if (key == "balance") c.balance = v.get<bool>();
      else if (key == "out") c.out = v.get<std::string>();
      else if (key == "checkpoint_every") c.checkpoint_every = v.get<std::size_t>();
      else throw Error(ErrorCode::kParse, "config: unknown key '" + key + "'");
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kParse, std::string("config: ") + e.what());
  }
}

}  // namespace aigflow::cli
