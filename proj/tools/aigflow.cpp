// aigflow: command-line front end for partitioning, scheduling, labelling,
// training and evaluating AIG encoders.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "aigflow/aig.hpp"
#include "aigflow/bench.hpp"
#include "aigflow/checkpoint.hpp"
#include "aigflow/error.hpp"
#include "aigflow/gradcheck.hpp"
#include "aigflow/labels.hpp"
#include "aigflow/partition.hpp"
#include "aigflow/random.hpp"
#include "aigflow/serialize.hpp"
#include "aigflow/trainer.hpp"
#include "run_config.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace aigflow;
using aigflow::cli::RunConfig;

namespace {

// Flags as given on the command line; unset ones fall through to the config
// file, then to the defaults.
struct Flags {
  std::optional<std::string> config;
  std::optional<int> k, delta;
  std::optional<std::size_t> batch, dim, depth, heads, pool_depth, epochs, ged_limit, workers, pairs, ckpt_every;
  std::optional<double> lr;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> sim, out;
  bool no_balance = false;
  std::vector<std::string> files;
  std::vector<std::string> eval_files;
  std::optional<std::string> checkpoint;
  std::string grid = "8:6,8:4,10:8,6:4";
  std::vector<std::size_t> copies = {1, 2, 4};
};

void add_common(CLI::App* cmd, Flags& f) {
  cmd->add_option("--config", f.config, "JSON config file (flags take precedence)");
  cmd->add_option("--k", f.k, "cone depth bound (default 8)");
  cmd->add_option("--delta", f.delta, "level stride, < k (default 6)");
  cmd->add_option("--batch", f.batch, "cones per mini-batch (default 128)");
  cmd->add_option("--dim", f.dim, "embedding width (default 32)");
  cmd->add_option("--depth", f.depth, "transformer blocks (default 3)");
  cmd->add_option("--heads", f.heads, "attention heads (default 4)");
  cmd->add_option("--pool-depth", f.pool_depth, "pooling blocks (default 2)");
  cmd->add_option("--lr", f.lr, "Adam learning rate (default 1e-4)");
  cmd->add_option("--epochs", f.epochs, "training epochs (default 1)");
  cmd->add_option("--seed", f.seed, "master seed (fallback: AIGFLOW_SEED)");
  cmd->add_option("--sim", f.sim, "auto | exhaustive | random:N");
  cmd->add_option("--ged-limit", f.ged_limit, "GED node limit (default 10)");
  cmd->add_option("--workers", f.workers, "worker threads for eval (default 1)");
  cmd->add_option("--pairs", f.pairs, "pair samples per task and mini-batch (default 32)");
  cmd->add_option("--checkpoint-every", f.ckpt_every, "write a checkpoint every N epochs");
  cmd->add_flag("--no-balance", f.no_balance, "optimize the plain loss sum");
  cmd->add_option("--out", f.out, "output directory");
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

RunConfig resolve(const Flags& f) {
  RunConfig c;
  if (f.config) cli::apply_json(c, read_file(*f.config));
  bool seed_from_file = false;
  if (f.config) seed_from_file = json::parse(read_file(*f.config)).contains("seed");
  if (!seed_from_file)
    if (const char* env = std::getenv("AIGFLOW_SEED")) {
      try {
        c.seed = std::stoull(env);
      } catch (const std::exception&) {
        throw Error(ErrorCode::kInvalidArgument, std::string("AIGFLOW_SEED is not an integer: '") + env + "'");
      }
    }
  if (f.k) c.k = *f.k;
  if (f.delta) c.delta = *f.delta;
  if (f.batch) c.batch = *f.batch;
  if (f.dim) c.dim = *f.dim;
  if (f.depth) c.depth = *f.depth;
  if (f.heads) c.heads = *f.heads;
  if (f.pool_depth) c.pool_depth = *f.pool_depth;
  if (f.lr) c.lr = *f.lr;
  if (f.epochs) c.epochs = *f.epochs;
  if (f.seed) c.seed = *f.seed;
  if (f.sim) c.sim = *f.sim;
  if (f.ged_limit) c.ged_limit = *f.ged_limit;
  if (f.workers) c.workers = *f.workers;
  if (f.pairs) c.pairs = *f.pairs;
  if (f.ckpt_every) c.checkpoint_every = *f.ckpt_every;
  if (f.no_balance) c.balance = false;
  if (f.out) c.out = *f.out;
  c.validate();
  return c;
}

const std::string& single_file(const Flags& f) {
  if (f.files.size() != 1) throw Error(ErrorCode::kInvalidArgument, "expected exactly one .aag file");
  return f.files[0];
}

std::vector<std::string> need_files(const std::vector<std::string>& files) {
  if (files.empty()) throw Error(ErrorCode::kInvalidArgument, "expected at least one .aag file");
  return files;
}

/// Writes `text` to `<out>/<name>` when --out is set, else to stdout.
void emit(const RunConfig& c, const std::string& name, const std::string& text) {
  if (c.out.empty()) {
    std::cout << text << "\n";
    return;
  }
  fs::create_directories(c.out);
  std::ofstream o(fs::path(c.out) / name, std::ios::binary);
  if (!o) throw Error(ErrorCode::kIo, "cannot write '" + (fs::path(c.out) / name).string() + "'");
  o << text << "\n";
}

std::vector<CircuitData> load_corpus(const std::vector<std::string>& files, const RunConfig& c, int k, int delta,
                                     std::size_t index_base = 0) {
  std::vector<CircuitData> out;
  for (std::size_t i = 0; i < files.size(); ++i)
    out.push_back(prepare_circuit(fs::path(files[i]).stem().string(), read_aiger_file(files[i]), k, delta,
                                  c.labels(index_base + i)));
  return out;
}

Model load_model(const Flags& f, const RunConfig& c) {
  if (f.checkpoint) return load_checkpoint(*f.checkpoint);
  return Model(c.model());
}

int cmd_stats(const Flags& f) {
  const RunConfig c = resolve(f);
  json all = json::object();
  for (const auto& file : need_files(f.files))
    all[fs::path(file).filename().string()] = json::parse(stats_json(stats(read_aiger_file(file))));
  emit(c, "stats.json", f.files.size() == 1 ? all.begin()->dump(2) : all.dump(2));
  return 0;
}

int cmd_partition(const Flags& f) {
  const RunConfig c = resolve(f);
  const Aig aig = read_aiger_file(single_file(f));
  const PartitionPlan plan = partition(aig, c.k, c.delta);
  emit(c, "partition.json", plan_json(plan));
  if (!c.out.empty()) emit(c, "coverage.json", coverage_json(coverage_report(plan, aig)));
  return 0;
}

int cmd_schedule(const Flags& f) {
  const RunConfig c = resolve(f);
  const Aig aig = read_aiger_file(single_file(f));
  const PartitionPlan plan = partition(aig, c.k, c.delta);
  const Model model = load_model(f, c);
  const BatchPlan batches = build_batches(plan, c.batch, 0, BatchMode::kEval);
  const auto result = run_schedule(aig, plan, batches, [&](const WorkingBatch& wb) {
    return node_states(model.forward(aig, wb));
  });
  emit(c, "schedule.json", schedule_json(batches, result));
  return 0;
}

int cmd_labels(const Flags& f) {
  const RunConfig c = resolve(f);
  const Aig aig = read_aiger_file(single_file(f));
  const PartitionPlan plan = partition(aig, c.k, c.delta);
  emit(c, "labels.json", labels_json(generate_labels(aig, plan, c.labels(0))));
  return 0;
}

int cmd_train(const Flags& f) {
  const RunConfig c = resolve(f);
  if (c.out.empty()) throw Error(ErrorCode::kInvalidArgument, "train: --out DIR is required");
  fs::create_directories(c.out);
  const auto corpus = load_corpus(need_files(f.files), c, c.k, c.delta);
  Model model = load_model(f, c);
  Trainer trainer(model, c.train());
  std::ofstream reports(fs::path(c.out) / "epochs.jsonl", std::ios::binary);
  std::ofstream timing(fs::path(c.out) / "timing.jsonl", std::ios::binary);
  for (std::size_t e = 0; e < c.epochs; ++e) {
    const EpochReport r = trainer.train_epoch(corpus, e);
    reports << epoch_json(r) << "\n" << std::flush;
    timing << json{{"epoch", e}, {"wall_ms", r.wall_ms}}.dump() << "\n" << std::flush;
    if (c.checkpoint_every && (e + 1) % c.checkpoint_every == 0) {
      char name[32];
      std::snprintf(name, sizeof name, "model_e%04zu.json", e + 1);
      save_checkpoint(model, fs::path(c.out) / name);
    }
  }
  save_checkpoint(model, fs::path(c.out) / "model.json");
  if (!f.eval_files.empty()) {
    const auto held_out = load_corpus(f.eval_files, c, c.k, c.delta, f.files.size());
    emit(c, "eval.json", eval_json(evaluate(model, held_out, c.train(), c.workers)));
  }
  return 0;
}

int cmd_eval(const Flags& f) {
  const RunConfig c = resolve(f);
  const auto corpus = load_corpus(need_files(f.files), c, c.k, c.delta);
  const Model model = load_model(f, c);
  emit(c, "eval.json", eval_json(evaluate(model, corpus, c.train(), c.workers)));
  return 0;
}

int cmd_lec(const Flags& f) {
  const RunConfig c = resolve(f);
  const auto corpus = load_corpus(need_files(f.files), c, c.k, c.delta);
  const Model model = load_model(f, c);
  LecConfig lc;
  lc.batch = c.batch;
  lc.seed = derive_seed(c.seed, {0x1ec});
  emit(c, "lec.json", lec_json(lec_eval(model, corpus, lc)));
  return 0;
}

int cmd_bench(const Flags& f) {
  const RunConfig c = resolve(f);
  const Aig aig = read_aiger_file(single_file(f));
  const Model model = load_model(f, c);
  emit(c, "bench.json", scaling_json(bench_mem_runtime(aig, model, c.k, c.delta, c.batch, f.copies)));
  return 0;
}

int cmd_gradcheck(const Flags& f) {
  const RunConfig c = resolve(f);
  constexpr double kTolerance = 1e-4;
  const auto entries = gradcheck_suite(c.seed);
  json checks = json::array();
  double worst = 0.0;
  for (const auto& e : entries) {
    checks.push_back({{"name", e.name}, {"rel_err", e.rel_err}, {"elements", e.elements}, {"kink_margin", e.kink_margin}});
    worst = std::max(worst, e.rel_err);
  }
  emit(c, "gradcheck.json",
       json{{"seed", c.seed}, {"tolerance", kTolerance}, {"max_rel_err", worst}, {"pass", worst < kTolerance},
            {"checks", checks}}
           .dump(2));
  return worst < kTolerance ? 0 : 1;
}

int cmd_sweep(const Flags& f) {
  const RunConfig c = resolve(f);
  const auto files = need_files(f.files);
  const auto grid = cli::parse_grid(f.grid);
  std::vector<RunConfig> configs;
  for (auto [k, delta] : grid) {
    RunConfig g = c;
    g.k = k;
    g.delta = delta;
    g.validate();
    configs.push_back(g);
  }
  json rows = json::array();
  for (const RunConfig& g : configs) {
    const int k = g.k, delta = g.delta;
    const auto corpus = load_corpus(files, g, k, delta);
    Model model(g.model());
    Trainer trainer(model, g.train());
    for (std::size_t e = 0; e < g.epochs; ++e) trainer.train_epoch(corpus, e);
    const auto held_out = f.eval_files.empty() ? corpus : load_corpus(f.eval_files, g, k, delta, files.size());
    const EpochReport r = evaluate(model, held_out, g.train(), g.workers);
    rows.push_back({{"k", k}, {"delta", delta}, {"mem", r.peak_online_nodes}, {"L_func", r.l_func},
                    {"L_stru", r.l_stru}, {"L_all", r.l_all}});
  }
  emit(c, "sweep.json", json{{"columns", {"k", "delta", "mem", "L_func", "L_stru", "L_all"}}, {"rows", rows}}.dump(2));
  return 0;
}

void print_error(const std::string& code, const std::string& message) {
  std::cerr << json{{"error", code}, {"message", message}}.dump() << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"aigflow: cone-partitioned AIG encoder pipelines"};
  app.require_subcommand(1);
  Flags f;

  struct Command {
    const char* name;
    const char* help;
    int (*run)(const Flags&);
  };
  const Command commands[] = {
      {"stats", "graph statistics", cmd_stats},
      {"partition", "cone partition plan", cmd_partition},
      {"schedule", "level-ordered update trace", cmd_schedule},
      {"labels", "simulation-derived supervision", cmd_labels},
      {"train", "multi-task training", cmd_train},
      {"eval", "held-out metrics", cmd_eval},
      {"lec", "equivalence ranking AP", cmd_lec},
      {"bench", "memory and runtime under duplication", cmd_bench},
      {"gradcheck", "finite-difference gradient checks", cmd_gradcheck},
      {"sweep-kd", "train/eval over a (k, delta) grid", cmd_sweep},
  };
  std::vector<std::pair<CLI::App*, const Command*>> subs;
  for (const auto& cmd : commands) {
    auto* sub = app.add_subcommand(cmd.name, cmd.help);
    add_common(sub, f);
    if (std::string(cmd.name) != "gradcheck") sub->add_option("files", f.files, ".aag inputs");
    if (std::string(cmd.name) == "train" || std::string(cmd.name) == "sweep-kd")
      sub->add_option("--eval-files", f.eval_files, "held-out .aag inputs");
    if (std::string(cmd.name) == "eval" || std::string(cmd.name) == "lec" || std::string(cmd.name) == "bench" ||
        std::string(cmd.name) == "schedule" || std::string(cmd.name) == "train")
      sub->add_option("--checkpoint", f.checkpoint, "model manifest to load");
    if (std::string(cmd.name) == "sweep-kd") sub->add_option("--grid", f.grid, "k:delta list");
    if (std::string(cmd.name) == "bench") sub->add_option("--copies", f.copies, "duplication factors");
    subs.emplace_back(sub, &cmd);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    print_error("usage", e.what());
    return 2;
  }

  try {
    for (auto [sub, cmd] : subs)
      if (sub->parsed()) return cmd->run(f);
  } catch (const Error& e) {
    print_error(std::string(to_string(e.code())), e.what());
    return 2;
  } catch (const std::exception& e) {
    print_error("internal", e.what());
    return 3;
  }
  return 0;
}
