#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <functional>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "aigflow/error.hpp"
#include "aigflow/random.hpp"
#include "run_config.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace aigflow;
using aigflow::cli::RunConfig;

namespace {

const std::string kData = AIGFLOW_TEST_DATA;

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected aigflow::Error");
  return ErrorCode::kUnsupported;
}

struct Run {
  int exit = -1;
  std::string out, err;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("aigflow_cli_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

/// Runs the built binary through the shell; `env` is a prefix such as "AIGFLOW_SEED=3".
Run run(const std::string& args, const std::string& env = "") {
  const auto dir = scratch("run");
  const std::string cmd = (env.empty() ? std::string("env -u AIGFLOW_SEED ") : "env " + env + " ") + "\"" AIGFLOW_CLI "\" " +
                          args + " > \"" + (dir / "out").string() + "\" 2> \"" + (dir / "err").string() + "\"";
  const int status = std::system(cmd.c_str());
  Run r;
  r.exit = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = slurp(dir / "out");
  r.err = slurp(dir / "err");
  return r;
}

}  // namespace

TEST_CASE("run config defaults validate and derive per-purpose seeds") {
  RunConfig c;
  CHECK_NOTHROW(c.validate());
  CHECK(c.k == 8);
  CHECK(c.delta == 6);
  CHECK(c.lr == doctest::Approx(1e-4));
  c.seed = 11;
  CHECK(c.model().seed == derive_seed(11, {0x30de1}));
  CHECK(c.train().seed == derive_seed(11, {0x7a1}));
  CHECK(c.labels(2).seed == derive_seed(11, {0x1abe1, 2}));
  CHECK(c.labels(2).seed != c.labels(3).seed);
  CHECK(c.model().d == 32);
  CHECK(c.model().tx_depth == 3);
}

TEST_CASE("validate rejects inconsistent settings") {
  auto with = [](auto mutate) {
    RunConfig c;
    mutate(c);
    return code_of([&] { c.validate(); });
  };
  CHECK(with([](RunConfig& c) { c.delta = 8; }) == ErrorCode::kInvalidArgument);
  CHECK(with([](RunConfig& c) { c.delta = 0; }) == ErrorCode::kInvalidArgument);
  CHECK(with([](RunConfig& c) { c.batch = 0; }) == ErrorCode::kInvalidArgument);
  CHECK(with([](RunConfig& c) { c.dim = 30; }) == ErrorCode::kInvalidArgument);
  CHECK(with([](RunConfig& c) { c.lr = -1.0; }) == ErrorCode::kInvalidArgument);
  CHECK(with([](RunConfig& c) { c.sim = "sometimes"; }) == ErrorCode::kInvalidArgument);
}

TEST_CASE("apply_json overrides present keys only") {
  RunConfig c;
  cli::apply_json(c, R"({"k": 10, "delta": 8, "lr": 0.01, "balance": false, "sim": "random:64"})");
  CHECK(c.k == 10);
  CHECK(c.delta == 8);
  CHECK(c.lr == doctest::Approx(0.01));
  CHECK_FALSE(c.balance);
  CHECK(c.sim == "random:64");
  CHECK(c.batch == 128);
  CHECK(c.dim == 32);

  CHECK(code_of([&] { cli::apply_json(c, R"({"kk": 3})"); }) == ErrorCode::kParse);
  CHECK(code_of([&] { cli::apply_json(c, R"({"k": "eight"})"); }) == ErrorCode::kParse);
  CHECK(code_of([&] { cli::apply_json(c, "[1, 2]"); }) == ErrorCode::kParse);
  CHECK(code_of([&] { cli::apply_json(c, "{"); }) == ErrorCode::kParse);
}

TEST_CASE("sim and grid strings") {
  const auto a = cli::parse_sim("auto");
  CHECK(a.exhaustive_max_pis == 12);
  CHECK(a.random_patterns == 4096);
  CHECK(cli::parse_sim("exhaustive").exhaustive_max_pis >= 12);
  const auto r = cli::parse_sim("random:100");
  CHECK(r.exhaustive_max_pis == 0);
  CHECK(r.random_patterns == 100);
  for (const char* bad : {"random:", "random:0", "random:12x", "rand:5", ""})
    CHECK(code_of([&] { cli::parse_sim(bad); }) == ErrorCode::kInvalidArgument);

  const auto g = cli::parse_grid("8:6,8:4,10:8");
  REQUIRE(g.size() == 3);
  CHECK(g[0] == std::pair{8, 6});
  CHECK(g[2] == std::pair{10, 8});
  for (const char* bad : {"", "8", "8:6,", "8:x", "8-6"})
    CHECK(code_of([&] { cli::parse_grid(bad); }) == ErrorCode::kInvalidArgument);
}

TEST_CASE("partition subcommand reports the sampled levels") {
  const auto r = run("partition --k 8 --delta 6 " + kData + "rand_large.aag");
  REQUIRE(r.exit == 0);
  const auto j = json::parse(r.out);
  const auto levels = j.at("levels").get<std::vector<int>>();
  REQUIRE(levels.size() >= 2);
  CHECK(levels[0] == 8);
  CHECK(levels[1] == 14);
  for (std::size_t i = 1; i < levels.size(); ++i) CHECK(levels[i] - levels[i - 1] == 6);
  CHECK(j.at("cone_count").get<std::size_t>() == j.at("cones").size());
  CHECK(j.at("fallback_count") == 0);
}

TEST_CASE("--out writes the plan and the coverage report") {
  const auto dir = scratch("partition_out");
  const auto r = run("partition --out " + dir.string() + " " + kData + "b02_profile.aag");
  REQUIRE(r.exit == 0);
  CHECK(r.out.empty());
  CHECK(fs::exists(dir / "partition.json"));
  CHECK(fs::exists(dir / "coverage.json"));
  CHECK(json::parse(slurp(dir / "coverage.json")).is_object());
}

TEST_CASE("contract violations exit 2 with a JSON error on stderr") {
  auto expect = [](const Run& r, const char* code) {
    CHECK(r.exit == 2);
    CHECK(r.out.empty());
    const auto j = json::parse(r.err);
    CHECK(j.at("error") == code);
    CHECK_FALSE(j.at("message").get<std::string>().empty());
  };
  expect(run("partition --k 4 --delta 4 " + kData + "b02_profile.aag"), "invalid_argument");
  expect(run("partition " + kData + "no_such_file.aag"), "io_error");
  expect(run("train " + kData + "b02_profile.aag"), "invalid_argument");
  expect(run("stats"), "invalid_argument");
  expect(run("frobnicate"), "usage");
  expect(run("sweep-kd --grid 8:6,4:4 " + kData + "b02_profile.aag"), "invalid_argument");
  expect(run("stats " + kData + "b02_profile.aag", "AIGFLOW_SEED=abc"), "invalid_argument");

  const auto dir = scratch("bad_config");
  std::ofstream(dir / "c.json") << R"({"epochs": 1, "colour": "red"})";
  expect(run("stats --config " + (dir / "c.json").string() + " " + kData + "b02_profile.aag"), "parse_error");
}

TEST_CASE("stats subcommand on the b02-sized circuit") {
  const auto r = run("stats " + kData + "b02_profile.aag");
  REQUIRE(r.exit == 0);
  const auto j = json::parse(r.out);
  CHECK(j.at("nodes") == 47);
  CHECK(j.at("edges") == 65);
  CHECK(j.at("pis") == 4);
  CHECK(j.at("max_level") == 9);
  CHECK(j.at("types").at("not") == 21);
}

TEST_CASE("seed precedence is flag, then config file, then environment") {
  const auto dir = scratch("seed");
  std::ofstream(dir / "seeded.json") << R"({"seed": 5})";
  std::ofstream(dir / "plain.json") << R"({"k": 8})";
  auto seed_of = [](const Run& r) {
    REQUIRE(r.exit == 0);
    return json::parse(r.out).at("seed").get<std::uint64_t>();
  };
  const std::string seeded = " --config " + (dir / "seeded.json").string();
  const std::string plain = " --config " + (dir / "plain.json").string();
  CHECK(seed_of(run("gradcheck --seed 9" + seeded, "AIGFLOW_SEED=3")) == 9);
  CHECK(seed_of(run("gradcheck" + seeded, "AIGFLOW_SEED=3")) == 5);
  CHECK(seed_of(run("gradcheck" + plain, "AIGFLOW_SEED=3")) == 3);
  CHECK(seed_of(run("gradcheck")) == 0);
}

TEST_CASE("gradcheck subcommand passes and lists every check") {
  const auto r = run("gradcheck --seed 7");
  REQUIRE(r.exit == 0);
  const auto j = json::parse(r.out);
  CHECK(j.at("pass") == true);
  CHECK(j.at("max_rel_err").get<double>() < 1e-4);
  bool has_end_to_end = false;
  for (const auto& c : j.at("checks")) {
    CHECK(c.at("rel_err").get<double>() < 1e-4);
    has_end_to_end |= c.at("name") == "block.end_to_end";
  }
  CHECK(has_end_to_end);
}

TEST_CASE("train writes reports and a checkpoint that eval can load") {
  const auto dir = scratch("train");
  const std::string model = " --dim 8 --heads 2 --depth 1 --batch 16 --seed 4";
  const auto r = run("train --epochs 2 --out " + dir.string() + model + " " + kData + "tree_and_d4.aag " + kData +
                     "b02_profile.aag");
  REQUIRE(r.exit == 0);
  for (const char* f : {"epochs.jsonl", "timing.jsonl", "model.json", "model.bin"}) CHECK(fs::exists(dir / f));

  std::istringstream lines(slurp(dir / "epochs.jsonl"));
  std::string line;
  std::size_t n = 0;
  while (std::getline(lines, line)) {
    const auto j = json::parse(line);
    CHECK(j.at("epoch") == n);
    CHECK_FALSE(j.contains("wall_ms"));
    ++n;
  }
  CHECK(n == 2);

  const auto e = run("eval --checkpoint " + (dir / "model.json").string() + model + " " + kData + "b02_profile.aag");
  REQUIRE(e.exit == 0);
  const auto j = json::parse(e.out);
  CHECK(j.contains("L_all"));
}
