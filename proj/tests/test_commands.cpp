#include <filesystem>
#include <fstream>
#include <sstream>

#include <catch_amalgamated.hpp>

#include "muxncs/commands.hpp"

using namespace muxncs;
using namespace muxncs::cli;
namespace fs = std::filesystem;

namespace {

const fs::path kData = MUXNCS_DATA_DIR;

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("muxncs_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

CommonOptions paper(const fs::path& out) {
  CommonOptions opts;
  opts.config = kData / "paper_system.json";
  opts.out_dir = out;
  return opts;
}

struct Captured {
  std::ostringstream out, err;
  Io io() { return {out, err}; }
};

}  // namespace

TEST_CASE("analyze certifies the paper system") {
  const auto dir = scratch("analyze");
  Captured c;
  REQUIRE(cmd_analyze(paper(dir), c.io()) == kOk);
  const auto doc = read_json_file(dir / "certificate.json");
  REQUIRE(doc["status"] == "certified");
  const double eps = doc["epsilon_bar"].get<double>();
  REQUIRE(eps > 0.0);
  REQUIRE(eps <= 0.45);
  REQUIRE(doc["delta"].get<double>() == 0.8);
  const auto cert = cli::detail::certificate_from_json(doc);
  REQUIRE(verify_certificate(cert, build_mode_set(plant_from_json(read_json_file(kData / "paper_system.json")))));

  // A singleton sweep reproduces the same value.
  Captured s;
  REQUIRE(cmd_sweep(paper(dir), {0.8}, s.io()) == kOk);
  const auto csv = slurp(dir / "eps_delta.csv");
  REQUIRE(csv.find("\n0.8," + format_double(eps) + ",") != std::string::npos);
}

TEST_CASE("analyze exit codes") {
  const auto dir = scratch("analyze_codes");
  Captured explosive;
  auto opts = paper(dir);
  opts.config = kData / "explosive_system.json";
  REQUIRE(cmd_analyze(opts, explosive.io()) == kInfeasible);

  Captured missing;
  opts.config = dir / "no_such_plant.json";
  REQUIRE(cmd_analyze(opts, missing.io()) == kNumerical);
  REQUIRE(missing.err.str().find("no_such_plant.json") != std::string::npos);

  Captured bad_delta;
  opts = paper(dir);
  opts.delta = 1.5;
  REQUIRE(cmd_analyze(opts, bad_delta.io()) == kUsage);
}

TEST_CASE("sweep rejects out-of-range grid values") {
  const auto dir = scratch("sweep_bad");
  Captured c;
  REQUIRE(cmd_sweep(paper(dir), {0.0, 0.5}, c.io()) == kUsage);
  REQUIRE_FALSE(fs::exists(dir / "eps_delta.csv"));
}

TEST_CASE("simulate") {
  const auto dir = scratch("simulate");
  SimulateOptions sim;
  sim.policy = "no-such-policy";
  Captured unknown;
  REQUIRE(cmd_simulate(paper(dir), sim, unknown.io()) == kUsage);
  REQUIRE(unknown.err.str().find("round-robin") != std::string::npos);

  sim.policy = "round-robin";
  sim.runs = 100;
  Captured a, b;
  auto opts = paper(dir / "a");
  opts.horizon = 60;
  REQUIRE(cmd_simulate(opts, sim, a.io()) == kOk);
  opts.out_dir = dir / "b";
  REQUIRE(cmd_simulate(opts, sim, b.io()) == kOk);
  REQUIRE(slurp(dir / "a" / "trace.csv") == slurp(dir / "b" / "trace.csv"));
  REQUIRE(slurp(dir / "a" / "decay.csv") == slurp(dir / "b" / "decay.csv"));
  REQUIRE(a.out.str().find("xi=") != std::string::npos);
}

TEST_CASE("silence from the origin gives an all-zero trace") {
  const auto dir = scratch("simulate_zero");
  auto doc = read_json_file(kData / "paper_system.json");
  doc["x0"] = {0.0, 0.0};
  doc["horizon"] = 30;
  std::ofstream(dir / "zero.json") << doc.dump();
  CommonOptions opts;
  opts.config = dir / "zero.json";
  opts.out_dir = dir;
  SimulateOptions sim;
  sim.policy = "always:0";
  sim.runs = 100;
  Captured c;
  REQUIRE(cmd_simulate(opts, sim, c.io()) == kOk);
  std::istringstream trace(slurp(dir / "trace.csv"));
  std::string line;
  std::getline(trace, line);
  REQUIRE(line == "k,x1,x2,xhat1,xhat2,uhat1,sigma,gamma,mode,cost,reward");
  int rows = 0;
  while (std::getline(trace, line)) {
    ++rows;
    const auto first = line.find(',');
    const auto cols = line.substr(first + 1);
    REQUIRE(cols.rfind("0,0,0,0,0,0,", 0) == 0);
    REQUIRE(cols.substr(cols.size() - 4) == ",0,0");
  }
  REQUIRE(rows == 30);
}

TEST_CASE("train enforces the certification gate") {
  const auto dir = scratch("train_gate");
  TrainOptions t;
  t.train.episodes = 0;
  Captured none;
  REQUIRE(cmd_train(paper(dir), t, none.io()) == kUsage);
  REQUIRE(none.err.str().find("--uncertified") != std::string::npos);

  t.epsilon = 0.2;
  Captured no_override;
  REQUIRE(cmd_train(paper(dir), t, no_override.io()) == kUsage);

  t.uncertified = true;
  t.train.hidden = {8, 4};
  Captured ok;
  REQUIRE(cmd_train(paper(dir), t, ok.io()) == kOk);
  REQUIRE(slurp(dir / "reward_curve.csv") == "episode,total_reward,moving_avg_100\n");
  const auto net = load_weights(read_json_file(dir / "weights.json"));
  REQUIRE(net.arch() == std::vector<int>{2, 8, 4, 3});
}

TEST_CASE("train uses a matching certificate and rejects a mismatched one") {
  const auto dir = scratch("train_cert");
  Captured a;
  REQUIRE(cmd_analyze(paper(dir), a.io()) == kOk);
  TrainOptions t;
  t.train.episodes = 1;
  t.train.hidden = {8, 4};
  auto opts = paper(dir);
  opts.horizon = 20;
  Captured ok;
  REQUIRE(cmd_train(opts, t, ok.io()) == kOk);
  const auto meta = read_json_file(dir / "weights.json")["meta"];
  REQUIRE(meta["certified"] == true);

  opts.delta = 0.7;
  Captured mismatch;
  REQUIRE(cmd_train(opts, t, mismatch.io()) == kUsage);
  REQUIRE(mismatch.err.str().find("delta") != std::string::npos);
}

TEST_CASE("compare") {
  const auto dir = scratch("compare");
  Captured one;
  REQUIRE(cmd_compare(paper(dir), {"random"}, 10, one.io()) == kUsage);
  Captured unknown;
  REQUIRE(cmd_compare(paper(dir), {"random", "bogus"}, 10, unknown.io()) == kUsage);
  Captured ok;
  std::vector<CompareRow> rows;
  REQUIRE(cmd_compare(paper(dir), {"round-robin", "random", "always:-1"}, 20, ok.io(), &rows) == kOk);
  REQUIRE(rows.size() == 3);
  const auto csv = slurp(dir / "compare.csv");
  REQUIRE(csv.rfind("policy,avg_reward,stderr,episodes\nround-robin,", 0) == 0);
  Captured missing;
  REQUIRE(cmd_compare(paper(dir), {"random", "dqn:" + (dir / "none.json").string()}, 10, missing.io()) == kNumerical);
}
