#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "muxncs/commands.hpp"

namespace {

using namespace muxncs;
using namespace muxncs::cli;

void add_common(CLI::App* cmd, CommonOptions& opts) {
  cmd->add_option("-c,--config", opts.config, "JSON run configuration (plant, delta, cost, horizon, seed)")->required();
  cmd->add_option("-o,--out", opts.out_dir, "output directory")->capture_default_str();
  cmd->add_option("--delta", opts.delta, "packet success probability, overrides the config");
  cmd->add_option("--seed", opts.seed, "master seed, overrides the config");
  cmd->add_option("--horizon", opts.horizon, "steps per episode, overrides the config");
  cmd->add_option("--tolerance", opts.tolerance, "bisection tolerance on epsilon")->capture_default_str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Certified epsilon-greedy scheduling for multiplexed networked control"};
  app.require_subcommand(1);

  CommonOptions opts;

  auto* analyze = app.add_subcommand("analyze", "certify mean-square stability and find epsilon_bar");
  add_common(analyze, opts);

  std::vector<double> grid;
  int points = 10;
  auto* sweep = app.add_subcommand("sweep", "epsilon_bar over a grid of delta values");
  add_common(sweep, opts);
  sweep->add_option("--grid", grid, "explicit delta values")->delimiter(',');
  sweep->add_option("--points", points, "evenly spaced delta values on [0.1, 1]")->capture_default_str();

  SimulateOptions sim;
  auto* simulate_cmd = app.add_subcommand("simulate", "roll out a policy and estimate the second-moment decay");
  add_common(simulate_cmd, opts);
  simulate_cmd->add_option("-p,--policy", sim.policy, "egreedy, round-robin, round-robin3, random, always:+1|0|-1, dqn:<file>")
      ->capture_default_str();
  simulate_cmd->add_option("--exploit", sim.exploiter, "exploiting policy used by egreedy")->capture_default_str();
  simulate_cmd->add_option("--epsilon", sim.epsilon, "exploration rate for egreedy (default: config, then epsilon_bar)");
  simulate_cmd->add_option("--runs", sim.runs, "Monte-Carlo runs")->capture_default_str();

  TrainOptions topts;
  std::string optimizer = "adam";
  std::string input = "x";
  auto* train_cmd = app.add_subcommand("train", "train the DQN scheduler");
  add_common(train_cmd, opts);
  train_cmd->add_option("--certificate", topts.certificate, "certificate.json from analyze (default: <out>/certificate.json)");
  train_cmd->add_option("--epsilon", topts.epsilon, "exploration rate; needs --uncertified unless it matches the certificate");
  train_cmd->add_flag("--uncertified", topts.uncertified, "allow an exploration rate without a stability certificate");
  train_cmd->add_option("--episodes", topts.train.episodes)->capture_default_str();
  train_cmd->add_option("--batch", topts.train.batch_size)->capture_default_str();
  train_cmd->add_option("--lr", topts.train.learning_rate)->capture_default_str();
  train_cmd->add_option("--replay", topts.train.replay_capacity)->capture_default_str();
  train_cmd->add_option("--sync", topts.train.target_sync_period, "steps between target-network syncs")->capture_default_str();
  train_cmd->add_option("--hidden", topts.train.hidden, "hidden layer widths")->delimiter(',');
  train_cmd->add_option("--optimizer", optimizer)->check(CLI::IsMember({"sgd", "adam"}))->capture_default_str();
  train_cmd->add_option("--input", input, "network input: x (plant state) or zeta (augmented state)")
      ->check(CLI::IsMember({"x", "zeta"}))
      ->capture_default_str();

  std::vector<std::string> policies = {"round-robin", "random"};
  std::size_t episodes = 500;
  auto* compare = app.add_subcommand("compare", "paired average-reward comparison of policies");
  add_common(compare, opts);
  compare->add_option("-p,--policies", policies, "policy names")->delimiter(',')->capture_default_str();
  compare->add_option("--episodes", episodes)->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kOk : kUsage;
  }

  if (*analyze) return cmd_analyze(opts);
  if (*sweep) {
    if (grid.empty()) {
      try {
        grid = linear_delta_grid(points);
      } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kUsage;
      }
    }
    return cmd_sweep(opts, grid);
  }
  if (*simulate_cmd) return cmd_simulate(opts, sim);
  if (*train_cmd) {
    topts.train.optimizer = optimizer == "sgd" ? OptimizerKind::Sgd : OptimizerKind::Adam;
    topts.train.input = input == "zeta" ? InputMode::AugmentedState : InputMode::PlantState;
    return cmd_train(opts, topts);
  }
  if (*compare) return cmd_compare(opts, policies, episodes);
  return kUsage;
}
