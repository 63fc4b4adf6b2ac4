#pragma once

// Implementations behind the muxncs command-line tool. Each command returns a
// process exit code: 0 success, 1 usage/validation, 2 infeasible,
// 3 numerical/solver failure (or unreadable config), 4 training failure.

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "muxncs/config.hpp"
#include "muxncs/error.hpp"
#include "muxncs/policy.hpp"
#include "muxncs/qnetwork.hpp"
#include "muxncs/rl.hpp"
#include "muxncs/sim.hpp"
#include "muxncs/stability.hpp"

namespace muxncs::cli {

enum ExitCode : int { kOk = 0, kUsage = 1, kInfeasible = 2, kNumerical = 3, kTrainingFailed = 4 };

/// Options shared by every command. Unset optionals fall back to the config file.
struct CommonOptions {
  std::filesystem::path config;
  std::filesystem::path out_dir = ".";
  std::optional<double> delta;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> horizon;
  double tolerance = 1e-3;
};

struct Io {
  std::ostream& out = std::cout;
  std::ostream& err = std::cerr;
};

inline const std::vector<std::string>& policy_names() {
  static const std::vector<std::string> names = {"egreedy",   "round-robin", "round-robin3", "random",
                                                 "always:+1", "always:0",    "always:-1",    "dqn:<weights-file>"};
  return names;
}

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

inline RunConfig load_config(const CommonOptions& opts) {
  if (opts.config.empty()) throw UsageError("--config is required");
  if (!std::filesystem::exists(opts.config)) throw ConfigError("plant/config file not found: " + opts.config.string());
  RunConfig cfg = run_config_from_json(read_json_file(opts.config));
  if (opts.delta) cfg.delta = *opts.delta;
  if (opts.seed) cfg.seed = *opts.seed;
  if (opts.horizon) cfg.horizon = *opts.horizon;
  cfg.network().validate();
  return cfg;
}

inline void ensure_dir(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw ConfigError("cannot create output directory " + dir.string() + ": " + ec.message());
}

inline void write_text(const std::filesystem::path& path, const std::string& body) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw ConfigError("cannot write " + path.string());
  os << body;
}

inline std::string timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
  return buf;
}

/// Runs `body`, mapping exceptions onto the exit-code contract.
template <typename Body>
int guarded(Io io, Body&& body) {
  try {
    return body();
  } catch (const UsageError& e) {
    io.err << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const ParseError& e) {
    io.err << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const DomainError& e) {
    io.err << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const nlohmann::json::exception& e) {
    io.err << "error: malformed configuration: " << e.what() << '\n';
    return kUsage;
  } catch (const NumericalError& e) {
    io.err << "numerical failure: " << e.what() << '\n';
    return kNumerical;
  } catch (const ConfigError& e) {
    io.err << "error: " << e.what() << '\n';
    return kNumerical;
  }
}

inline nlohmann::json certificate_json(const EpsilonSearch& search, double tolerance) {
  nlohmann::json doc;
  doc["delta"] = search.delta;
  doc["tolerance"] = tolerance;
  if (search.found()) {
    doc["status"] = "certified";
    doc["epsilon_bar"] = *search.epsilon_bar;
    doc["V"] = matrix_to_json(search.certificate->v);
    doc["margins"] = search.certificate->margins;
  } else {
    doc["status"] = "no_feasible_epsilon";
    doc["epsilon_bar"] = nullptr;
    doc["margins_at_epsilon_one"] = search.margins_at_one;
  }
  nlohmann::json scan = nlohmann::json::array();
  for (const auto& [eps, ok] : search.prescan) scan.push_back({{"epsilon", eps}, {"feasible", ok}});
  doc["prescan"] = std::move(scan);
  return doc;
}

inline StabilityCertificate certificate_from_json(const nlohmann::json& doc) {
  if (!doc.contains("status") || doc["status"] != "certified") throw ParseError("certificate: status is not \"certified\"");
  StabilityCertificate cert;
  cert.delta = doc.at("delta").get<double>();
  cert.epsilon = doc.at("epsilon_bar").get<double>();
  cert.v = matrix_from_json(doc.at("V"), "certificate.V");
  const auto margins = doc.at("margins").get<std::vector<double>>();
  if (margins.size() != 3) throw ParseError("certificate.margins: expected 3 entries");
  for (std::size_t i = 0; i < 3; ++i) cert.margins[i] = margins[i];
  return cert;
}

/// A trained network loaded from disk plus the exploration rate and input mode it was trained with.
struct LoadedNetwork {
  std::shared_ptr<const QNetwork> net;
  InputMode input = InputMode::PlantState;
  double epsilon = 0.0;
};

inline LoadedNetwork load_network(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw ConfigError("weights file not found: " + path.string());
  const auto doc = read_json_file(path);
  LoadedNetwork loaded;
  loaded.net = std::make_shared<const QNetwork>(load_weights(doc));
  if (doc.contains("meta")) {
    const auto& meta = doc["meta"];
    if (meta.contains("input") && meta["input"] == "zeta") loaded.input = InputMode::AugmentedState;
    if (meta.contains("epsilon") && meta["epsilon"].is_number()) loaded.epsilon = meta["epsilon"].get<double>();
  }
  return loaded;
}

inline PolicyPtr make_simple_policy(const std::string& name) {
  if (name == "round-robin") return std::make_unique<RoundRobinPolicy>(false);
  if (name == "round-robin3") return std::make_unique<RoundRobinPolicy>(true);
  if (name == "random") return std::make_unique<UniformRandomPolicy>();
  if (name == "always:+1" || name == "always:1") return std::make_unique<AlwaysPolicy>(Switch::Control);
  if (name == "always:0") return std::make_unique<AlwaysPolicy>(Switch::Silent);
  if (name == "always:-1") return std::make_unique<AlwaysPolicy>(Switch::Observe);
  return nullptr;
}

/// "dqn:<file>" runs the trained network under epsilon-greedy exploration at the rate stored with
/// the weights; "dqn-greedy:<file>" runs it without exploration.
inline PolicyPtr make_network_policy(const std::string& name) {
  const bool greedy_only = name.rfind("dqn-greedy:", 0) == 0;
  const std::string path = name.substr(name.find(':') + 1);
  if (path.empty()) throw UsageError("policy '" + name + "' needs a weights file");
  auto loaded = load_network(path);
  auto greedy = std::make_unique<QNetworkGreedyPolicy>(loaded.net, loaded.input);
  if (greedy_only) return greedy;
  return std::make_unique<EpsilonGreedyPolicy>(loaded.epsilon, std::move(greedy));
}

inline std::string unknown_policy_message(const std::string& name) {
  std::ostringstream os;
  os << "unknown policy '" << name << "'; valid names:";
  for (const auto& n : policy_names()) os << ' ' << n;
  os << " dqn-greedy:<weights-file>";
  return os.str();
}

inline std::string fmt(double v) { return format_double(v); }

}  // namespace detail

// ---------------------------------------------------------------- analyze

inline int cmd_analyze(const CommonOptions& opts, Io io = {}) {
  return detail::guarded(io, [&] {
    const RunConfig cfg = detail::load_config(opts);
    const ModeSet modes = build_mode_set(cfg.plant);
    if (cfg.plant.closed_loop_spectral_radius() >= 1.0) {
      io.err << "warning: K does not stabilize the unnetworked loop (rho(A+BK) = "
             << detail::fmt(cfg.plant.closed_loop_spectral_radius()) << ")\n";
    }
    SearchOptions search_opts;
    search_opts.tolerance = opts.tolerance;
    const EpsilonSearch search = find_epsilon_bar(cfg.delta, modes, search_opts);
    detail::ensure_dir(opts.out_dir);
    detail::write_text(opts.out_dir / "certificate.json", detail::certificate_json(search, opts.tolerance).dump(2) + "\n");
    if (!search.found()) {
      io.out << "delta=" << detail::fmt(cfg.delta) << " no feasible epsilon in [0, 1]\n";
      return static_cast<int>(kInfeasible);
    }
    io.out << "delta=" << detail::fmt(cfg.delta) << " epsilon_bar=" << detail::fmt(*search.epsilon_bar)
           << " margins=" << detail::fmt(search.certificate->margins[0]) << ',' << detail::fmt(search.certificate->margins[1])
           << ',' << detail::fmt(search.certificate->margins[2]) << '\n';
    return static_cast<int>(kOk);
  });
}

// ---------------------------------------------------------------- sweep

/// Evenly spaced grid of `points` values on [0.1, 1.0].
inline std::vector<double> linear_delta_grid(int points) {
  if (points < 1) throw UsageError("--points must be positive");
  if (points == 1) return {1.0};
  std::vector<double> grid;
  for (int i = 0; i < points; ++i) grid.push_back(0.1 + 0.9 * static_cast<double>(i) / static_cast<double>(points - 1));
  return grid;
}

inline int cmd_sweep(const CommonOptions& opts, std::vector<double> grid, Io io = {}) {
  return detail::guarded(io, [&] {
    const RunConfig cfg = detail::load_config(opts);
    if (grid.empty()) grid = linear_delta_grid(10);
    for (double d : grid) {
      if (!(d > 0.0 && d <= 1.0)) throw UsageError("delta grid values must lie in (0, 1], got " + detail::fmt(d));
    }
    const ModeSet modes = build_mode_set(cfg.plant);
    SearchOptions search_opts;
    search_opts.tolerance = opts.tolerance;
    const auto rows = sweep_delta(grid, modes, search_opts);
    detail::ensure_dir(opts.out_dir);
    std::ostringstream csv;
    write_sweep_csv(csv, rows);
    detail::write_text(opts.out_dir / "eps_delta.csv", csv.str());
    io.out << csv.str();
    return static_cast<int>(kOk);
  });
}

// ---------------------------------------------------------------- simulate

struct SimulateOptions {
  std::string policy = "egreedy";
  std::string exploiter = "always:0";
  std::size_t runs = 1000;
  std::optional<double> epsilon;
};

inline int cmd_simulate(const CommonOptions& opts, const SimulateOptions& sim, Io io = {}) {
  return detail::guarded(io, [&]() -> int {
    const RunConfig cfg = detail::load_config(opts);
    const ModeSet modes = build_mode_set(cfg.plant);

    PolicyPtr policy;
    if (sim.policy == "egreedy") {
      PolicyPtr exploiter = detail::make_simple_policy(sim.exploiter);
      if (!exploiter && sim.exploiter.rfind("dqn", 0) == 0) exploiter = detail::make_network_policy("dqn-greedy:" + sim.exploiter.substr(sim.exploiter.find(':') + 1));
      if (!exploiter) throw UsageError(detail::unknown_policy_message(sim.exploiter));
      double epsilon = 0.0;
      if (sim.epsilon) {
        epsilon = *sim.epsilon;
      } else if (cfg.epsilon) {
        epsilon = *cfg.epsilon;
      } else {
        SearchOptions search_opts;
        search_opts.tolerance = opts.tolerance;
        const auto search = find_epsilon_bar(cfg.delta, modes, search_opts);
        if (!search.found()) {
          io.err << "no certified epsilon exists at delta=" << detail::fmt(cfg.delta) << "; pass --epsilon explicitly\n";
          return kInfeasible;
        }
        epsilon = *search.epsilon_bar;
      }
      policy = std::make_unique<EpsilonGreedyPolicy>(epsilon, std::move(exploiter));
      io.out << "epsilon=" << detail::fmt(epsilon) << '\n';
    } else if (sim.policy.rfind("dqn:", 0) == 0 || sim.policy.rfind("dqn-greedy:", 0) == 0) {
      policy = detail::make_network_policy(sim.policy);
    } else {
      policy = detail::make_simple_policy(sim.policy);
    }
    if (!policy) throw UsageError(detail::unknown_policy_message(sim.policy));
    if (sim.runs < 100) throw UsageError("--runs must be at least 100");

    const NetworkConfig network = cfg.network();
    auto first = policy->clone();
    const Trace trace = simulate(cfg.plant, modes, *first, network, cfg.cost, cfg.x0);
    const MonteCarloResult mc = monte_carlo_decay(cfg.plant, modes, *policy, network, sim.runs, cfg.x0);

    detail::ensure_dir(opts.out_dir);
    std::ostringstream trace_csv, decay_csv;
    write_trace_csv(trace_csv, trace);
    write_decay_csv(decay_csv, mc);
    detail::write_text(opts.out_dir / "trace.csv", trace_csv.str());
    detail::write_text(opts.out_dir / "decay.csv", decay_csv.str());

    io.out << "zeta_const=" << detail::fmt(mc.estimate.zeta_const) << " xi=" << detail::fmt(mc.estimate.xi)
           << " r_squared=" << detail::fmt(mc.estimate.r_squared) << " diverged_runs=" << mc.diverged_runs << '/'
           << mc.runs << '\n';
    if (mc.all_diverged()) {
      io.out << "status=Diverged\n";
    } else {
      io.out << "status=" << (mc.estimate.xi < 1.0 ? "decaying" : "not_decaying") << '\n';
    }
    return kOk;
  });
}

// ---------------------------------------------------------------- train

struct TrainOptions {
  std::optional<std::filesystem::path> certificate;
  std::optional<double> epsilon;
  bool uncertified = false;
  TrainConfig train;
};

inline int cmd_train(const CommonOptions& opts, const TrainOptions& topts, Io io = {}) {
  return detail::guarded(io, [&]() -> int {
    const RunConfig cfg = detail::load_config(opts);
    const ModeSet modes = build_mode_set(cfg.plant);
    TrainConfig tc = topts.train;
    tc.discount = cfg.cost.beta;
    tc.uncertified = topts.uncertified;

    const auto cert_path = topts.certificate.value_or(opts.out_dir / "certificate.json");
    std::optional<StabilityCertificate> cert;
    if (std::filesystem::exists(cert_path)) {
      const auto doc = read_json_file(cert_path);
      if (doc.value("status", "") == "certified") cert = detail::certificate_from_json(doc);
    } else if (topts.certificate) {
      throw UsageError("certificate file not found: " + cert_path.string());
    }

    if (cert) {
      if (std::abs(cert->delta - cfg.delta) > 1e-12) {
        throw UsageError("certificate was issued for delta=" + detail::fmt(cert->delta) + " but the run uses delta=" +
                         detail::fmt(cfg.delta));
      }
      if (!verify_certificate(*cert, modes)) throw UsageError("certificate does not verify against this plant");
    }

    if (topts.epsilon && (!cert || std::abs(*topts.epsilon - cert->epsilon) > 1e-12)) {
      if (!topts.uncertified) {
        throw UsageError("--epsilon " + detail::fmt(*topts.epsilon) +
                         " is not backed by a stability certificate; run `analyze` first or pass --uncertified to "
                         "train without the mean-square stability guarantee");
      }
      tc.epsilon = *topts.epsilon;
      tc.certificate.reset();
    } else if (cert) {
      tc.epsilon = cert->epsilon;
      tc.certificate = cert;
    } else {
      throw UsageError("training needs a certified epsilon: run `analyze` to produce " + cert_path.string() +
                       ", or pass --epsilon together with --uncertified");
    }

    const auto started = std::chrono::steady_clock::now();
    const TrainResult result = train(cfg.plant, modes, cfg.network(), cfg.cost, tc);
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();

    nlohmann::json meta;
    meta["epsilon"] = tc.epsilon;
    meta["delta"] = cfg.delta;
    meta["seed"] = cfg.seed;
    meta["certified"] = tc.certificate.has_value();
    meta["input"] = tc.input == InputMode::AugmentedState ? "zeta" : "x";
    meta["optimizer"] = tc.optimizer == OptimizerKind::Adam ? "adam" : "sgd";
    meta["episodes"] = tc.episodes;
    meta["learning_rate"] = tc.learning_rate;
    meta["batch_size"] = tc.batch_size;
    meta["target_sync_period"] = tc.target_sync_period;
    meta["replay_capacity"] = tc.replay_capacity;

    detail::ensure_dir(opts.out_dir);
    detail::write_text(opts.out_dir / "weights.json", save_weights(result.net, meta).dump() + "\n");
    std::ostringstream curve;
    write_reward_curve_csv(curve, result.episode_rewards);
    detail::write_text(opts.out_dir / "reward_curve.csv", curve.str());
    nlohmann::json run_meta{{"finished_at", detail::timestamp()}, {"seconds", seconds}, {"steps", result.steps},
                            {"failed", result.failed}, {"diagnostic", result.diagnostic}};
    detail::write_text(opts.out_dir / "train_meta.json", run_meta.dump(2) + "\n");

    io.out << "episodes=" << result.episode_rewards.size() << " steps=" << result.steps
           << " diverged_episodes=" << result.diverged_episodes << '\n';
    if (result.failed) {
      io.err << "training failed: " << result.diagnostic << '\n';
      return kTrainingFailed;
    }
    return kOk;
  });
}

// ---------------------------------------------------------------- compare

struct CompareRow {
  std::string policy;
  RewardSummary summary;
};

inline int cmd_compare(const CommonOptions& opts, const std::vector<std::string>& policies, std::size_t episodes,
                       Io io = {}, std::vector<CompareRow>* rows_out = nullptr) {
  return detail::guarded(io, [&]() -> int {
    if (policies.size() < 2) throw UsageError("compare needs at least two policies");
    if (episodes < 1) throw UsageError("--episodes must be positive");
    const RunConfig cfg = detail::load_config(opts);
    const ModeSet modes = build_mode_set(cfg.plant);

    std::vector<std::pair<std::string, PolicyPtr>> built;
    for (const auto& name : policies) {
      PolicyPtr p = (name.rfind("dqn:", 0) == 0 || name.rfind("dqn-greedy:", 0) == 0) ? detail::make_network_policy(name)
                                                                                      : detail::make_simple_policy(name);
      if (!p) throw UsageError(detail::unknown_policy_message(name));
      built.emplace_back(name, std::move(p));
    }

    std::ostringstream csv;
    csv << "policy,avg_reward,stderr,episodes\n";
    std::vector<CompareRow> rows;
    for (const auto& [name, policy] : built) {
      // Same seed for every policy: identical initial states and drop sequences.
      const auto summary = average_reward(cfg.plant, modes, *policy, cfg.network(), cfg.cost, episodes);
      const std::string label = name.substr(0, name.find(':')) == "dqn" ? "dqn"
                                : name.rfind("dqn-greedy:", 0) == 0     ? "dqn-greedy"
                                                                        : name;
      csv << label << ',' << detail::fmt(summary.mean) << ',' << detail::fmt(summary.stderr_) << ',' << summary.episodes
          << '\n';
      rows.push_back({label, summary});
    }
    detail::ensure_dir(opts.out_dir);
    detail::write_text(opts.out_dir / "compare.csv", csv.str());
    io.out << csv.str();
    if (rows_out) *rows_out = std::move(rows);
    return kOk;
  });
}

}  // namespace muxncs::cli
