#pragma once

// Closed-loop rollouts of the networked system under a scheduling policy,
// with per-stage cost accounting and Monte-Carlo second-moment estimates.

#include <cmath>
#include <cstdint>
#include <limits>
#include <ostream>
#include <string>
#include <vector>

#include "muxncs/error.hpp"
#include "muxncs/linalg.hpp"
#include "muxncs/model.hpp"
#include "muxncs/parallel.hpp"
#include "muxncs/policy.hpp"
#include "muxncs/rng.hpp"
#include "muxncs/stability.hpp"

namespace muxncs {

/// c_k = x' Q x + uhat' R uhat + lambda * sigma^2, discounted by beta.
struct CostWeights {
  Matrix Q;
  Matrix R;
  double lambda = 0.5;
  double beta = 0.95;

  static CostWeights identity(Eigen::Index n, Eigen::Index m, double lambda = 0.5, double beta = 0.95) {
    CostWeights w{Matrix::Identity(n, n), Matrix::Identity(m, m), lambda, beta};
    w.validate(n, m);
    return w;
  }

  void validate(Eigen::Index n, Eigen::Index m) const {
    if (Q.rows() != n || Q.cols() != n) throw ConfigError("Q must be " + std::to_string(n) + "x" + std::to_string(n));
    if (R.rows() != m || R.cols() != m) throw ConfigError("R must be " + std::to_string(m) + "x" + std::to_string(m));
    if ((Q - Q.transpose()).cwiseAbs().maxCoeff() > 1e-12 || min_symmetric_eigenvalue(Q) < -1e-12) {
      throw DomainError("Q must be symmetric positive semidefinite");
    }
    if ((R - R.transpose()).cwiseAbs().maxCoeff() > 1e-12 || !(min_symmetric_eigenvalue(R) > 0.0)) {
      throw DomainError("R must be symmetric positive definite");
    }
    if (!(lambda >= 0.0)) throw DomainError("lambda must be non-negative");
    if (!(beta > 0.0 && beta < 1.0)) throw DomainError("beta must lie in (0, 1)");
  }
};

struct NetworkConfig {
  double delta = 0.8;
  std::uint64_t seed = 12345;
  std::size_t horizon = 200;

  void validate() const {
    detail::require_delta(delta);
    if (horizon < 1) throw DomainError("horizon must be at least 1");
  }
};

inline double stage_cost(const CostWeights& w, const Vector& x, const Vector& uhat, Switch sigma) {
  const double s = static_cast<double>(to_int(sigma));
  return x.dot(w.Q * x) + uhat.dot(w.R * uhat) + w.lambda * s * s;
}

/// Rollouts stop once |zeta|^2 exceeds this (|zeta| > 1e12).
inline constexpr double kDivergenceSquaredNorm = 1e24;

struct StepRecord {
  std::size_t k = 0;
  AugmentedState zeta;  // zeta_k, before the step
  AugmentedState next;  // zeta_{k+1}
  Switch sigma = Switch::Silent;
  bool delivered = false;
  Mode mode = Mode::Idle;
  double cost = 0.0;
  double reward = 0.0;  // always -cost
};

struct Trace {
  std::vector<StepRecord> steps;
  bool diverged = false;
  double discounted_return = 0.0;
  double average_reward = 0.0;  // per executed step
  double final_squared_norm = 0.0;
};

/// How a rollout advances the augmented state. Components is the reference path;
/// ModeMatrices multiplies by Gamma_mode and also accepts synthetic mode sets.
enum class StepRule { Components, ModeMatrices };

struct RolloutOptions {
  std::uint64_t run_index = 0;
  StepRule rule = StepRule::Components;
  bool keep_steps = true;
};

inline double discounted_return(const Trace& trace, double beta) {
  if (!(beta > 0.0 && beta < 1.0)) throw DomainError("beta must lie in (0, 1)");
  CompensatedSum acc;
  double weight = 1.0;
  for (const auto& s : trace.steps) {
    acc.add(weight * s.reward);
    weight *= beta;
  }
  return acc.value();
}

/// Rolls out `network.horizon` steps from zeta_0 = (x0, x0, 0). Drops come from the network
/// stream and policy randomness from the exploration stream, both keyed by (seed, run_index).
inline Trace simulate(const PlantModel& plant, const ModeSet& modes, SchedulingPolicy& policy,
                      const NetworkConfig& network, const CostWeights& weights, const Vector& x0,
                      const RolloutOptions& opts = {}) {
  network.validate();
  if (x0.size() != plant.n() || !x0.allFinite()) throw ConfigError("x0 must be a finite vector of length n");
  if (modes.n() != plant.n() || modes.m() != plant.m()) throw ConfigError("mode set does not match the plant");

  Rng drops(network.seed, Stream::Network, opts.run_index);
  Rng explore(network.seed, Stream::Exploration, opts.run_index);

  Trace trace;
  if (opts.keep_steps) trace.steps.reserve(network.horizon);
  AugmentedState zeta = AugmentedState::initial(x0, plant.m());
  CompensatedSum total, discounted;
  double weight = 1.0;
  std::size_t executed = 0;
  for (std::size_t k = 0; k < network.horizon; ++k) {
    const Switch sigma = policy.choose(Observation{k, zeta}, explore);
    const bool delivered = drops.bernoulli(network.delta);
    const Mode mode = mode_from_events(sigma, delivered);
    AugmentedState next = opts.rule == StepRule::Components ? step_components(plant, zeta, sigma, delivered)
                                                            : step_augmented(modes, zeta, mode);
    // next.uhat_prev is the control applied at step k.
    const double cost = stage_cost(weights, zeta.x, next.uhat_prev, sigma);
    const double reward = 0.0 - cost;
    total.add(reward);
    discounted.add(-weight * cost);
    weight *= weights.beta;
    ++executed;
    if (opts.keep_steps) trace.steps.push_back({k, zeta, next, sigma, delivered, mode, cost, reward});
    zeta = std::move(next);
    const double sq = zeta.squared_norm();
    if (!(sq <= kDivergenceSquaredNorm)) {
      trace.diverged = true;
      break;
    }
  }
  trace.discounted_return = discounted.value();
  trace.average_reward = total.value() / static_cast<double>(executed);
  trace.final_squared_norm = zeta.squared_norm();
  return trace;
}

/// Least-squares fit of log(E|zeta_k|^2 / |zeta_0|^2) = log(zeta_const) + k log(xi).
/// zeta_const is then tightened to the smallest envelope constant for the fitted xi.
inline DecayEstimate fit_decay(const std::vector<double>& mean_sq) {
  DecayEstimate est;
  if (mean_sq.empty() || !(mean_sq.front() > 0.0)) return est;
  const double base = mean_sq.front();
  std::vector<double> ks, ys;
  for (std::size_t k = 0; k < mean_sq.size(); ++k) {
    if (mean_sq[k] > 0.0 && std::isfinite(mean_sq[k])) {
      ks.push_back(static_cast<double>(k));
      ys.push_back(std::log(mean_sq[k] / base));
    }
  }
  if (ks.size() < 2) return est;
  const double count = static_cast<double>(ks.size());
  double mk = 0.0, my = 0.0;
  for (std::size_t i = 0; i < ks.size(); ++i) {
    mk += ks[i];
    my += ys[i];
  }
  mk /= count;
  my /= count;
  double skk = 0.0, sky = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < ks.size(); ++i) {
    skk += (ks[i] - mk) * (ks[i] - mk);
    sky += (ks[i] - mk) * (ys[i] - my);
    syy += (ys[i] - my) * (ys[i] - my);
  }
  const double slope = sky / skk;
  const double intercept = my - slope * mk;
  double ss_res = 0.0;
  for (std::size_t i = 0; i < ks.size(); ++i) {
    const double e = ys[i] - (intercept + slope * ks[i]);
    ss_res += e * e;
  }
  est.xi = std::exp(slope);
  est.r_squared = syy > 0.0 ? 1.0 - ss_res / syy : 1.0;
  double envelope = 1.0;
  for (std::size_t i = 0; i < ks.size(); ++i) envelope = std::max(envelope, std::exp(ys[i] - slope * ks[i]));
  est.zeta_const = envelope;
  return est;
}

struct MonteCarloResult {
  DecayEstimate estimate;
  std::vector<double> mean_squared_norm;  // k = 0..horizon
  std::size_t runs = 0;
  std::size_t diverged_runs = 0;

  bool all_diverged() const { return runs > 0 && diverged_runs == runs; }
  double diverged_fraction() const { return runs ? static_cast<double>(diverged_runs) / static_cast<double>(runs) : 0.0; }
};

/// E[zeta_k' zeta_k] over `runs` rollouts from a common x0 with independent streams per run.
/// A diverged run holds the divergence level for the rest of the horizon.
inline MonteCarloResult monte_carlo_decay(const PlantModel& plant, const ModeSet& modes, const SchedulingPolicy& policy,
                                          const NetworkConfig& network, std::size_t runs, const Vector& x0,
                                          StepRule rule = StepRule::Components) {
  if (runs < 100) throw DomainError("monte_carlo_decay needs at least 100 runs");
  network.validate();
  const std::size_t len = network.horizon + 1;
  const auto weights = CostWeights::identity(plant.n(), plant.m());
  std::vector<std::vector<double>> per_run(runs);
  std::vector<char> diverged(runs, 0);
  parallel_for(runs, [&](std::size_t r) {
    auto local = policy.clone();
    const Trace trace = simulate(plant, modes, *local, network, weights, x0, {r, rule, true});
    auto& series = per_run[r];
    series.assign(len, 0.0);
    series[0] = AugmentedState::initial(x0, plant.m()).squared_norm();
    for (const auto& s : trace.steps) series[s.k + 1] = std::min(s.next.squared_norm(), kDivergenceSquaredNorm);
    if (trace.diverged) {
      diverged[r] = 1;
      for (std::size_t k = trace.steps.size() + 1; k < len; ++k) series[k] = kDivergenceSquaredNorm;
    }
  });

  MonteCarloResult out;
  out.runs = runs;
  out.mean_squared_norm.assign(len, 0.0);
  for (std::size_t k = 0; k < len; ++k) {
    CompensatedSum acc;
    for (std::size_t r = 0; r < runs; ++r) acc.add(per_run[r][k]);
    out.mean_squared_norm[k] = acc.value() / static_cast<double>(runs);
  }
  for (char d : diverged) out.diverged_runs += d ? 1 : 0;
  out.estimate = fit_decay(out.mean_squared_norm);
  return out;
}

struct RewardSummary {
  double mean = 0.0;
  double stderr_ = 0.0;
  std::size_t episodes = 0;
  std::size_t diverged = 0;
  std::vector<double> per_episode;
};

/// Episode e starts from x0 ~ U[-box, box]^n drawn from (seed, InitialState, e) and uses run index e,
/// so two policies evaluated with the same config see identical initial states and drop sequences.
inline Vector initial_state(std::uint64_t seed, std::uint64_t episode, Eigen::Index n, double box) {
  Rng rng(seed, Stream::InitialState, episode);
  Vector x0(n);
  for (Eigen::Index i = 0; i < n; ++i) x0(i) = rng.uniform(-box, box);
  return x0;
}

/// Mean over episodes of the per-step reward.
inline RewardSummary average_reward(const PlantModel& plant, const ModeSet& modes, const SchedulingPolicy& policy,
                                    const NetworkConfig& network, const CostWeights& weights, std::size_t episodes,
                                    double init_box = 10.0) {
  if (episodes < 1) throw DomainError("average_reward needs at least one episode");
  weights.validate(plant.n(), plant.m());
  RewardSummary out;
  out.episodes = episodes;
  out.per_episode.assign(episodes, 0.0);
  std::vector<char> diverged(episodes, 0);
  parallel_for(episodes, [&](std::size_t e) {
    auto local = policy.clone();
    const Vector x0 = initial_state(network.seed, e, plant.n(), init_box);
    const Trace trace = simulate(plant, modes, *local, network, weights, x0, {e, StepRule::Components, false});
    out.per_episode[e] = trace.average_reward;
    diverged[e] = trace.diverged ? 1 : 0;
  });
  for (char d : diverged) out.diverged += d ? 1 : 0;
  out.mean = compensated_sum(out.per_episode) / static_cast<double>(episodes);
  if (episodes > 1) {
    CompensatedSum var;
    for (double v : out.per_episode) var.add((v - out.mean) * (v - out.mean));
    out.stderr_ = std::sqrt(var.value() / static_cast<double>(episodes - 1) / static_cast<double>(episodes));
  }
  return out;
}

inline void write_trace_csv(std::ostream& os, const Trace& trace) {
  if (trace.steps.empty()) {
    os << "k,sigma,gamma,mode,cost,reward\n";
    return;
  }
  const auto& first = trace.steps.front().zeta;
  os << "k";
  for (Eigen::Index i = 1; i <= first.x.size(); ++i) os << ",x" << i;
  for (Eigen::Index i = 1; i <= first.xhat_prev.size(); ++i) os << ",xhat" << i;
  for (Eigen::Index i = 1; i <= first.uhat_prev.size(); ++i) os << ",uhat" << i;
  os << ",sigma,gamma,mode,cost,reward\n";
  for (const auto& s : trace.steps) {
    os << s.k;
    for (Eigen::Index i = 0; i < s.zeta.x.size(); ++i) os << ',' << format_double(s.zeta.x(i));
    for (Eigen::Index i = 0; i < s.zeta.xhat_prev.size(); ++i) os << ',' << format_double(s.zeta.xhat_prev(i));
    for (Eigen::Index i = 0; i < s.zeta.uhat_prev.size(); ++i) os << ',' << format_double(s.zeta.uhat_prev(i));
    os << ',' << to_int(s.sigma) << ',' << (s.delivered ? 1 : 0) << ',' << mode_index(s.mode) << ','
       << format_double(s.cost) << ',' << format_double(s.reward) << '\n';
  }
}

inline void write_decay_csv(std::ostream& os, const MonteCarloResult& mc) {
  os << "k,mean_zeta_sq\n";
  for (std::size_t k = 0; k < mc.mean_squared_norm.size(); ++k) os << k << ',' << format_double(mc.mean_squared_norm[k]) << '\n';
}

}  // namespace muxncs
