#pragma once

// Deep Q-learning scheduler: replay memory, TD updates against a periodically
// synced target network, and epsilon-greedy exploration at a certified rate.

#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <ostream>
#include <string>
#include <vector>

#include "muxncs/model.hpp"
#include "muxncs/policy.hpp"
#include "muxncs/qnetwork.hpp"
#include "muxncs/rng.hpp"
#include "muxncs/sim.hpp"
#include "muxncs/stability.hpp"

namespace muxncs {

/// Network input: the plant state x (default) or the full augmented state zeta.
enum class InputMode { PlantState, AugmentedState };

inline Vector features(const AugmentedState& zeta, InputMode mode) {
  return mode == InputMode::PlantState ? zeta.x : zeta.flatten();
}

inline Eigen::Index feature_dim(Eigen::Index n, Eigen::Index m, InputMode mode) {
  return mode == InputMode::PlantState ? n : 2 * n + m;
}

struct Experience {
  Switch sigma = Switch::Silent;
  Vector state;
  double reward = 0.0;
  Vector next_state;
};

/// Bounded FIFO; pushing into a full memory evicts the oldest entry.
class ReplayMemory {
 public:
  explicit ReplayMemory(std::size_t capacity) : capacity_(capacity) {
    if (capacity == 0) throw DomainError("replay capacity must be positive");
    buffer_.reserve(capacity);
  }

  void push(Experience e) {
    if (buffer_.size() < capacity_) {
      buffer_.push_back(std::move(e));
    } else {
      buffer_[head_] = std::move(e);
      head_ = (head_ + 1) % capacity_;
    }
  }

  std::size_t size() const { return buffer_.size(); }
  std::size_t capacity() const { return capacity_; }
  bool empty() const { return buffer_.empty(); }

  /// i = 0 is the oldest retained entry.
  const Experience& at(std::size_t i) const { return buffer_[(head_ + i) % buffer_.size()]; }

  /// Uniform draw of `count` slots with replacement, returned as chronological indices.
  std::vector<std::size_t> sample_indices(std::size_t count, Rng& rng) const {
    if (empty()) throw DomainError("cannot sample from an empty replay memory");
    std::vector<std::size_t> idx(count);
    for (auto& i : idx) i = static_cast<std::size_t>(rng.index(buffer_.size()));
    return idx;
  }

 private:
  std::size_t capacity_;
  std::size_t head_ = 0;
  std::vector<Experience> buffer_;
};

/// Greedy scheduler over a Q-network. Counts forward evaluations.
class QNetworkGreedyPolicy final : public SchedulingPolicy {
 public:
  QNetworkGreedyPolicy(std::shared_ptr<const QNetwork> net, InputMode mode) : net_(std::move(net)), mode_(mode) {
    if (!net_) throw ConfigError("greedy policy needs a network");
  }
  Switch choose(const Observation& obs, Rng&) override {
    ++evaluations_;
    return greedy_switch(net_->forward(features(obs.zeta, mode_)));
  }
  PolicyPtr clone() const override { return std::make_unique<QNetworkGreedyPolicy>(*this); }
  std::string name() const override { return "dqn"; }
  std::size_t evaluations() const { return evaluations_; }

 private:
  std::shared_ptr<const QNetwork> net_;
  InputMode mode_;
  std::size_t evaluations_ = 0;
};

struct TrainConfig {
  std::size_t batch_size = 32;
  double learning_rate = 1e-3;
  std::size_t episodes = 800;
  std::size_t target_sync_period = 100;
  std::size_t replay_capacity = 1000;
  std::vector<int> hidden = {1024, 256};
  double discount = 0.95;
  double epsilon = 0.2;
  /// Training is only launched with a certified epsilon unless `uncertified` is set.
  std::optional<StabilityCertificate> certificate;
  bool uncertified = false;
  OptimizerKind optimizer = OptimizerKind::Adam;
  InputMode input = InputMode::PlantState;
  double init_box = 10.0;

  void validate() const {
    if (batch_size == 0 || target_sync_period == 0 || replay_capacity == 0) {
      throw DomainError("batch size, sync period and replay capacity must be positive");
    }
    if (!(learning_rate > 0.0)) throw DomainError("learning rate must be positive");
    if (!(discount >= 0.0 && discount < 1.0)) throw DomainError("discount must lie in [0, 1)");
    detail::require_unit(epsilon, "epsilon");
    for (int h : hidden) {
      if (h < 1) throw DomainError("hidden layer sizes must be positive");
    }
    if (!uncertified) {
      if (!certificate) throw DomainError("training requires a stability certificate for epsilon (or an explicit uncertified override)");
      if (std::abs(certificate->epsilon - epsilon) > 1e-12) {
        throw DomainError("training epsilon " + std::to_string(epsilon) + " differs from the certified value " +
                          std::to_string(certificate->epsilon));
      }
    }
  }

  std::vector<int> arch(Eigen::Index input_dim) const {
    std::vector<int> a{static_cast<int>(input_dim)};
    a.insert(a.end(), hidden.begin(), hidden.end());
    a.push_back(kNumActions);
    return a;
  }
};

/// TD targets r + discount * max_a Q(s', a; theta^-) are built from `target`; one optimizer step on `net`.
/// Returns the pre-update loss.
inline double td_update(QNetwork& net, const QNetwork& target, std::span<const Experience* const> batch, double discount,
                        Optimizer& optimizer) {
  if (batch.empty()) throw DomainError("td_update needs a non-empty batch");
  if (net.arch() != target.arch()) throw ConfigError("policy and target networks differ in architecture");
  const auto dim = net.input_dim();
  const auto count = static_cast<Eigen::Index>(batch.size());
  Matrix states(dim, count), next(dim, count);
  Vector rewards(count);
  std::vector<int> actions(batch.size());
  for (Eigen::Index j = 0; j < count; ++j) {
    const Experience& e = *batch[static_cast<std::size_t>(j)];
    states.col(j) = e.state;
    next.col(j) = e.next_state;
    rewards(j) = e.reward;
    actions[static_cast<std::size_t>(j)] = action_index(e.sigma);
  }
  Vector targets = rewards;
  if (discount != 0.0) targets += discount * target.forward_batch(next).colwise().maxCoeff().transpose();

  Gradients grad;
  const double loss = squared_td_loss(net, states, actions, targets, &grad);
  if (!std::isfinite(loss)) throw NumericalError("non-finite TD loss; training aborted");
  optimizer.step(net, grad);
  return loss;
}

inline void sync_target(const QNetwork& net, QNetwork& target) { target = net; }

struct TrainResult {
  QNetwork net;
  std::vector<double> episode_rewards;  // total reward per episode
  std::size_t steps = 0;
  std::size_t diverged_episodes = 0;
  bool failed = false;
  std::string diagnostic;
};

/// Trailing mean over up to `window` episodes ending at each index.
inline std::vector<double> moving_average(const std::vector<double>& values, std::size_t window = 100) {
  std::vector<double> out(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    const std::size_t begin = i + 1 >= window ? i + 1 - window : 0;
    CompensatedSum acc;
    for (std::size_t j = begin; j <= i; ++j) acc.add(values[j]);
    out[i] = acc.value() / static_cast<double>(i + 1 - begin);
  }
  return out;
}

/// Callback invoked after each episode with (episode index, total reward).
using EpisodeHook = std::function<void(std::size_t, double)>;

/// Deep Q-learning with epsilon-greedy exploration; deterministic given network.seed.
inline TrainResult train(const PlantModel& plant, const ModeSet& modes, const NetworkConfig& network,
                         const CostWeights& weights, const TrainConfig& cfg, const EpisodeHook& hook = {}) {
  (void)modes;
  network.validate();
  weights.validate(plant.n(), plant.m());
  cfg.validate();

  Rng init_rng(network.seed, Stream::WeightInit);
  Rng explore(network.seed, Stream::Exploration);
  Rng drops(network.seed, Stream::Network);
  Rng replay_rng(network.seed, Stream::Replay);

  const auto dim = feature_dim(plant.n(), plant.m(), cfg.input);
  auto net = std::make_shared<QNetwork>(QNetwork::initialized(cfg.arch(dim), init_rng));
  QNetwork target = *net;
  Optimizer optimizer(cfg.optimizer, cfg.learning_rate);
  ReplayMemory memory(cfg.replay_capacity);
  EpsilonGreedyPolicy policy(cfg.epsilon, std::make_unique<QNetworkGreedyPolicy>(net, cfg.input));

  TrainResult result;
  std::vector<const Experience*> batch(cfg.batch_size);
  std::vector<char> diverged;
  for (std::size_t ep = 0; ep < cfg.episodes; ++ep) {
    AugmentedState zeta = AugmentedState::initial(initial_state(network.seed, ep, plant.n(), cfg.init_box), plant.m());
    CompensatedSum total;
    bool episode_diverged = false;
    for (std::size_t k = 0; k < network.horizon; ++k) {
      const Switch sigma = policy.choose(Observation{k, zeta}, explore);
      const bool delivered = drops.bernoulli(network.delta);
      AugmentedState next = step_components(plant, zeta, sigma, delivered);
      const double reward = 0.0 - stage_cost(weights, zeta.x, next.uhat_prev, sigma);
      memory.push({sigma, features(zeta, cfg.input), reward, features(next, cfg.input)});

      const auto idx = memory.sample_indices(cfg.batch_size, replay_rng);
      for (std::size_t i = 0; i < idx.size(); ++i) batch[i] = &memory.at(idx[i]);
      try {
        td_update(*net, target, batch, cfg.discount, optimizer);
      } catch (const NumericalError& e) {
        result.failed = true;
        result.diagnostic = std::string(e.what()) + " at episode " + std::to_string(ep) + ", step " + std::to_string(k);
        result.net = *net;
        return result;
      }
      ++result.steps;
      if (result.steps % cfg.target_sync_period == 0) sync_target(*net, target);

      total.add(reward);
      zeta = std::move(next);
      if (!(zeta.squared_norm() <= kDivergenceSquaredNorm)) {
        episode_diverged = true;
        break;
      }
    }
    result.episode_rewards.push_back(total.value());
    diverged.push_back(episode_diverged ? 1 : 0);
    if (episode_diverged) ++result.diverged_episodes;
    if (hook) hook(ep, total.value());
  }

  // More than half of the final quarter diverging marks the run as failed.
  const std::size_t late = std::max<std::size_t>(1, cfg.episodes / 4);
  if (cfg.episodes > 0) {
    std::size_t late_diverged = 0;
    for (std::size_t i = cfg.episodes - std::min(late, cfg.episodes); i < cfg.episodes; ++i) late_diverged += diverged[i] ? 1 : 0;
    if (2 * late_diverged > std::min(late, cfg.episodes)) {
      result.failed = true;
      result.diagnostic = std::to_string(late_diverged) + " of the last " + std::to_string(late) + " episodes diverged";
    }
  }
  result.net = *net;
  return result;
}

inline void write_reward_curve_csv(std::ostream& os, const std::vector<double>& episode_rewards) {
  os << "episode,total_reward,moving_avg_100\n";
  const auto avg = moving_average(episode_rewards, 100);
  for (std::size_t i = 0; i < episode_rewards.size(); ++i) {
    os << i << ',' << format_double(episode_rewards[i]) << ',' << format_double(avg[i]) << '\n';
  }
}

}  // namespace muxncs
