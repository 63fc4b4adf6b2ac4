#pragma once

#include <cstddef>
#include <memory>
#include <string>

#include "muxncs/markov.hpp"
#include "muxncs/model.hpp"
#include "muxncs/rng.hpp"

namespace muxncs {

/// What the scheduler sees at step k. The true plant state is assumed observable to it.
struct Observation {
  std::size_t k;
  const AugmentedState& zeta;
};

class SchedulingPolicy {
 public:
  virtual ~SchedulingPolicy() = default;
  /// Randomized policies draw only from `rng` (the exploration stream).
  virtual Switch choose(const Observation& obs, Rng& rng) = 0;
  virtual std::unique_ptr<SchedulingPolicy> clone() const = 0;
  virtual std::string name() const = 0;
};

using PolicyPtr = std::unique_ptr<SchedulingPolicy>;

class AlwaysPolicy final : public SchedulingPolicy {
 public:
  explicit AlwaysPolicy(Switch s) : switch_(s) {}
  Switch choose(const Observation&, Rng&) override { return switch_; }
  PolicyPtr clone() const override { return std::make_unique<AlwaysPolicy>(*this); }
  std::string name() const override {
    return switch_ == Switch::Control ? "always:+1" : switch_ == Switch::Observe ? "always:-1" : "always:0";
  }

 private:
  Switch switch_;
};

/// Deterministic cycling. The two-phase cycle (1, -1) transmits every step; the
/// three-phase cycle (1, 0, -1) inserts a silent slot.
class RoundRobinPolicy final : public SchedulingPolicy {
 public:
  explicit RoundRobinPolicy(bool include_silent = false) : include_silent_(include_silent) {}
  Switch choose(const Observation& obs, Rng&) override {
    if (include_silent_) {
      static constexpr Switch cycle[3] = {Switch::Control, Switch::Silent, Switch::Observe};
      return cycle[obs.k % 3];
    }
    return obs.k % 2 == 0 ? Switch::Control : Switch::Observe;
  }
  PolicyPtr clone() const override { return std::make_unique<RoundRobinPolicy>(*this); }
  std::string name() const override { return include_silent_ ? "round-robin3" : "round-robin"; }

 private:
  bool include_silent_;
};

/// Uniform over {1, 0, -1}.
class UniformRandomPolicy final : public SchedulingPolicy {
 public:
  Switch choose(const Observation&, Rng& rng) override {
    static constexpr Switch choices[3] = {Switch::Control, Switch::Silent, Switch::Observe};
    return choices[rng.index(3)];
  }
  PolicyPtr clone() const override { return std::make_unique<UniformRandomPolicy>(*this); }
  std::string name() const override { return "random"; }
};

/// Stationary exploitation with fixed (p, q); used to sample the general mixture.
class StationaryPolicy final : public SchedulingPolicy {
 public:
  explicit StationaryPolicy(ExploitParams params) : params_(ExploitParams::make(params.p, params.q)) {}
  Switch choose(const Observation&, Rng& rng) override {
    const double u = rng.uniform();
    if (u < params_.p) return Switch::Control;
    if (u < params_.p + params_.q) return Switch::Observe;
    return Switch::Silent;
  }
  PolicyPtr clone() const override { return std::make_unique<StationaryPolicy>(*this); }
  std::string name() const override { return "stationary"; }

 private:
  ExploitParams params_;
};

/// With probability epsilon pick sigma uniformly from {1, -1}; otherwise defer to the exploiter.
/// The exploiter is not consulted on exploration steps.
class EpsilonGreedyPolicy final : public SchedulingPolicy {
 public:
  EpsilonGreedyPolicy(double epsilon, PolicyPtr exploiter) : epsilon_(epsilon), exploiter_(std::move(exploiter)) {
    detail::require_unit(epsilon, "epsilon");
    if (!exploiter_) throw ConfigError("epsilon-greedy policy needs an exploiter");
  }
  EpsilonGreedyPolicy(const EpsilonGreedyPolicy& other)
      : SchedulingPolicy(), epsilon_(other.epsilon_), exploiter_(other.exploiter_->clone()),
        explorations_(other.explorations_) {}

  Switch choose(const Observation& obs, Rng& rng) override {
    if (rng.uniform() < epsilon_) {
      ++explorations_;
      return rng.uniform() < 0.5 ? Switch::Control : Switch::Observe;
    }
    return exploiter_->choose(obs, rng);
  }
  PolicyPtr clone() const override { return std::make_unique<EpsilonGreedyPolicy>(*this); }
  std::string name() const override { return "egreedy(" + exploiter_->name() + ")"; }

  double epsilon() const { return epsilon_; }
  std::size_t explorations() const { return explorations_; }
  SchedulingPolicy& exploiter() { return *exploiter_; }

 private:
  double epsilon_;
  PolicyPtr exploiter_;
  std::size_t explorations_ = 0;
};

}  // namespace muxncs
