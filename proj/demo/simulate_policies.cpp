// Average per-step reward of the baseline schedulers and of epsilon-greedy silence
// at the certified exploration rate, on paired seeds.

#include <cstdio>
#include <memory>

#include "muxncs/sim.hpp"

int main() {
  using namespace muxncs;
  Matrix a(2, 2), b(2, 1), k(1, 2);
  a << 1.0, 0.1, 0.0, 1.0;
  b << 0.0, 1.0;
  k << -0.012, -0.07;
  const PlantModel plant(a, b, Matrix::Identity(2, 2), k);
  const ModeSet modes = build_mode_set(plant);
  const NetworkConfig network{0.8, 2024, 200};
  const CostWeights weights = CostWeights::identity(2, 1);

  const EpsilonSearch search = find_epsilon_bar(network.delta, modes);
  const double eps = search.found() ? *search.epsilon_bar : 1.0;

  RoundRobinPolicy round_robin;
  UniformRandomPolicy random;
  EpsilonGreedyPolicy greedy_silence(eps, std::make_unique<AlwaysPolicy>(Switch::Silent));

  const SchedulingPolicy* policies[] = {&round_robin, &random, &greedy_silence};
  for (const SchedulingPolicy* p : policies) {
    const RewardSummary r = average_reward(plant, modes, *p, network, weights, 200);
    std::printf("%-26s %9.3f +- %.3f\n", p->name().c_str(), r.mean, r.stderr_);
  }

  const MonteCarloResult mc = monte_carlo_decay(plant, modes, greedy_silence, network, 500, Vector::Ones(2));
  std::printf("second moment under %s: xi=%.4f  R^2=%.3f\n", greedy_silence.name().c_str(), mc.estimate.xi,
              mc.estimate.r_squared);
  return 0;
}
