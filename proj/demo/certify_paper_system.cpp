// Certifies the double-integrator example and prints epsilon_bar for a few loss rates.

#include <cstdio>

#include "muxncs/stability.hpp"

int main() {
  using namespace muxncs;
  Matrix a(2, 2), b(2, 1), k(1, 2);
  a << 1.0, 0.1, 0.0, 1.0;
  b << 0.0, 1.0;
  k << -0.012, -0.07;
  const PlantModel plant(a, b, Matrix::Identity(2, 2), k);
  const ModeSet modes = build_mode_set(plant);

  for (double delta : {0.5, 0.8, 1.0}) {
    const EpsilonSearch search = find_epsilon_bar(delta, modes);
    if (!search.found()) {
      std::printf("delta=%.2f  no exploration rate is certified\n", delta);
      continue;
    }
    const auto& m = search.certificate->margins;
    std::printf("delta=%.2f  epsilon_bar=%.4f  margins=(%.3e, %.3e, %.3e)\n", delta, *search.epsilon_bar, m[0], m[1], m[2]);
  }
  return 0;
}
