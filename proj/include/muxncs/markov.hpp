#pragma once

// epsilon-greedy switch probabilities and the induced i.i.d. mode process.

#include <algorithm>
#include <array>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "muxncs/error.hpp"
#include "muxncs/linalg.hpp"
#include "muxncs/model.hpp"

namespace muxncs {

namespace detail {
inline void require_unit(double v, const char* name) {
  if (!(v >= 0.0 && v <= 1.0)) throw DomainError(std::string(name) + " must lie in [0, 1], got " + std::to_string(v));
}
inline void require_delta(double delta) {
  if (!(delta > 0.0 && delta <= 1.0)) throw DomainError("delta must lie in (0, 1], got " + std::to_string(delta));
}
}  // namespace detail

/// Probabilities of sigma = 1, 0, -1.
struct SwitchDistribution {
  double plus = 0.0;
  double zero = 0.0;
  double minus = 0.0;

  double total() const { return plus + zero + minus; }
};

/// Exploitation-phase probabilities of sigma = 1 (p) and sigma = -1 (q).
struct ExploitParams {
  double p = 0.0;
  double q = 0.0;

  static ExploitParams make(double p, double q) {
    detail::require_unit(p, "p");
    detail::require_unit(q, "q");
    if (p + q > 1.0 + 1e-15) throw DomainError("p + q must not exceed 1, got " + std::to_string(p + q));
    return {p, q};
  }
};

/// Exploitation policies at the vertices of the (p, q) simplex.
enum class Corner : int { ObserveOnly = 1, ControlOnly = 2, Silent = 3 };

inline constexpr std::array<Corner, 3> kCorners = {Corner::ObserveOnly, Corner::ControlOnly, Corner::Silent};

inline ExploitParams corner_exploit(Corner c) {
  switch (c) {
    case Corner::ObserveOnly: return {0.0, 1.0};
    case Corner::ControlOnly: return {1.0, 0.0};
    case Corner::Silent: break;
  }
  return {0.0, 0.0};
}

inline Corner corner_from_index(int c) {
  if (c < 1 || c > 3) throw DomainError("corner case must be 1, 2 or 3, got " + std::to_string(c));
  return static_cast<Corner>(c);
}

/// Mixture eps * (1/2, 0, 1/2) + (1 - eps) * (p, 1 - p - q, q).
inline SwitchDistribution switch_distribution(double epsilon, ExploitParams exploit) {
  detail::require_unit(epsilon, "epsilon");
  exploit = ExploitParams::make(exploit.p, exploit.q);
  const double keep = 1.0 - epsilon;
  return {epsilon / 2.0 + keep * exploit.p, keep * (1.0 - exploit.p - exploit.q), epsilon / 2.0 + keep * exploit.q};
}

/// C1 = (eps/2, 0, 1 - eps/2), C2 = (1 - eps/2, 0, eps/2), C3 = (eps/2, 1 - eps, eps/2);
/// evaluated through the general mixture so corner and general rows agree bit for bit.
inline SwitchDistribution corner_case(Corner c, double epsilon) { return switch_distribution(epsilon, corner_exploit(c)); }

/// Probabilities of modes 1..5 (stored at indices 0..4).
struct ModeDistribution {
  std::array<double, 5> probs{};

  double operator[](Mode m) const { return probs[static_cast<std::size_t>(mode_index(m) - 1)]; }
  double total() const { return probs[0] + probs[1] + probs[2] + probs[3] + probs[4]; }

  static ModeDistribution make(std::array<double, 5> p) {
    for (double v : p) detail::require_unit(v, "mode probability");
    const double s = p[0] + p[1] + p[2] + p[3] + p[4];
    if (std::abs(s - 1.0) > 1e-12) throw DomainError("mode probabilities must sum to 1, got " + std::to_string(s));
    return {p};
  }
};

/// Drops are Bernoulli(delta) and independent of the switch choice.
inline ModeDistribution mode_distribution(double delta, const SwitchDistribution& sw) {
  detail::require_delta(delta);
  return {{delta * sw.plus, (1.0 - delta) * sw.plus, delta * sw.minus, (1.0 - delta) * sw.minus, sw.zero}};
}

inline ModeDistribution corner_mode_distribution(Corner c, double delta, double epsilon) {
  return mode_distribution(delta, corner_case(c, epsilon));
}

/// Row-stochastic 5x5 matrix; the mode process is i.i.d., so every row equals the distribution.
struct TransitionMatrix {
  Eigen::Matrix<double, 5, 5> rows;
};

inline TransitionMatrix transition_matrix(const ModeDistribution& dist) {
  TransitionMatrix t;
  for (int i = 0; i < 5; ++i) {
    for (int j = 0; j < 5; ++j) t.rows(i, j) = dist.probs[static_cast<std::size_t>(j)];
  }
  return t;
}

inline std::vector<double> default_delta_grid() { return {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0}; }

/// max |P_general - (q C1 + p C2 + (1 - p - q) C3)| over the delta grid.
inline double convex_combination_check(double epsilon, ExploitParams exploit,
                                       std::span<const double> deltas = {}) {
  exploit = ExploitParams::make(exploit.p, exploit.q);
  std::vector<double> grid = deltas.empty() ? default_delta_grid() : std::vector<double>(deltas.begin(), deltas.end());
  const double alpha1 = exploit.q;
  const double alpha2 = exploit.p;
  const double alpha3 = 1.0 - exploit.p - exploit.q;
  double residual = 0.0;
  for (double delta : grid) {
    const auto general = mode_distribution(delta, switch_distribution(epsilon, exploit));
    const auto c1 = corner_mode_distribution(Corner::ObserveOnly, delta, epsilon);
    const auto c2 = corner_mode_distribution(Corner::ControlOnly, delta, epsilon);
    const auto c3 = corner_mode_distribution(Corner::Silent, delta, epsilon);
    for (std::size_t j = 0; j < 5; ++j) {
      const double mix = alpha1 * c1.probs[j] + alpha2 * c2.probs[j] + alpha3 * c3.probs[j];
      residual = std::max(residual, std::abs(general.probs[j] - mix));
    }
  }
  return residual;
}

}  // namespace muxncs
