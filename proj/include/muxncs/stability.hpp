#pragma once

// Mean-square stability: the Kronecker second-moment test, the common-V
// corner-case certificate, and the bisection search for the exploration rate.

#include <array>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "muxncs/error.hpp"
#include "muxncs/linalg.hpp"
#include "muxncs/lmi.hpp"
#include "muxncs/markov.hpp"
#include "muxncs/model.hpp"
#include "muxncs/parallel.hpp"

namespace muxncs {

/// Common Lyapunov matrix V (lambda_min(V) >= 1) with the verified corner margins.
struct StabilityCertificate {
  Matrix v;
  std::array<double, 3> margins{};  // C1, C2, C3; all < 0
  double epsilon = 0.0;
  double delta = 0.0;
};

/// E[zeta_k' zeta_k] <= zeta_const * xi^k * zeta_0' zeta_0, fitted from data.
struct DecayEstimate {
  double zeta_const = 1.0;
  double xi = 0.0;
  double r_squared = 0.0;
};

/// sum_j P_j Gamma_j' V Gamma_j written as weighted terms for the LMI solver.
inline lmi::LyapunovCase lyapunov_case(const ModeDistribution& dist, const ModeSet& modes) {
  lmi::LyapunovCase terms;
  for (Mode mode : kAllModes) terms.push_back({dist[mode], modes.gamma(mode)});
  return terms;
}

/// max eigenvalue of sum_j P_j Gamma_j' V Gamma_j - V.
inline double lyapunov_margin(const Matrix& v, const ModeDistribution& dist, const ModeSet& modes) {
  Matrix acc = -v;
  for (Mode mode : kAllModes) {
    const Matrix& g = modes.gamma(mode);
    acc += dist[mode] * (g.transpose() * v * g);
  }
  return max_symmetric_eigenvalue(acc);
}

/// rho(sum_j P_j Gamma_j (x) Gamma_j). Below 1 iff the i.i.d. jump system is mean-square stable.
inline double spectral_radius_mss(const ModeDistribution& dist, const ModeSet& modes) {
  const auto d = modes.dim();
  Matrix second_moment = Matrix::Zero(d * d, d * d);
  for (Mode mode : kAllModes) {
    const double p = dist[mode];
    if (p == 0.0) continue;
    const Matrix& g = modes.gamma(mode);
    for (Eigen::Index i = 0; i < d; ++i) {
      for (Eigen::Index j = 0; j < d; ++j) second_moment.block(i * d, j * d, d, d) += (p * g(i, j)) * g;
    }
  }
  return spectral_radius(second_moment);
}

/// Outcome of one joint feasibility solve. `certificate` is empty when infeasible.
struct FeasibilityOutcome {
  std::optional<StabilityCertificate> certificate;
  std::array<double, 3> best_margins{};

  bool certified() const { return certificate.has_value(); }
  double worst_margin() const { return std::max({best_margins[0], best_margins[1], best_margins[2]}); }
};

inline constexpr double kStrictMargin = 1e-9;

/// Re-verifies a certificate from scratch against the three corner distributions.
inline bool verify_certificate(const StabilityCertificate& cert, const ModeSet& modes, double threshold = kStrictMargin) {
  const Matrix asym = cert.v - cert.v.transpose();
  if (asym.cwiseAbs().maxCoeff() > 1e-10) return false;
  if (min_symmetric_eigenvalue(cert.v) < 1.0 - 1e-9) return false;
  for (Corner c : kCorners) {
    const auto dist = corner_mode_distribution(c, cert.delta, cert.epsilon);
    if (!(lyapunov_margin(cert.v, dist, modes) < -threshold)) return false;
  }
  return true;
}

/// Joint feasibility for C1, C2, C3 at (delta, epsilon). Throws NumericalError on solver failure.
inline FeasibilityOutcome lmi_feasible(double delta, double epsilon, const ModeSet& modes,
                                       const lmi::SolverOptions& opts = {}) {
  detail::require_delta(delta);
  detail::require_unit(epsilon, "epsilon");
  std::vector<lmi::LyapunovCase> cases;
  for (Corner c : kCorners) cases.push_back(lyapunov_case(corner_mode_distribution(c, delta, epsilon), modes));

  const auto solved = lmi::solve_common_lyapunov(cases, opts);
  FeasibilityOutcome out;
  const Matrix v = 0.5 * (solved.v + solved.v.transpose());
  // Margins are recomputed here, independently of the solver's own bookkeeping.
  for (std::size_t c = 0; c < 3; ++c) {
    out.best_margins[c] = lyapunov_margin(v, corner_mode_distribution(kCorners[c], delta, epsilon), modes);
  }
  if (solved.feasible && out.worst_margin() < -opts.strict_threshold && min_symmetric_eigenvalue(v) >= 1.0 - 1e-9) {
    out.certificate = StabilityCertificate{v, out.best_margins, epsilon, delta};
  }
  return out;
}

/// Raised when the coarse pre-scan contradicts monotone feasibility in epsilon.
class NonMonotoneFeasibility : public NumericalError {
 public:
  NonMonotoneFeasibility(double delta, std::vector<std::pair<double, bool>> grid)
      : NumericalError(describe(delta, grid)), grid_(std::move(grid)) {}
  const std::vector<std::pair<double, bool>>& grid() const { return grid_; }

 private:
  static std::string describe(double delta, const std::vector<std::pair<double, bool>>& grid) {
    std::ostringstream os;
    os << "feasibility is not monotone in epsilon at delta=" << delta << "; pre-scan:";
    for (const auto& [eps, ok] : grid) os << ' ' << eps << (ok ? ":feasible" : ":infeasible");
    return os.str();
  }
  std::vector<std::pair<double, bool>> grid_;
};

struct EpsilonSearch {
  double delta = 0.0;
  /// Empty when even epsilon = 1 is infeasible.
  std::optional<double> epsilon_bar;
  std::optional<StabilityCertificate> certificate;
  std::vector<std::pair<double, bool>> prescan;
  /// Best margins at epsilon = 1 when no epsilon is feasible.
  std::array<double, 3> margins_at_one{};

  bool found() const { return epsilon_bar.has_value(); }
};

struct SearchOptions {
  double tolerance = 1e-3;
  int prescan_points = 21;
  lmi::SolverOptions solver{};
};

/// Smallest epsilon in [0, 1] (within tolerance) whose corner LMIs admit a common V.
inline EpsilonSearch find_epsilon_bar(double delta, const ModeSet& modes, const SearchOptions& opts = {}) {
  detail::require_delta(delta);
  if (!(opts.tolerance > 0.0)) throw DomainError("bisection tolerance must be positive");
  if (opts.prescan_points < 2) throw DomainError("pre-scan needs at least two points");

  EpsilonSearch search;
  search.delta = delta;
  std::vector<FeasibilityOutcome> outcomes;
  for (int i = 0; i < opts.prescan_points; ++i) {
    const double eps = static_cast<double>(i) / static_cast<double>(opts.prescan_points - 1);
    outcomes.push_back(lmi_feasible(delta, eps, modes, opts.solver));
    search.prescan.emplace_back(eps, outcomes.back().certified());
  }

  std::optional<std::size_t> first_feasible;
  for (std::size_t i = 0; i < search.prescan.size(); ++i) {
    if (search.prescan[i].second) {
      if (!first_feasible) first_feasible = i;
    } else if (first_feasible) {
      throw NonMonotoneFeasibility(delta, search.prescan);
    }
  }
  if (!first_feasible) {
    search.margins_at_one = outcomes.back().best_margins;
    return search;
  }
  if (*first_feasible == 0) {
    search.epsilon_bar = 0.0;
    search.certificate = outcomes.front().certificate;
    return search;
  }

  double lo = search.prescan[*first_feasible - 1].first;
  double hi = search.prescan[*first_feasible].first;
  auto best = outcomes[*first_feasible].certificate;
  while (hi - lo > opts.tolerance) {
    const double mid = 0.5 * (lo + hi);
    auto outcome = lmi_feasible(delta, mid, modes, opts.solver);
    if (outcome.certified()) {
      hi = mid;
      best = std::move(outcome.certificate);
    } else {
      lo = mid;
    }
  }
  search.epsilon_bar = hi;
  search.certificate = std::move(best);
  return search;
}

struct SweepRow {
  double delta = 0.0;
  std::optional<double> epsilon_bar;
  std::array<double, 3> margins{};
  std::string status;  // "certified", "no_feasible_epsilon", or "error: ..."
  std::optional<EpsilonSearch> search;
};

/// find_epsilon_bar per grid point; a failing point is recorded without aborting the sweep.
inline std::vector<SweepRow> sweep_delta(const std::vector<double>& grid, const ModeSet& modes,
                                         const SearchOptions& opts = {}) {
  for (double d : grid) detail::require_delta(d);
  std::vector<SweepRow> rows(grid.size());
  parallel_for(grid.size(), [&](std::size_t i) {
    SweepRow& row = rows[i];
    row.delta = grid[i];
    try {
      auto search = find_epsilon_bar(grid[i], modes, opts);
      if (search.found()) {
        row.epsilon_bar = search.epsilon_bar;
        row.margins = search.certificate->margins;
        row.status = "certified";
      } else {
        row.margins = search.margins_at_one;
        row.status = "no_feasible_epsilon";
      }
      row.search = std::move(search);
    } catch (const std::exception& e) {
      row.margins = {NAN, NAN, NAN};
      row.status = std::string("error: ") + e.what();
    }
  });
  return rows;
}

/// Shortest representation that round-trips exactly.
inline std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  char buf[40];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline void write_sweep_csv(std::ostream& os, const std::vector<SweepRow>& rows) {
  os << "delta,epsilon_bar,margin_c1,margin_c2,margin_c3,status\n";
  for (const auto& row : rows) {
    std::string status = row.status;
    for (char& ch : status) {
      if (ch == ',' || ch == '\n') ch = ';';
    }
    os << format_double(row.delta) << ',' << (row.epsilon_bar ? format_double(*row.epsilon_bar) : "nan") << ','
       << format_double(row.margins[0]) << ',' << format_double(row.margins[1]) << ',' << format_double(row.margins[2])
       << ',' << status << '\n';
  }
}

}  // namespace muxncs
