#pragma once

// Log-det barrier solver for the joint Lyapunov program
//
//   minimize t  subject to  I <= V <= kappa I,
//                           sum_j w_cj G_j^T V G_j - V <= t I   for every case c.
//
// The constraints are homogeneous in V, so the lower bound V >= I fixes the
// scale and kappa keeps the program bounded below. A strictly negative optimal
// t proves a common decrease certificate exists.

#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "muxncs/error.hpp"
#include "muxncs/linalg.hpp"

namespace muxncs::lmi {

/// sum_j weight_j * G_j^T V G_j
struct WeightedTerm {
  double weight;
  Matrix gamma;
};
using LyapunovCase = std::vector<WeightedTerm>;

inline Matrix apply_case(const LyapunovCase& terms, const Matrix& v) {
  Matrix out = Matrix::Zero(v.rows(), v.cols());
  for (const auto& term : terms) {
    if (term.weight != 0.0) out.noalias() += term.weight * (term.gamma.transpose() * v * term.gamma);
  }
  return out;
}

/// max eigenvalue of L_c(V) - V, computed directly from the mode matrices.
inline double decrease_margin(const LyapunovCase& terms, const Matrix& v) {
  return max_symmetric_eigenvalue(apply_case(terms, v) - v);
}

struct SolverOptions {
  double kappa = 1e6;
  /// Feasible means every margin is below -strict_threshold.
  double strict_threshold = 1e-9;
  /// Stop optimizing once the verified margins reach this value.
  double early_exit_margin = -1e-6;
  double gap_tolerance = 1e-11;
  int max_newton_steps = 200;
  int max_outer_iterations = 60;
  double mu_growth = 8.0;
};

struct SolveResult {
  bool feasible = false;
  Matrix v;
  std::vector<double> margins;  // verified, one per case
  double best_margin = std::numeric_limits<double>::infinity();  // max over cases at the best iterate
  double lower_bound = -std::numeric_limits<double>::infinity();  // on the optimal t
  int newton_steps = 0;
};

namespace detail {

/// Symmetric basis E_i with unit entries at (a, b) and (b, a).
inline std::vector<Matrix> symmetric_basis(Eigen::Index d) {
  std::vector<Matrix> basis;
  for (Eigen::Index a = 0; a < d; ++a) {
    for (Eigen::Index b = a; b < d; ++b) {
      Matrix e = Matrix::Zero(d, d);
      e(a, b) = 1.0;
      e(b, a) = 1.0;
      basis.push_back(std::move(e));
    }
  }
  return basis;
}

/// Affine matrix function F(y) = F0 + sum_i y_i F_i that must stay positive definite.
struct AffineBlock {
  Matrix constant;
  std::vector<Matrix> coefficients;  // one per variable

  Matrix evaluate(const Vector& y) const {
    Matrix f = constant;
    for (Eigen::Index i = 0; i < y.size(); ++i) {
      const auto& c = coefficients[static_cast<std::size_t>(i)];
      if (c.size() != 0) f.noalias() += y(i) * c;
    }
    return f;
  }
};

class BarrierProblem {
 public:
  BarrierProblem(const std::vector<LyapunovCase>& cases, Eigen::Index d, double kappa) : d_(d) {
    const auto basis = symmetric_basis(d);
    num_v_ = static_cast<Eigen::Index>(basis.size());
    const auto nvar = num_v_ + 1;
    const Matrix identity = Matrix::Identity(d, d);

    AffineBlock lower{-identity, std::vector<Matrix>(static_cast<std::size_t>(nvar))};
    AffineBlock upper{kappa * identity, std::vector<Matrix>(static_cast<std::size_t>(nvar))};
    for (Eigen::Index i = 0; i < num_v_; ++i) {
      lower.coefficients[static_cast<std::size_t>(i)] = basis[static_cast<std::size_t>(i)];
      upper.coefficients[static_cast<std::size_t>(i)] = -basis[static_cast<std::size_t>(i)];
    }
    blocks_.push_back(std::move(lower));
    blocks_.push_back(std::move(upper));

    for (const auto& terms : cases) {
      AffineBlock decrease{Matrix::Zero(d, d), std::vector<Matrix>(static_cast<std::size_t>(nvar))};
      for (Eigen::Index i = 0; i < num_v_; ++i) {
        const auto& e = basis[static_cast<std::size_t>(i)];
        decrease.coefficients[static_cast<std::size_t>(i)] = -(apply_case(terms, e) - e);
      }
      decrease.coefficients[static_cast<std::size_t>(num_v_)] = identity;
      blocks_.push_back(std::move(decrease));
    }
  }

  Eigen::Index num_variables() const { return num_v_ + 1; }
  Eigen::Index t_index() const { return num_v_; }
  double barrier_degree() const { return static_cast<double>(blocks_.size()) * static_cast<double>(d_); }

  Matrix v_of(const Vector& y) const {
    Matrix v = Matrix::Zero(d_, d_);
    Eigen::Index i = 0;
    for (Eigen::Index a = 0; a < d_; ++a) {
      for (Eigen::Index b = a; b < d_; ++b, ++i) {
        v(a, b) += y(i);
        if (a != b) v(b, a) += y(i);
      }
    }
    return v;
  }

  Vector y_of(const Matrix& v, double t) const {
    Vector y(num_variables());
    Eigen::Index i = 0;
    for (Eigen::Index a = 0; a < d_; ++a) {
      for (Eigen::Index b = a; b < d_; ++b, ++i) y(i) = (a == b) ? v(a, a) : 0.5 * (v(a, b) + v(b, a));
    }
    y(num_v_) = t;
    return y;
  }

  /// Barrier value sum -log det F_b(y); nullopt outside the domain.
  std::optional<double> barrier(const Vector& y) const {
    double value = 0.0;
    for (const auto& block : blocks_) {
      Eigen::LLT<Matrix> llt(block.evaluate(y));
      if (llt.info() != Eigen::Success) return std::nullopt;
      const Matrix& l = llt.matrixL();
      for (Eigen::Index k = 0; k < l.rows(); ++k) {
        if (!(l(k, k) > 0.0)) return std::nullopt;
        value -= 2.0 * std::log(l(k, k));
      }
    }
    return value;
  }

  /// Gradient and Hessian of the barrier at an interior point.
  void derivatives(const Vector& y, Vector& grad, Matrix& hess) const {
    const auto nvar = num_variables();
    grad = Vector::Zero(nvar);
    hess = Matrix::Zero(nvar, nvar);
    std::vector<Matrix> s(static_cast<std::size_t>(nvar));
    for (const auto& block : blocks_) {
      Eigen::LLT<Matrix> llt(block.evaluate(y));
      if (llt.info() != Eigen::Success) throw NumericalError("barrier derivative requested outside the domain");
      for (Eigen::Index i = 0; i < nvar; ++i) {
        const auto& c = block.coefficients[static_cast<std::size_t>(i)];
        s[static_cast<std::size_t>(i)] = c.size() == 0 ? Matrix() : Matrix(llt.solve(c));
      }
      for (Eigen::Index i = 0; i < nvar; ++i) {
        const auto& si = s[static_cast<std::size_t>(i)];
        if (si.size() == 0) continue;
        grad(i) -= si.trace();
        for (Eigen::Index j = i; j < nvar; ++j) {
          const auto& sj = s[static_cast<std::size_t>(j)];
          if (sj.size() == 0) continue;
          // tr(S_i S_j)
          const double h = (si.array() * sj.transpose().array()).sum();
          hess(i, j) += h;
          if (j != i) hess(j, i) += h;
        }
      }
    }
  }

 private:
  Eigen::Index d_;
  Eigen::Index num_v_ = 0;
  std::vector<AffineBlock> blocks_;
};

}  // namespace detail

/// Searches for a common V. `cases` must be non-empty and share the matrix size.
inline SolveResult solve_common_lyapunov(const std::vector<LyapunovCase>& cases, const SolverOptions& opts = {}) {
  if (cases.empty() || cases.front().empty()) throw ConfigError("at least one non-empty Lyapunov case is required");
  const auto d = cases.front().front().gamma.rows();
  for (const auto& c : cases) {
    for (const auto& term : c) {
      if (term.gamma.rows() != d || term.gamma.cols() != d) throw ConfigError("mode matrices differ in size");
      if (!term.gamma.allFinite() || !std::isfinite(term.weight)) throw NumericalError("non-finite mode data");
    }
  }

  const detail::BarrierProblem problem(cases, d, opts.kappa);
  const auto nvar = problem.num_variables();
  const auto t_idx = problem.t_index();

  auto verified = [&](const Matrix& v) {
    std::vector<double> margins;
    margins.reserve(cases.size());
    for (const auto& c : cases) margins.push_back(decrease_margin(c, v));
    return margins;
  };
  auto worst = [](const std::vector<double>& m) {
    double w = -std::numeric_limits<double>::infinity();
    for (double x : m) w = std::max(w, x);
    return w;
  };

  SolveResult result;
  const double v_start = std::min(2.0, 0.5 * (1.0 + opts.kappa));
  Matrix v0 = v_start * Matrix::Identity(d, d);
  auto margins0 = verified(v0);
  Vector y = problem.y_of(v0, worst(margins0) + 1.0);
  result.v = v0;
  result.margins = margins0;
  result.best_margin = worst(margins0);

  auto record = [&](const Vector& point) {
    const Matrix v = problem.v_of(point);
    auto m = verified(v);
    const double w = worst(m);
    if (w < result.best_margin) {
      result.best_margin = w;
      result.margins = std::move(m);
      result.v = v;
    }
  };

  double mu = 1.0;
  Vector grad;
  Matrix hess;
  for (int outer = 0; outer < opts.max_outer_iterations; ++outer) {
    // Centering: minimize mu * t + barrier(y).
    for (int step = 0; step < opts.max_newton_steps; ++step) {
      problem.derivatives(y, grad, hess);
      grad(t_idx) += mu;
      Eigen::LDLT<Matrix> ldlt(hess);
      if (ldlt.info() != Eigen::Success) throw NumericalError("barrier Hessian factorization failed");
      const Vector dir = -ldlt.solve(grad);
      if (!dir.allFinite()) throw NumericalError("non-finite Newton direction");
      const double decrement_sq = -grad.dot(dir);
      ++result.newton_steps;
      if (decrement_sq < 2e-10) break;

      const auto current = problem.barrier(y);
      if (!current) throw NumericalError("barrier iterate left the domain");
      const double f0 = mu * y(t_idx) + *current;
      double alpha = 1.0;
      bool accepted = false;
      for (int ls = 0; ls < 60; ++ls, alpha *= 0.5) {
        const Vector trial = y + alpha * dir;
        const auto b = problem.barrier(trial);
        if (b && mu * trial(t_idx) + *b <= f0 - 0.25 * alpha * decrement_sq) {
          y = trial;
          accepted = true;
          break;
        }
      }
      if (!accepted) break;
    }
    record(y);
    result.lower_bound = y(t_idx) - problem.barrier_degree() / mu;

    if (result.best_margin <= opts.early_exit_margin) break;
    if (result.lower_bound >= -opts.strict_threshold) break;  // optimum cannot reach strict feasibility
    if (problem.barrier_degree() / mu < opts.gap_tolerance) break;
    mu *= opts.mu_growth;
  }

  if (!result.v.allFinite()) throw NumericalError("solver produced a non-finite Lyapunov matrix");
  result.feasible = result.best_margin < -opts.strict_threshold && min_symmetric_eigenvalue(result.v) >= 1.0 - 1e-9;
  return result;
}

}  // namespace muxncs::lmi
