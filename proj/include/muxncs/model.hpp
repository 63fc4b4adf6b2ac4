#pragma once

// Plant, emulated controller, predictor and network events, and the
// jump-linear form zeta_{k+1} = Gamma_mode * zeta_k built from them.

#include <array>
#include <string>

#include "muxncs/error.hpp"
#include "muxncs/linalg.hpp"

namespace muxncs {

/// Scheduler decision for one step.
enum class Switch : int { Control = 1, Silent = 0, Observe = -1 };

inline int to_int(Switch s) { return static_cast<int>(s); }

inline Switch switch_from_int(int s) {
  switch (s) {
    case 1: return Switch::Control;
    case 0: return Switch::Silent;
    case -1: return Switch::Observe;
    default: throw DomainError("switch value must be one of {1, 0, -1}, got " + std::to_string(s));
  }
}

enum class Outcome { Success, Failure, NotApplicable };

/// The five jump modes. Numeric values are the conventional mode indices 1..5.
enum class Mode : int { ControlDelivered = 1, ControlLost = 2, ObservationDelivered = 3, ObservationLost = 4, Idle = 5 };

inline int mode_index(Mode m) { return static_cast<int>(m); }

inline Mode mode_from_index(int i) {
  if (i < 1 || i > 5) throw DomainError("mode index must be in 1..5, got " + std::to_string(i));
  return static_cast<Mode>(i);
}

inline constexpr std::array<Mode, 5> kAllModes = {Mode::ControlDelivered, Mode::ControlLost,
                                                  Mode::ObservationDelivered, Mode::ObservationLost, Mode::Idle};

inline Switch mode_switch(Mode m) {
  switch (m) {
    case Mode::ControlDelivered:
    case Mode::ControlLost: return Switch::Control;
    case Mode::ObservationDelivered:
    case Mode::ObservationLost: return Switch::Observe;
    case Mode::Idle: break;
  }
  return Switch::Silent;
}

inline Outcome mode_outcome(Mode m) {
  switch (m) {
    case Mode::ControlDelivered:
    case Mode::ObservationDelivered: return Outcome::Success;
    case Mode::ControlLost:
    case Mode::ObservationLost: return Outcome::Failure;
    case Mode::Idle: break;
  }
  return Outcome::NotApplicable;
}

/// Silence ignores the drop indicator.
inline Mode mode_from_events(Switch sigma, bool delivered) {
  switch (sigma) {
    case Switch::Control: return delivered ? Mode::ControlDelivered : Mode::ControlLost;
    case Switch::Observe: return delivered ? Mode::ObservationDelivered : Mode::ObservationLost;
    case Switch::Silent: break;
  }
  return Mode::Idle;
}

/// x+ = A x + B u, y = C x, with nominal feedback u = K x.
/// C is kept for completeness; the observation link carries the full state.
class PlantModel {
 public:
  PlantModel(Matrix a, Matrix b, Matrix c, Matrix k) : a_(std::move(a)), b_(std::move(b)), c_(std::move(c)), k_(std::move(k)) {
    const auto n = a_.rows();
    const auto m = b_.cols();
    if (n == 0 || a_.cols() != n) throw ConfigError("A must be square and non-empty, got " + shape(a_));
    if (b_.rows() != n || m == 0) throw ConfigError("B must be " + std::to_string(n) + "xm, got " + shape(b_));
    if (c_.cols() != n || c_.rows() == 0) throw ConfigError("C must be rx" + std::to_string(n) + ", got " + shape(c_));
    if (k_.rows() != m || k_.cols() != n) {
      throw ConfigError("K must be " + std::to_string(m) + "x" + std::to_string(n) + ", got " + shape(k_));
    }
    if (!a_.allFinite() || !b_.allFinite() || !c_.allFinite() || !k_.allFinite()) {
      throw ConfigError("plant matrices must be finite");
    }
  }

  const Matrix& A() const { return a_; }
  const Matrix& B() const { return b_; }
  const Matrix& C() const { return c_; }
  const Matrix& K() const { return k_; }

  Eigen::Index n() const { return a_.rows(); }
  Eigen::Index m() const { return b_.cols(); }
  Eigen::Index r() const { return c_.rows(); }
  Eigen::Index augmented_dim() const { return 2 * n() + m(); }

  /// rho(A + B K); the emulated controller is assumed to make this < 1.
  double closed_loop_spectral_radius() const { return spectral_radius(a_ + b_ * k_); }

 private:
  static std::string shape(const Matrix& m) { return std::to_string(m.rows()) + "x" + std::to_string(m.cols()); }

  Matrix a_, b_, c_, k_;
};

/// zeta_k = (x_k, xhat_{k-1}, uhat_{k-1}).
struct AugmentedState {
  Vector x;
  Vector xhat_prev;
  Vector uhat_prev;

  /// The predictor starts at the true state and the held control at zero.
  static AugmentedState initial(const Vector& x0, Eigen::Index m) { return {x0, x0, Vector::Zero(m)}; }

  Vector flatten() const {
    Vector z(x.size() + xhat_prev.size() + uhat_prev.size());
    z << x, xhat_prev, uhat_prev;
    return z;
  }

  static AugmentedState unflatten(const Vector& z, Eigen::Index n, Eigen::Index m) {
    if (z.size() != 2 * n + m) {
      throw ConfigError("augmented vector has length " + std::to_string(z.size()) + ", expected " +
                        std::to_string(2 * n + m));
    }
    return {z.segment(0, n), z.segment(n, n), z.segment(2 * n, m)};
  }

  double squared_norm() const { return x.squaredNorm() + xhat_prev.squaredNorm() + uhat_prev.squaredNorm(); }
};

/// One step of the networked loop from its component equations:
/// predictor, then held control, then plant.
inline AugmentedState step_components(const PlantModel& plant, const AugmentedState& state, Switch sigma, bool delivered) {
  const Matrix& a = plant.A();
  const Matrix& b = plant.B();
  if (state.x.size() != plant.n() || state.xhat_prev.size() != plant.n() || state.uhat_prev.size() != plant.m()) {
    throw ConfigError("state dimensions do not match the plant");
  }
  Vector xhat = (sigma == Switch::Observe && delivered) ? Vector(state.x) : Vector(a * state.xhat_prev + b * state.uhat_prev);
  Vector uhat = (sigma == Switch::Control && delivered) ? Vector(plant.K() * xhat) : Vector(state.uhat_prev);
  Vector x_next = a * state.x + b * uhat;
  return {std::move(x_next), std::move(xhat), std::move(uhat)};
}

/// Mode matrices of the jump-linear system. Modes 2, 4 and 5 share one matrix by construction.
class ModeSet {
 public:
  /// control: mode 1; observe: mode 3; hold: modes 2, 4, 5.
  ModeSet(Matrix control, Matrix observe, Matrix hold, Eigen::Index n, Eigen::Index m)
      : control_(std::move(control)), observe_(std::move(observe)), hold_(std::move(hold)), n_(n), m_(m) {
    const auto d = dim();
    for (const Matrix* g : {&control_, &observe_, &hold_}) {
      if (g->rows() != d || g->cols() != d) throw ConfigError("mode matrices must be " + std::to_string(d) + "x" + std::to_string(d));
    }
  }

  const Matrix& gamma(Mode mode) const {
    switch (mode) {
      case Mode::ControlDelivered: return control_;
      case Mode::ObservationDelivered: return observe_;
      case Mode::ControlLost:
      case Mode::ObservationLost:
      case Mode::Idle: break;
    }
    return hold_;
  }

  const Matrix& control() const { return control_; }
  const Matrix& observe() const { return observe_; }
  const Matrix& hold() const { return hold_; }

  Eigen::Index n() const { return n_; }
  Eigen::Index m() const { return m_; }
  Eigen::Index dim() const { return 2 * n_ + m_; }

  /// Same structure with every matrix multiplied by `factor`.
  ModeSet scaled(double factor) const { return {factor * control_, factor * observe_, factor * hold_, n_, m_}; }

 private:
  Matrix control_, observe_, hold_;
  Eigen::Index n_, m_;
};

/// Block rows are the x, xhat and uhat updates:
///   Gamma_1  = [[A, BKA, BKB], [0, A, B], [0, KA, KB]]
///   Gamma_-1 = [[A, 0, B], [I, 0, 0], [0, 0, I]]
///   Gamma_0  = [[A, 0, B], [0, A, B], [0, 0, I]]
inline ModeSet build_mode_set(const PlantModel& plant) {
  const auto n = plant.n();
  const auto m = plant.m();
  const Matrix& a = plant.A();
  const Matrix& b = plant.B();
  const Matrix& k = plant.K();
  const auto d = 2 * n + m;

  Matrix control = Matrix::Zero(d, d);
  control.block(0, 0, n, n) = a;
  control.block(0, n, n, n) = b * k * a;
  control.block(0, 2 * n, n, m) = b * k * b;
  control.block(n, n, n, n) = a;
  control.block(n, 2 * n, n, m) = b;
  control.block(2 * n, n, m, n) = k * a;
  control.block(2 * n, 2 * n, m, m) = k * b;

  Matrix observe = Matrix::Zero(d, d);
  observe.block(0, 0, n, n) = a;
  observe.block(0, 2 * n, n, m) = b;
  observe.block(n, 0, n, n) = Matrix::Identity(n, n);
  observe.block(2 * n, 2 * n, m, m) = Matrix::Identity(m, m);

  Matrix hold = Matrix::Zero(d, d);
  hold.block(0, 0, n, n) = a;
  hold.block(0, 2 * n, n, m) = b;
  hold.block(n, n, n, n) = a;
  hold.block(n, 2 * n, n, m) = b;
  hold.block(2 * n, 2 * n, m, m) = Matrix::Identity(m, m);

  return {std::move(control), std::move(observe), std::move(hold), n, m};
}

inline AugmentedState step_augmented(const ModeSet& modes, const AugmentedState& state, Mode mode) {
  return AugmentedState::unflatten(modes.gamma(mode) * state.flatten(), modes.n(), modes.m());
}

}  // namespace muxncs
