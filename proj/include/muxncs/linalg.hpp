#pragma once

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <cmath>
#include <span>
#include <vector>

#include "muxncs/error.hpp"

namespace muxncs {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Largest |eigenvalue| of a general real square matrix.
inline double spectral_radius(const Matrix& m) {
  if (m.rows() == 0) return 0.0;
  Eigen::EigenSolver<Matrix> solver(m, /*computeEigenvectors=*/false);
  if (solver.info() != Eigen::Success) {
    throw NumericalError("eigenvalue iteration did not converge on a " + std::to_string(m.rows()) + "x" +
                         std::to_string(m.cols()) + " matrix");
  }
  return solver.eigenvalues().cwiseAbs().maxCoeff();
}

/// Largest eigenvalue of a symmetric matrix (upper triangle is not trusted; the matrix is symmetrized).
inline double max_symmetric_eigenvalue(const Matrix& m) {
  const Matrix sym = 0.5 * (m + m.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix> solver(sym, Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success) throw NumericalError("symmetric eigensolver failed");
  return solver.eigenvalues().maxCoeff();
}

inline double min_symmetric_eigenvalue(const Matrix& m) {
  const Matrix sym = 0.5 * (m + m.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix> solver(sym, Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success) throw NumericalError("symmetric eigensolver failed");
  return solver.eigenvalues().minCoeff();
}

/// Neumaier-compensated accumulator; summing the same values in the same order is bit-reproducible.
class CompensatedSum {
 public:
  void add(double v) {
    const double t = sum_ + v;
    if (std::abs(sum_) >= std::abs(v)) {
      comp_ += (sum_ - t) + v;
    } else {
      comp_ += (v - t) + sum_;
    }
    sum_ = t;
  }
  double value() const { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

inline double compensated_sum(std::span<const double> values) {
  CompensatedSum acc;
  for (double v : values) acc.add(v);
  return acc.value();
}

}  // namespace muxncs
