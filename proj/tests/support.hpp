#pragma once

#include <random>

#include "muxncs/model.hpp"

namespace muxncs::testing {

inline PlantModel paper_plant() {
  Matrix a(2, 2), b(2, 1), k(1, 2);
  a << 1.0, 0.1, 0.0, 1.0;
  b << 0.0, 1.0;
  k << -0.012, -0.07;
  return PlantModel(a, b, Matrix::Identity(2, 2), k);
}

inline Matrix random_matrix(std::mt19937_64& gen, Eigen::Index rows, Eigen::Index cols, double scale = 1.0) {
  std::uniform_real_distribution<double> u(-scale, scale);
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = u(gen);
  }
  return m;
}

inline Vector random_vector(std::mt19937_64& gen, Eigen::Index n, double scale = 1.0) {
  return random_matrix(gen, n, 1, scale).col(0);
}

/// Random plant with n in [1, 4] and m in [1, 3].
inline PlantModel random_plant(std::mt19937_64& gen) {
  std::uniform_int_distribution<int> nd(1, 4), md(1, 3);
  const Eigen::Index n = nd(gen);
  const Eigen::Index m = md(gen);
  return PlantModel(random_matrix(gen, n, n), random_matrix(gen, n, m), Matrix::Identity(n, n), random_matrix(gen, m, n));
}

inline AugmentedState random_state(std::mt19937_64& gen, const PlantModel& plant, double scale = 10.0) {
  return {random_vector(gen, plant.n(), scale), random_vector(gen, plant.n(), scale), random_vector(gen, plant.m(), scale)};
}

inline double relative_error(const Vector& a, const Vector& b) {
  const double denom = std::max({1.0, a.norm(), b.norm()});
  return (a - b).norm() / denom;
}

}  // namespace muxncs::testing
