#pragma once

// JSON run configuration:
// {"plant":{"A":[[...]],"B":[[...]],"C":[[...]],"K":[[...]]},"delta":0.8,
//  "cost":{"Q":[[...]],"R":[[...]],"lambda":0.5,"beta":0.95},"horizon":200,"seed":12345}

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "muxncs/error.hpp"
#include "muxncs/linalg.hpp"
#include "muxncs/model.hpp"
#include "muxncs/sim.hpp"

namespace muxncs {

inline Matrix matrix_from_json(const nlohmann::json& j, const std::string& field) {
  if (!j.is_array() || j.empty()) throw ParseError(field + ": expected a non-empty array of rows");
  const std::size_t rows = j.size();
  if (!j[0].is_array() || j[0].empty()) throw ParseError(field + ": rows must be non-empty arrays");
  const std::size_t cols = j[0].size();
  Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (std::size_t r = 0; r < rows; ++r) {
    if (!j[r].is_array() || j[r].size() != cols) throw ParseError(field + ": row " + std::to_string(r) + " has the wrong length");
    for (std::size_t c = 0; c < cols; ++c) {
      if (!j[r][c].is_number()) throw ParseError(field + ": non-numeric entry at (" + std::to_string(r) + "," + std::to_string(c) + ")");
      m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = j[r][c].get<double>();
    }
  }
  return m;
}

inline nlohmann::json matrix_to_json(const Matrix& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline Vector vector_from_json(const nlohmann::json& j, const std::string& field) {
  if (!j.is_array() || j.empty()) throw ParseError(field + ": expected a non-empty array");
  Vector v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) throw ParseError(field + ": non-numeric entry");
    v(static_cast<Eigen::Index>(i)) = j[i].get<double>();
  }
  return v;
}

/// Accepts {"A","B","C","K"} at the top level or under "plant". C defaults to the identity.
inline PlantModel plant_from_json(const nlohmann::json& doc) {
  const nlohmann::json& p = doc.contains("plant") ? doc["plant"] : doc;
  for (const char* key : {"A", "B", "K"}) {
    if (!p.contains(key)) throw ParseError(std::string("plant.") + key + ": missing");
  }
  Matrix a = matrix_from_json(p["A"], "plant.A");
  Matrix c = p.contains("C") ? matrix_from_json(p["C"], "plant.C") : Matrix::Identity(a.rows(), a.rows());
  return PlantModel(std::move(a), matrix_from_json(p["B"], "plant.B"), std::move(c), matrix_from_json(p["K"], "plant.K"));
}

struct RunConfig {
  PlantModel plant;
  double delta = 0.8;
  std::optional<double> epsilon;
  CostWeights cost;
  std::size_t horizon = 200;
  std::uint64_t seed = 12345;
  Vector x0;  // Monte-Carlo initial state

  NetworkConfig network() const { return {delta, seed, horizon}; }
};

inline RunConfig run_config_from_json(const nlohmann::json& doc) {
  if (!doc.is_object()) throw ParseError("config: expected a JSON object");
  PlantModel plant = plant_from_json(doc);
  const auto n = plant.n();
  const auto m = plant.m();
  CostWeights cost = CostWeights::identity(n, m);
  if (doc.contains("cost")) {
    const auto& c = doc["cost"];
    if (c.contains("Q")) cost.Q = matrix_from_json(c["Q"], "cost.Q");
    if (c.contains("R")) cost.R = matrix_from_json(c["R"], "cost.R");
    if (c.contains("lambda")) cost.lambda = c["lambda"].get<double>();
    if (c.contains("beta")) cost.beta = c["beta"].get<double>();
  }
  cost.validate(n, m);

  RunConfig cfg{std::move(plant), 0.8, std::nullopt, std::move(cost), 200, 12345, Vector::Ones(n)};
  if (doc.contains("delta")) cfg.delta = doc["delta"].get<double>();
  if (doc.contains("epsilon") && !doc["epsilon"].is_null()) cfg.epsilon = doc["epsilon"].get<double>();
  if (doc.contains("horizon")) cfg.horizon = doc["horizon"].get<std::size_t>();
  if (doc.contains("seed")) cfg.seed = doc["seed"].get<std::uint64_t>();
  if (doc.contains("x0")) cfg.x0 = vector_from_json(doc["x0"], "x0");
  if (cfg.x0.size() != n) throw ParseError("x0: expected length " + std::to_string(n));
  cfg.network().validate();
  if (cfg.epsilon) detail::require_unit(*cfg.epsilon, "epsilon");
  return cfg;
}

inline nlohmann::json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

}  // namespace muxncs
