#pragma once

// Dense rectifier network Q(s, .; theta) with three outputs ordered (sigma = 1, 0, -1).

#include <cmath>
#include <cstdint>
#include <cstring>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "muxncs/error.hpp"
#include "muxncs/linalg.hpp"
#include "muxncs/model.hpp"
#include "muxncs/rng.hpp"

namespace muxncs {

inline constexpr int kNumActions = 3;

inline int action_index(Switch s) {
  switch (s) {
    case Switch::Control: return 0;
    case Switch::Silent: return 1;
    case Switch::Observe: break;
  }
  return 2;
}

inline Switch action_switch(int index) {
  static constexpr Switch table[kNumActions] = {Switch::Control, Switch::Silent, Switch::Observe};
  if (index < 0 || index >= kNumActions) throw DomainError("action index out of range: " + std::to_string(index));
  return table[index];
}

/// argmax over Q-values; ties go to sigma = 0, then sigma = 1, then sigma = -1.
inline Switch greedy_switch(const Vector& q) {
  int best = 1;
  if (q(0) > q(best)) best = 0;
  if (q(2) > q(best)) best = 2;
  return action_switch(best);
}

struct DenseLayer {
  Matrix w;  // out x in
  Vector b;  // out
};

class QNetwork {
 public:
  QNetwork() = default;

  /// Layer sizes {input, hidden..., outputs}; outputs must be 3.
  explicit QNetwork(std::vector<DenseLayer> layers) : layers_(std::move(layers)) { check_shapes(); }

  /// Weights and biases uniform in +-1/sqrt(fan_in).
  static QNetwork initialized(const std::vector<int>& arch, Rng& rng) {
    validate_arch(arch);
    std::vector<DenseLayer> layers;
    for (std::size_t i = 0; i + 1 < arch.size(); ++i) {
      const double bound = 1.0 / std::sqrt(static_cast<double>(arch[i]));
      DenseLayer layer{Matrix(arch[i + 1], arch[i]), Vector(arch[i + 1])};
      for (Eigen::Index r = 0; r < layer.w.rows(); ++r) {
        for (Eigen::Index c = 0; c < layer.w.cols(); ++c) layer.w(r, c) = rng.uniform(-bound, bound);
      }
      for (Eigen::Index r = 0; r < layer.b.size(); ++r) layer.b(r) = rng.uniform(-bound, bound);
      layers.push_back(std::move(layer));
    }
    return QNetwork(std::move(layers));
  }

  static QNetwork zeros(const std::vector<int>& arch) {
    validate_arch(arch);
    std::vector<DenseLayer> layers;
    for (std::size_t i = 0; i + 1 < arch.size(); ++i) {
      layers.push_back({Matrix::Zero(arch[i + 1], arch[i]), Vector::Zero(arch[i + 1])});
    }
    return QNetwork(std::move(layers));
  }

  static void validate_arch(const std::vector<int>& arch) {
    if (arch.size() < 2) throw ConfigError("network needs at least an input and an output layer");
    for (int a : arch) {
      if (a < 1) throw ConfigError("layer sizes must be positive");
    }
    if (arch.back() != kNumActions) throw ConfigError("output layer must have 3 units");
  }

  std::vector<int> arch() const {
    std::vector<int> a;
    if (layers_.empty()) return a;
    a.push_back(static_cast<int>(layers_.front().w.cols()));
    for (const auto& l : layers_) a.push_back(static_cast<int>(l.w.rows()));
    return a;
  }

  Eigen::Index input_dim() const { return layers_.empty() ? 0 : layers_.front().w.cols(); }
  const std::vector<DenseLayer>& layers() const { return layers_; }
  std::vector<DenseLayer>& layers() { return layers_; }

  bool finite() const {
    for (const auto& l : layers_) {
      if (!l.w.allFinite() || !l.b.allFinite()) return false;
    }
    return true;
  }

  /// Affine-rectifier stack; the last layer is affine only.
  Vector forward(const Vector& state) const {
    if (state.size() != input_dim()) {
      throw ConfigError("network input has length " + std::to_string(state.size()) + ", expected " +
                        std::to_string(input_dim()));
    }
    if (!state.allFinite()) throw NumericalError("non-finite network input");
    Vector h = state;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      Vector z = layers_[i].w * h + layers_[i].b;
      h = (i + 1 < layers_.size()) ? Vector(z.cwiseMax(0.0)) : z;
    }
    return h;
  }

  /// Column-wise batch evaluation.
  Matrix forward_batch(const Matrix& states) const {
    Matrix h = states;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      Matrix z = layers_[i].w * h;
      z.colwise() += layers_[i].b;
      h = (i + 1 < layers_.size()) ? Matrix(z.cwiseMax(0.0)) : z;
    }
    return h;
  }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& l : layers_) n += static_cast<std::size_t>(l.w.size() + l.b.size());
    return n;
  }

  /// FNV-1a over the raw parameter bytes.
  std::uint64_t fingerprint() const {
    std::uint64_t h = 1469598103934665603ull;
    auto mix = [&h](const double* data, Eigen::Index count) {
      const auto* bytes = reinterpret_cast<const unsigned char*>(data);
      for (std::size_t i = 0; i < static_cast<std::size_t>(count) * sizeof(double); ++i) {
        h ^= bytes[i];
        h *= 1099511628211ull;
      }
    };
    for (const auto& l : layers_) {
      mix(l.w.data(), l.w.size());
      mix(l.b.data(), l.b.size());
    }
    return h;
  }

 private:
  void check_shapes() const {
    if (layers_.empty()) throw ConfigError("network has no layers");
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      if (layers_[i].b.size() != layers_[i].w.rows()) throw ConfigError("bias length does not match layer output");
      if (i > 0 && layers_[i].w.cols() != layers_[i - 1].w.rows()) throw ConfigError("consecutive layer sizes disagree");
    }
    if (layers_.back().w.rows() != kNumActions) throw ConfigError("output layer must have 3 units");
  }

  std::vector<DenseLayer> layers_;
};

/// Parameter-shaped gradient buffers.
using Gradients = std::vector<DenseLayer>;

inline Gradients zero_gradients(const QNetwork& net) {
  Gradients g;
  for (const auto& l : net.layers()) g.push_back({Matrix::Zero(l.w.rows(), l.w.cols()), Vector::Zero(l.b.size())});
  return g;
}

/// Loss mean_i (Q(s_i, a_i) - y_i)^2 and its gradient by backpropagation. States are columns.
inline double squared_td_loss(const QNetwork& net, const Matrix& states, std::span<const int> actions,
                              const Vector& targets, Gradients* grad) {
  const auto batch = states.cols();
  if (batch == 0) throw DomainError("empty batch");
  if (static_cast<Eigen::Index>(actions.size()) != batch || targets.size() != batch) {
    throw ConfigError("batch arrays disagree in length");
  }
  const auto& layers = net.layers();
  const std::size_t depth = layers.size();

  std::vector<Matrix> pre(depth);   // z_i
  std::vector<Matrix> post(depth);  // activations feeding layer i+1
  Matrix h = states;
  for (std::size_t i = 0; i < depth; ++i) {
    pre[i] = layers[i].w * h;
    pre[i].colwise() += layers[i].b;
    post[i] = (i + 1 < depth) ? Matrix(pre[i].cwiseMax(0.0)) : pre[i];
    h = post[i];
  }

  const double scale = 1.0 / static_cast<double>(batch);
  Matrix delta = Matrix::Zero(kNumActions, batch);
  double loss = 0.0;
  for (Eigen::Index j = 0; j < batch; ++j) {
    const int a = actions[static_cast<std::size_t>(j)];
    if (a < 0 || a >= kNumActions) throw DomainError("action index out of range");
    const double err = post[depth - 1](a, j) - targets(j);
    loss += err * err;
    delta(a, j) = 2.0 * err * scale;
  }
  loss *= scale;
  if (!grad) return loss;

  grad->resize(depth);
  for (std::size_t i = depth; i-- > 0;) {
    const Matrix& input = i == 0 ? states : post[i - 1];
    (*grad)[i].w.noalias() = delta * input.transpose();
    (*grad)[i].b = delta.rowwise().sum();
    if (i == 0) break;
    Matrix back = layers[i].w.transpose() * delta;
    delta = back.cwiseProduct((pre[i - 1].array() > 0.0).cast<double>().matrix());
  }
  return loss;
}

enum class OptimizerKind { Sgd, Adam };

/// Plain gradient descent or Adam (beta1 0.9, beta2 0.999, eps 1e-8).
class Optimizer {
 public:
  Optimizer(OptimizerKind kind, double learning_rate) : kind_(kind), lr_(learning_rate) {
    if (!(learning_rate > 0.0)) throw DomainError("learning rate must be positive");
  }

  void step(QNetwork& net, const Gradients& grad) {
    auto& layers = net.layers();
    if (kind_ == OptimizerKind::Sgd) {
      for (std::size_t i = 0; i < layers.size(); ++i) {
        layers[i].w.noalias() -= lr_ * grad[i].w;
        layers[i].b.noalias() -= lr_ * grad[i].b;
      }
      return;
    }
    if (m_.empty()) {
      m_ = zero_gradients(net);
      v_ = zero_gradients(net);
    }
    ++t_;
    const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    const double step = lr_ * std::sqrt(c2) / c1;
    const double eps_hat = eps_ * std::sqrt(c2);
    for (std::size_t i = 0; i < layers.size(); ++i) {
      update(layers[i].w, m_[i].w, v_[i].w, grad[i].w, step, eps_hat);
      update(layers[i].b, m_[i].b, v_[i].b, grad[i].b, step, eps_hat);
    }
  }

  OptimizerKind kind() const { return kind_; }
  double learning_rate() const { return lr_; }

 private:
  template <typename P>
  void update(P& param, P& m, P& v, const P& g, double step, double eps_hat) {
    m = beta1_ * m + (1.0 - beta1_) * g;
    v = beta2_ * v + (1.0 - beta2_) * g.cwiseAbs2();
    param.array() -= step * m.array() / (v.array().sqrt() + eps_hat);
  }

  OptimizerKind kind_;
  double lr_;
  double beta1_ = 0.9;
  double beta2_ = 0.999;
  double eps_ = 1e-8;
  std::uint64_t t_ = 0;
  Gradients m_, v_;
};

// ---- persistence ----

inline nlohmann::json save_weights(const QNetwork& net, const nlohmann::json& meta = nlohmann::json::object()) {
  nlohmann::json doc;
  doc["arch"] = net.arch();
  doc["layers"] = nlohmann::json::array();
  for (const auto& l : net.layers()) {
    nlohmann::json w = nlohmann::json::array();
    for (Eigen::Index r = 0; r < l.w.rows(); ++r) {
      std::vector<double> row(static_cast<std::size_t>(l.w.cols()));
      for (Eigen::Index c = 0; c < l.w.cols(); ++c) row[static_cast<std::size_t>(c)] = l.w(r, c);
      w.push_back(std::move(row));
    }
    std::vector<double> b(l.b.data(), l.b.data() + l.b.size());
    doc["layers"].push_back({{"w", std::move(w)}, {"b", std::move(b)}});
  }
  doc["meta"] = meta;
  return doc;
}

inline QNetwork load_weights(const nlohmann::json& doc) {
  if (!doc.is_object() || doc.empty()) throw ParseError("weights document is empty or not an object");
  if (!doc.contains("arch") || !doc["arch"].is_array()) throw ParseError("arch: missing or not an array");
  if (!doc.contains("layers") || !doc["layers"].is_array()) throw ParseError("layers: missing or not an array");
  std::vector<int> arch;
  for (const auto& a : doc["arch"]) {
    if (!a.is_number_integer() || a.get<long long>() < 1) throw ParseError("arch: entries must be positive integers");
    arch.push_back(a.get<int>());
  }
  try {
    QNetwork::validate_arch(arch);
  } catch (const ConfigError& e) {
    throw ParseError(std::string("arch: ") + e.what());
  }
  const auto& layers = doc["layers"];
  if (layers.size() + 1 != arch.size()) {
    throw ParseError("layers: expected " + std::to_string(arch.size() - 1) + " layers, found " + std::to_string(layers.size()));
  }
  std::vector<DenseLayer> out;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const std::string where = "layers[" + std::to_string(i) + "]";
    const auto& layer = layers[i];
    const int rows = arch[i + 1];
    const int cols = arch[i];
    if (!layer.is_object() || !layer.contains("w") || !layer.contains("b")) throw ParseError(where + ": needs \"w\" and \"b\"");
    const auto& w = layer["w"];
    const auto& b = layer["b"];
    const std::size_t found_cols = (w.is_array() && !w.empty() && w[0].is_array()) ? w[0].size() : 0;
    if (!w.is_array() || static_cast<int>(w.size()) != rows) {
      throw ParseError(where + ".w: expected shape " + std::to_string(rows) + "x" + std::to_string(cols) + ", found " +
                       std::to_string(w.is_array() ? w.size() : 0) + "x" + std::to_string(found_cols));
    }
    DenseLayer dl{Matrix(rows, cols), Vector(rows)};
    for (int r = 0; r < rows; ++r) {
      const auto& row = w[static_cast<std::size_t>(r)];
      if (!row.is_array() || static_cast<int>(row.size()) != cols) {
        throw ParseError(where + ".w: expected shape " + std::to_string(rows) + "x" + std::to_string(cols) + ", found row " +
                         std::to_string(r) + " of length " + std::to_string(row.is_array() ? row.size() : 0));
      }
      for (int c = 0; c < cols; ++c) {
        const auto& v = row[static_cast<std::size_t>(c)];
        if (!v.is_number()) throw ParseError(where + ".w: non-numeric entry");
        dl.w(r, c) = v.get<double>();
      }
    }
    if (!b.is_array() || static_cast<int>(b.size()) != rows) {
      throw ParseError(where + ".b: expected length " + std::to_string(rows) + ", found " +
                       std::to_string(b.is_array() ? b.size() : 0));
    }
    for (int r = 0; r < rows; ++r) {
      if (!b[static_cast<std::size_t>(r)].is_number()) throw ParseError(where + ".b: non-numeric entry");
      dl.b(r) = b[static_cast<std::size_t>(r)].get<double>();
    }
    out.push_back(std::move(dl));
  }
  QNetwork net(std::move(out));
  if (!net.finite()) throw ParseError("layers: non-finite weights");
  return net;
}

}  // namespace muxncs
