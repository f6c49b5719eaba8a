#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "hetsched/rng.hpp"

namespace hetsched::nn {

using Vector = std::vector<double>;

/// Row-major dense matrix, shape [rows x cols].
struct Matrix {
  int rows = 0;
  int cols = 0;
  std::vector<double> a;

  Matrix() = default;
  Matrix(int r, int c) : rows(r), cols(c), a(static_cast<std::size_t>(r) * c, 0.0) {}

  double& at(int r, int c) { return a[static_cast<std::size_t>(r) * cols + c]; }
  double at(int r, int c) const { return a[static_cast<std::size_t>(r) * cols + c]; }
};

enum class Activation { relu, identity };

inline std::string to_string(Activation act) {
  return act == Activation::relu ? "relu" : "identity";
}

inline Activation activation_from_string(const std::string& s) {
  if (s == "relu") return Activation::relu;
  if (s == "identity") return Activation::identity;
  throw std::invalid_argument("unknown activation '" + s + "'");
}

struct Layer {
  Matrix weights;  // [out x in]
  Vector biases;   // [out]
  Activation activation = Activation::identity;
};

/// Fully connected net. Layer shapes compose; parameters stay finite.
struct DenseNet {
  std::vector<Layer> layers;
  std::uint64_t init_seed = 0;

  int input_dim() const { return layers.front().weights.cols; }
  int output_dim() const { return layers.back().weights.rows; }

  std::size_t param_count() const {
    std::size_t n = 0;
    for (const auto& l : layers) n += l.weights.a.size() + l.biases.size();
    return n;
  }
};

/// He-uniform init (limit sqrt(6/fan_in)), zero biases, byte-reproducible
/// for a fixed seed. Hidden layers are relu, the final layer identity.
inline DenseNet make_dense_net(const std::vector<int>& widths, std::uint64_t seed) {
  if (widths.size() < 2) throw std::invalid_argument("a net needs at least input and output");
  Rng rng(seed);
  DenseNet net;
  net.init_seed = seed;
  for (std::size_t i = 0; i + 1 < widths.size(); ++i) {
    Layer layer;
    layer.weights = Matrix(widths[i + 1], widths[i]);
    layer.biases.assign(static_cast<std::size_t>(widths[i + 1]), 0.0);
    layer.activation = (i + 2 < widths.size()) ? Activation::relu : Activation::identity;
    const double limit = std::sqrt(6.0 / widths[i]);
    for (double& w : layer.weights.a) w = rng.uniform(-limit, limit);
    net.layers.push_back(std::move(layer));
  }
  return net;
}

struct ForwardCache {
  std::vector<Vector> inputs;    // input to each layer
  std::vector<Vector> preacts;   // affine output before activation
  Vector output;
};

inline ForwardCache forward(const DenseNet& net, std::span<const double> x) {
  if (static_cast<int>(x.size()) != net.input_dim())
    throw std::invalid_argument("forward: input has dimension " + std::to_string(x.size()) +
                                ", net expects " + std::to_string(net.input_dim()));
  ForwardCache cache;
  Vector cur(x.begin(), x.end());
  for (const auto& layer : net.layers) {
    cache.inputs.push_back(cur);
    Vector z(layer.biases);
    for (int r = 0; r < layer.weights.rows; ++r) {
      double acc = z[static_cast<std::size_t>(r)];
      const double* wrow = &layer.weights.a[static_cast<std::size_t>(r) * layer.weights.cols];
      for (int c = 0; c < layer.weights.cols; ++c) acc += wrow[c] * cur[static_cast<std::size_t>(c)];
      z[static_cast<std::size_t>(r)] = acc;
    }
    cache.preacts.push_back(z);
    if (layer.activation == Activation::relu)
      for (double& v : z) v = v > 0.0 ? v : 0.0;
    cur = std::move(z);
  }
  cache.output = cur;
  return cache;
}

struct Gradients {
  std::vector<Matrix> d_weights;
  std::vector<Vector> d_biases;
  Vector d_input;  // gradient w.r.t. the net input, used for saliency

  void add_scaled(const Gradients& other, double scale) {
    for (std::size_t l = 0; l < d_weights.size(); ++l) {
      for (std::size_t i = 0; i < d_weights[l].a.size(); ++i)
        d_weights[l].a[i] += scale * other.d_weights[l].a[i];
      for (std::size_t i = 0; i < d_biases[l].size(); ++i)
        d_biases[l][i] += scale * other.d_biases[l][i];
    }
  }

  bool finite() const {
    for (const auto& m : d_weights)
      for (double v : m.a)
        if (!std::isfinite(v)) return false;
    for (const auto& b : d_biases)
      for (double v : b)
        if (!std::isfinite(v)) return false;
    return true;
  }
};

inline Gradients zero_gradients(const DenseNet& net) {
  Gradients g;
  for (const auto& layer : net.layers) {
    g.d_weights.emplace_back(layer.weights.rows, layer.weights.cols);
    g.d_biases.emplace_back(layer.biases.size(), 0.0);
  }
  g.d_input.assign(static_cast<std::size_t>(net.input_dim()), 0.0);
  return g;
}

/// Exact reverse-mode gradients of the scalar objective whose output
/// gradient is `d_output`, for the forward pass captured in `cache`.
inline Gradients backward(const DenseNet& net, const ForwardCache& cache,
                          std::span<const double> d_output) {
  if (static_cast<int>(d_output.size()) != net.output_dim())
    throw std::invalid_argument("backward: output gradient has wrong dimension");
  Gradients g = zero_gradients(net);
  Vector delta(d_output.begin(), d_output.end());
  for (int l = static_cast<int>(net.layers.size()) - 1; l >= 0; --l) {
    const auto& layer = net.layers[static_cast<std::size_t>(l)];
    const auto& z = cache.preacts[static_cast<std::size_t>(l)];
    const auto& in = cache.inputs[static_cast<std::size_t>(l)];
    if (layer.activation == Activation::relu)
      for (std::size_t i = 0; i < delta.size(); ++i)
        if (z[i] <= 0.0) delta[i] = 0.0;
    auto& dw = g.d_weights[static_cast<std::size_t>(l)];
    for (int r = 0; r < layer.weights.rows; ++r) {
      const double d = delta[static_cast<std::size_t>(r)];
      g.d_biases[static_cast<std::size_t>(l)][static_cast<std::size_t>(r)] = d;
      double* drow = &dw.a[static_cast<std::size_t>(r) * dw.cols];
      for (int c = 0; c < dw.cols; ++c) drow[c] = d * in[static_cast<std::size_t>(c)];
    }
    Vector prev(static_cast<std::size_t>(layer.weights.cols), 0.0);
    for (int r = 0; r < layer.weights.rows; ++r) {
      const double d = delta[static_cast<std::size_t>(r)];
      const double* wrow = &layer.weights.a[static_cast<std::size_t>(r) * layer.weights.cols];
      for (int c = 0; c < layer.weights.cols; ++c) prev[static_cast<std::size_t>(c)] += d * wrow[c];
    }
    delta = std::move(prev);
  }
  g.d_input = std::move(delta);
  return g;
}

/// Max-shifted softmax with temperature: p_i ∝ exp(l_i/tau - max_j l_j/tau).
inline Vector softmax_temperature(std::span<const double> logits, double tau) {
  if (tau <= 0.0) throw std::invalid_argument("softmax temperature must be positive");
  double m = logits[0] / tau;
  for (double l : logits) m = std::max(m, l / tau);
  Vector p(logits.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    p[i] = std::exp(logits[i] / tau - m);
    sum += p[i];
  }
  for (double& v : p) v /= sum;
  return p;
}

/// log softmax_temperature, computed without forming the probabilities.
inline Vector log_softmax_temperature(std::span<const double> logits, double tau) {
  if (tau <= 0.0) throw std::invalid_argument("softmax temperature must be positive");
  double m = logits[0] / tau;
  for (double l : logits) m = std::max(m, l / tau);
  double sum = 0.0;
  for (double l : logits) sum += std::exp(l / tau - m);
  const double lse = m + std::log(sum);
  Vector out(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) out[i] = logits[i] / tau - lse;
  return out;
}

// ---------------------------------------------------------------------------
// Optimizers

inline void sgd_step(DenseNet& net, const Gradients& g, double lr) {
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    auto& layer = net.layers[l];
    for (std::size_t i = 0; i < layer.weights.a.size(); ++i)
      layer.weights.a[i] -= lr * g.d_weights[l].a[i];
    for (std::size_t i = 0; i < layer.biases.size(); ++i)
      layer.biases[i] -= lr * g.d_biases[l][i];
  }
}

struct AdamState {
  std::vector<Matrix> m_w, v_w;
  std::vector<Vector> m_b, v_b;
  long step = 0;

  static AdamState like(const DenseNet& net) {
    AdamState s;
    for (const auto& layer : net.layers) {
      s.m_w.emplace_back(layer.weights.rows, layer.weights.cols);
      s.v_w.emplace_back(layer.weights.rows, layer.weights.cols);
      s.m_b.emplace_back(layer.biases.size(), 0.0);
      s.v_b.emplace_back(layer.biases.size(), 0.0);
    }
    return s;
  }
};

/// Adam with bias correction.
inline void adam_step(DenseNet& net, const Gradients& g, AdamState& state, double lr,
                      double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8) {
  ++state.step;
  const double c1 = 1.0 - std::pow(beta1, state.step);
  const double c2 = 1.0 - std::pow(beta2, state.step);
  auto update = [&](double& w, double grad, double& m, double& v) {
    m = beta1 * m + (1.0 - beta1) * grad;
    v = beta2 * v + (1.0 - beta2) * grad * grad;
    w -= lr * (m / c1) / (std::sqrt(v / c2) + eps);
  };
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    auto& layer = net.layers[l];
    for (std::size_t i = 0; i < layer.weights.a.size(); ++i)
      update(layer.weights.a[i], g.d_weights[l].a[i], state.m_w[l].a[i], state.v_w[l].a[i]);
    for (std::size_t i = 0; i < layer.biases.size(); ++i)
      update(layer.biases[i], g.d_biases[l][i], state.m_b[l][i], state.v_b[l][i]);
  }
}

// ---------------------------------------------------------------------------
// Checkpoints: versioned JSON, bit-exact round trip (nlohmann serializes
// doubles with shortest round-trip precision).

inline nlohmann::json save_net(const DenseNet& net) {
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& l : net.layers)
    layers.push_back({{"rows", l.weights.rows},
                      {"cols", l.weights.cols},
                      {"activation", to_string(l.activation)},
                      {"weights", l.weights.a},
                      {"biases", l.biases}});
  return nlohmann::json{{"format", "hetsched-dense-net"},
                        {"version", 1},
                        {"init_seed", net.init_seed},
                        {"layers", layers}};
}

inline DenseNet load_net(const nlohmann::json& j) {
  if (j.value("format", "") != "hetsched-dense-net" || j.value("version", 0) != 1)
    throw std::invalid_argument("not a version-1 hetsched-dense-net checkpoint");
  DenseNet net;
  net.init_seed = j.at("init_seed").get<std::uint64_t>();
  for (const auto& lj : j.at("layers")) {
    Layer l;
    l.weights = Matrix(lj.at("rows").get<int>(), lj.at("cols").get<int>());
    l.weights.a = lj.at("weights").get<std::vector<double>>();
    l.biases = lj.at("biases").get<Vector>();
    l.activation = activation_from_string(lj.at("activation").get<std::string>());
    if (l.weights.a.size() !=
            static_cast<std::size_t>(l.weights.rows) * static_cast<std::size_t>(l.weights.cols) ||
        l.biases.size() != static_cast<std::size_t>(l.weights.rows))
      throw std::invalid_argument("checkpoint layer shapes are inconsistent");
    net.layers.push_back(std::move(l));
  }
  if (net.layers.empty()) throw std::invalid_argument("checkpoint has no layers");
  for (std::size_t i = 0; i + 1 < net.layers.size(); ++i)
    if (net.layers[i].weights.rows != net.layers[i + 1].weights.cols)
      throw std::invalid_argument("checkpoint layer shapes do not compose");
  return net;
}

}  // namespace hetsched::nn
