#pragma once

// Fully connected Q-network: rectifier hidden layers, linear output.
// Templated on the scalar so training runs in float and gradient checks in
// double.

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cnc/common.hpp"
#include "cnc/random.hpp"

namespace cnc {

template <typename T>
struct DenseLayer {
  std::size_t in = 0;
  std::size_t out = 0;
  std::vector<T> weights;  // out x in, row-major
  std::vector<T> bias;

  DenseLayer() = default;
  DenseLayer(std::size_t in_dim, std::size_t out_dim)
      : in(in_dim), out(out_dim), weights(in_dim * out_dim, T(0)), bias(out_dim, T(0)) {}

  const T* row(std::size_t r) const { return weights.data() + r * in; }
  T* row(std::size_t r) { return weights.data() + r * in; }

  friend bool operator==(const DenseLayer&, const DenseLayer&) = default;
};

template <typename T>
inline T dot(const T* a, const T* b, std::size_t n) {
  T s = T(0);
#pragma omp simd reduction(+ : s)
  for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

template <typename T>
class Mlp {
 public:
  // Per-layer activations kept for backprop; reused across calls.
  struct Workspace {
    std::vector<std::vector<T>> activations;  // [0] = input, [l+1] = output of layer l
  };

  Mlp() = default;

  // Zero-initialised network with the given layer sizes (input first).
  explicit Mlp(const std::vector<std::size_t>& sizes) {
    if (sizes.size() < 2) throw ShapeError("Mlp needs at least an input and an output size");
    for (std::size_t i = 0; i + 1 < sizes.size(); ++i) {
      if (sizes[i] == 0 || sizes[i + 1] == 0) throw ShapeError("Mlp layer sizes must be positive");
      layers_.emplace_back(sizes[i], sizes[i + 1]);
    }
  }

  // Zero biases, weights uniform in +-sqrt(6 / (fan_in + fan_out)).
  static Mlp glorot(const std::vector<std::size_t>& sizes, Rng& rng) {
    Mlp net(sizes);
    for (auto& layer : net.layers_) {
      const double limit = std::sqrt(6.0 / static_cast<double>(layer.in + layer.out));
      for (auto& w : layer.weights) w = static_cast<T>(rng.uniform(-limit, limit));
    }
    return net;
  }

  std::vector<std::size_t> sizes() const {
    std::vector<std::size_t> s;
    if (layers_.empty()) return s;
    s.push_back(layers_.front().in);
    for (const auto& l : layers_) s.push_back(l.out);
    return s;
  }
  std::size_t input_dim() const { return layers_.empty() ? 0 : layers_.front().in; }
  std::size_t output_dim() const { return layers_.empty() ? 0 : layers_.back().out; }
  std::vector<DenseLayer<T>>& layers() { return layers_; }
  const std::vector<DenseLayer<T>>& layers() const { return layers_; }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& l : layers_) n += l.weights.size() + l.bias.size();
    return n;
  }

  bool all_finite() const {
    for (const auto& l : layers_) {
      for (T w : l.weights)
        if (!std::isfinite(w)) return false;
      for (T b : l.bias)
        if (!std::isfinite(b)) return false;
    }
    return true;
  }

  std::vector<T> forward(std::span<const T> x) const {
    Workspace ws;
    forward(x, ws);
    return ws.activations.back();
  }

  // Full forward pass; result in ws.activations.back().
  void forward(std::span<const T> x, Workspace& ws) const {
    forward_hidden(x, ws);
    const auto& last = layers_.back();
    auto& out = ws.activations[layers_.size()];
    out.resize(last.out);
    const auto& h = ws.activations[layers_.size() - 1];
    for (std::size_t r = 0; r < last.out; ++r) out[r] = last.bias[r] + dot(last.row(r), h.data(), last.in);
  }

  // Hidden layers only; the caller evaluates the output rows it needs.
  void forward_hidden(std::span<const T> x, Workspace& ws) const {
    if (layers_.empty()) throw ShapeError("forward on an empty network");
    if (x.size() != input_dim())
      throw ShapeError("forward: expected input of size " + std::to_string(input_dim()) + ", got " +
                       std::to_string(x.size()));
    ws.activations.resize(layers_.size() + 1);
    ws.activations[0].assign(x.begin(), x.end());
    for (std::size_t l = 0; l + 1 < layers_.size(); ++l) {
      const auto& layer = layers_[l];
      const auto& in = ws.activations[l];
      auto& out = ws.activations[l + 1];
      out.resize(layer.out);
      for (std::size_t r = 0; r < layer.out; ++r) {
        const T z = layer.bias[r] + dot(layer.row(r), in.data(), layer.in);
        out[r] = z > T(0) ? z : T(0);
      }
    }
  }

  // Output unit r after forward_hidden.
  T output_row(const Workspace& ws, std::size_t r) const {
    const auto& last = layers_.back();
    return last.bias[r] + dot(last.row(r), ws.activations[layers_.size() - 1].data(), last.in);
  }

  friend bool operator==(const Mlp&, const Mlp&) = default;

 private:
  std::vector<DenseLayer<T>> layers_;
};

template <typename T>
struct MlpGradients {
  std::vector<std::vector<T>> weights;
  std::vector<std::vector<T>> bias;

  explicit MlpGradients(const Mlp<T>& net) {
    for (const auto& l : net.layers()) {
      weights.emplace_back(l.weights.size(), T(0));
      bias.emplace_back(l.bias.size(), T(0));
    }
  }

  void zero() {
    for (auto& w : weights) std::fill(w.begin(), w.end(), T(0));
    for (auto& b : bias) std::fill(b.begin(), b.end(), T(0));
  }

  T squared_norm() const {
    T s = T(0);
    for (const auto& w : weights)
      for (T v : w) s += v * v;
    for (const auto& b : bias)
      for (T v : b) s += v * v;
    return s;
  }

  void scale(T k) {
    for (auto& w : weights)
      for (T& v : w) v *= k;
    for (auto& b : bias)
      for (T& v : b) v *= k;
  }
};

// Adds d(loss)/d(params) for a loss whose derivative w.r.t. output unit
// `unit` is `grad_out` (all other outputs have zero derivative). Expects the
// hidden activations of the same input in ws.
template <typename T>
void backprop_single_output(const Mlp<T>& net, const typename Mlp<T>::Workspace& ws, std::size_t unit, T grad_out,
                            MlpGradients<T>& grads, std::vector<T>& delta, std::vector<T>& next_delta) {
  const auto& layers = net.layers();
  const std::size_t L = layers.size();
  const auto& last = layers[L - 1];
  {
    const auto& h = ws.activations[L - 1];
    T* gw = grads.weights[L - 1].data() + unit * last.in;
#pragma omp simd
    for (std::size_t j = 0; j < last.in; ++j) gw[j] += grad_out * h[j];
    grads.bias[L - 1][unit] += grad_out;
    if (L == 1) return;
    delta.resize(last.in);
    const T* w = last.row(unit);
    for (std::size_t j = 0; j < last.in; ++j) delta[j] = h[j] > T(0) ? grad_out * w[j] : T(0);
  }
  for (std::size_t l = L - 1; l-- > 0;) {
    const auto& layer = layers[l];
    const auto& in = ws.activations[l];
    auto& gw = grads.weights[l];
    auto& gb = grads.bias[l];
    for (std::size_t r = 0; r < layer.out; ++r) {
      const T d = delta[r];
      if (d == T(0)) continue;
      T* g = gw.data() + r * layer.in;
#pragma omp simd
      for (std::size_t j = 0; j < layer.in; ++j) g[j] += d * in[j];
      gb[r] += d;
    }
    if (l == 0) break;
    next_delta.assign(layer.in, T(0));
    for (std::size_t r = 0; r < layer.out; ++r) {
      const T d = delta[r];
      if (d == T(0)) continue;
      const T* w = layer.row(r);
#pragma omp simd
      for (std::size_t j = 0; j < layer.in; ++j) next_delta[j] += d * w[j];
    }
    for (std::size_t j = 0; j < layer.in; ++j)
      if (!(in[j] > T(0))) next_delta[j] = T(0);
    std::swap(delta, next_delta);
  }
}

template <typename T>
class AdamOptimizer {
 public:
  AdamOptimizer() = default;
  explicit AdamOptimizer(const Mlp<T>& net, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : m_(net), v_(net), beta1_(beta1), beta2_(beta2), eps_(eps) {}

  void step(Mlp<T>& net, const MlpGradients<T>& g, double lr) {
    ++t_;
    const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    const T step_size = static_cast<T>(lr * std::sqrt(c2) / c1);
    const T b1 = static_cast<T>(beta1_), b2 = static_cast<T>(beta2_), e = static_cast<T>(eps_ * std::sqrt(c2));
    auto update = [&](std::vector<T>& p, const std::vector<T>& grad, std::vector<T>& m, std::vector<T>& v) {
      for (std::size_t i = 0; i < p.size(); ++i) {
        m[i] = b1 * m[i] + (T(1) - b1) * grad[i];
        v[i] = b2 * v[i] + (T(1) - b2) * grad[i] * grad[i];
        p[i] -= step_size * m[i] / (std::sqrt(v[i]) + e);
      }
    };
    auto& layers = net.layers();
    for (std::size_t l = 0; l < layers.size(); ++l) {
      update(layers[l].weights, g.weights[l], m_->weights[l], v_->weights[l]);
      update(layers[l].bias, g.bias[l], m_->bias[l], v_->bias[l]);
    }
  }

 private:
  std::optional<MlpGradients<T>> m_;
  std::optional<MlpGradients<T>> v_;
  double beta1_ = 0.9;
  double beta2_ = 0.999;
  double eps_ = 1e-8;
  std::int64_t t_ = 0;
};

}  // namespace cnc
