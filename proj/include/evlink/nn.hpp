#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "evlink/errors.hpp"
#include "evlink/random.hpp"

// Dense-network engine sized for the two scorers: float storage, double
// arithmetic inside every reduction.
namespace evlink::nn {

enum class Activation { Identity, Square, LogSoftmax };

inline std::string_view to_string(Activation a) {
  switch (a) {
    case Activation::Identity: return "identity";
    case Activation::Square: return "square";
    case Activation::LogSoftmax: return "log_softmax";
  }
  return "identity";
}

inline Activation parse_activation(std::string_view s) {
  if (s == "identity") return Activation::Identity;
  if (s == "square") return Activation::Square;
  if (s == "log_softmax") return Activation::LogSoftmax;
  throw ValidationError("unknown activation '" + std::string(s) + "'");
}

// y = act(W x + b), W is rows x cols (out x in), row-major.
struct DenseLayer {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<float> weights;
  std::vector<float> bias;
  Activation activation = Activation::Identity;

  static DenseLayer zeros(std::size_t rows, std::size_t cols, Activation act) {
    return {rows, cols, std::vector<float>(rows * cols, 0.0f), std::vector<float>(rows, 0.0f), act};
  }

  static DenseLayer identity(std::size_t n) {
    auto layer = zeros(n, n, Activation::Identity);
    for (std::size_t i = 0; i < n; ++i) layer.weights[i * n + i] = 1.0f;
    return layer;
  }

  // Weights uniform in +-1/sqrt(cols), zero bias.
  static DenseLayer uniform(std::size_t rows, std::size_t cols, Activation act, Rng& rng) {
    auto layer = zeros(rows, cols, act);
    const double bound = 1.0 / std::sqrt(static_cast<double>(cols));
    for (auto& w : layer.weights) w = static_cast<float>(rng.uniform(-bound, bound));
    return layer;
  }

  float& at(std::size_t r, std::size_t c) { return weights[r * cols + c]; }
  float at(std::size_t r, std::size_t c) const { return weights[r * cols + c]; }

  void check() const {
    if (rows == 0 || cols == 0 || weights.size() != rows * cols || bias.size() != rows) {
      throw DimensionError("dense layer has inconsistent shapes");
    }
  }

  bool operator==(const DenseLayer&) const = default;
};

inline std::vector<double> log_softmax(std::span<const double> z) {
  const double mx = *std::max_element(z.begin(), z.end());
  double sum = 0.0;
  for (double v : z) sum += std::exp(v - mx);
  const double lse = mx + std::log(sum);
  std::vector<double> out(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) out[i] = z[i] - lse;
  return out;
}

inline std::vector<double> softmax(std::span<const double> z) {
  auto out = log_softmax(z);
  for (auto& v : out) v = std::exp(v);
  return out;
}

// Inputs and pre-activations of every layer, kept for backward().
struct ForwardPass {
  std::vector<std::vector<double>> inputs;
  std::vector<std::vector<double>> pre;
  std::vector<double> output;
};

inline void affine(const DenseLayer& layer, std::span<const double> x, std::vector<double>& z) {
  z.assign(layer.rows, 0.0);
  for (std::size_t r = 0; r < layer.rows; ++r) {
    const float* w = layer.weights.data() + r * layer.cols;
    double acc = layer.bias[r];
    for (std::size_t c = 0; c < layer.cols; ++c) acc += static_cast<double>(w[c]) * x[c];
    z[r] = acc;
  }
}

inline std::vector<double> activate(Activation act, std::span<const double> z) {
  switch (act) {
    case Activation::Identity: return {z.begin(), z.end()};
    case Activation::Square: {
      std::vector<double> y(z.size());
      for (std::size_t i = 0; i < z.size(); ++i) y[i] = z[i] * z[i];
      return y;
    }
    case Activation::LogSoftmax: return log_softmax(z);
  }
  return {};
}

inline ForwardPass forward(std::span<const DenseLayer> layers, std::span<const double> x) {
  ForwardPass pass;
  std::vector<double> current(x.begin(), x.end());
  for (const auto& layer : layers) {
    if (layer.cols != current.size()) {
      throw DimensionError("layer expects input of size " + std::to_string(layer.cols) +
                           ", got " + std::to_string(current.size()));
    }
    std::vector<double> z;
    affine(layer, current, z);
    auto y = activate(layer.activation, z);
    pass.inputs.push_back(std::move(current));
    pass.pre.push_back(std::move(z));
    current = std::move(y);
  }
  pass.output = std::move(current);
  return pass;
}

inline ForwardPass forward(std::span<const DenseLayer> layers, std::span<const float> x) {
  std::vector<double> xd(x.begin(), x.end());
  return forward(layers, std::span<const double>(xd));
}

// Output only, without the cache.
template <typename T>
std::vector<double> evaluate(std::span<const DenseLayer> layers, std::span<const T> x) {
  std::vector<double> current(x.begin(), x.end());
  std::vector<double> z;
  for (const auto& layer : layers) {
    if (layer.cols != current.size()) throw DimensionError("layer input size mismatch");
    affine(layer, current, z);
    current = activate(layer.activation, z);
  }
  return current;
}

struct LayerGrad {
  std::vector<double> weights;
  std::vector<double> bias;
};

using Gradients = std::vector<LayerGrad>;

inline Gradients zero_gradients(std::span<const DenseLayer> layers) {
  Gradients g;
  for (const auto& l : layers) g.push_back({std::vector<double>(l.weights.size(), 0.0),
                                            std::vector<double>(l.bias.size(), 0.0)});
  return g;
}

inline void scale(Gradients& g, double s) {
  for (auto& l : g) {
    for (auto& v : l.weights) v *= s;
    for (auto& v : l.bias) v *= s;
  }
}

// Accumulates parameter gradients into `acc` given dL/d(output); returns
// dL/d(input).
inline std::vector<double> backward(std::span<const DenseLayer> layers, const ForwardPass& pass,
                                    std::span<const double> grad_output, Gradients& acc) {
  std::vector<double> g(grad_output.begin(), grad_output.end());
  for (std::size_t k = layers.size(); k-- > 0;) {
    const auto& layer = layers[k];
    const auto& z = pass.pre[k];
    const auto& x = pass.inputs[k];
    std::vector<double> dz(layer.rows);
    switch (layer.activation) {
      case Activation::Identity: dz = g; break;
      case Activation::Square:
        for (std::size_t i = 0; i < dz.size(); ++i) dz[i] = 2.0 * z[i] * g[i];
        break;
      case Activation::LogSoftmax: {
        const auto p = softmax(z);
        double total = 0.0;
        for (double v : g) total += v;
        for (std::size_t i = 0; i < dz.size(); ++i) dz[i] = g[i] - p[i] * total;
        break;
      }
    }
    auto& lg = acc[k];
    std::vector<double> dx(layer.cols, 0.0);
    for (std::size_t r = 0; r < layer.rows; ++r) {
      const double d = dz[r];
      lg.bias[r] += d;
      if (d == 0.0) continue;
      double* gw = lg.weights.data() + r * layer.cols;
      const float* w = layer.weights.data() + r * layer.cols;
      for (std::size_t c = 0; c < layer.cols; ++c) {
        gw[c] += d * x[c];
        dx[c] += d * static_cast<double>(w[c]);
      }
    }
    g = std::move(dx);
  }
  return g;
}

struct NllResult {
  double loss = 0.0;
  std::vector<double> grad_log_probs;  // -one_hot(target)
  std::vector<double> grad_logits;     // softmax - one_hot(target)
};

inline NllResult nll_loss(std::span<const double> log_probs, std::size_t target) {
  if (target >= log_probs.size()) {
    throw ValidationError("nll target " + std::to_string(target) + " out of range");
  }
  NllResult r;
  r.loss = -log_probs[target];
  r.grad_log_probs.assign(log_probs.size(), 0.0);
  r.grad_log_probs[target] = -1.0;
  r.grad_logits.resize(log_probs.size());
  for (std::size_t i = 0; i < log_probs.size(); ++i) {
    r.grad_logits[i] = std::exp(log_probs[i]) - (i == target ? 1.0 : 0.0);
  }
  return r;
}

template <typename T, typename U>
double dot(std::span<const T> a, std::span<const U> b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += static_cast<double>(a[i]) * b[i];
  return acc;
}

template <typename T>
double norm(std::span<const T> a) {
  return std::sqrt(dot(a, a));
}

template <typename T, typename U>
double cosine_similarity(std::span<const T> u, std::span<const U> v) {
  if (u.size() != v.size()) throw DimensionError("cosine of vectors with different dims");
  const double nu = norm(u);
  const double nv = norm(v);
  if (nu == 0.0 || nv == 0.0) throw UndefinedSimilarityError("cosine similarity of a zero vector");
  return dot(u, v) / (nu * nv);
}

inline double cosine_similarity(const std::vector<float>& u, const std::vector<float>& v) {
  return cosine_similarity(std::span<const float>(u), std::span<const float>(v));
}

struct CosineLoss {
  double loss = 0.0;
  double cosine = 0.0;
  std::vector<double> grad_t1;
  std::vector<double> grad_t2;
};

// (cos(t1, t2) - y)^2 with y = +1 for coreferent pairs and -1 otherwise.
inline CosineLoss mse_cosine_loss(std::span<const double> t1, std::span<const double> t2,
                                  bool coreferent) {
  if (t1.size() != t2.size()) throw DimensionError("cosine loss on vectors with different dims");
  const double n1 = norm(t1);
  const double n2 = norm(t2);
  if (n1 == 0.0 || n2 == 0.0) throw UndefinedSimilarityError("cosine loss on a zero vector");
  CosineLoss out;
  out.cosine = dot(t1, t2) / (n1 * n2);
  const double y = coreferent ? 1.0 : -1.0;
  const double diff = out.cosine - y;
  out.loss = diff * diff;
  const double dl = 2.0 * diff;
  out.grad_t1.resize(t1.size());
  out.grad_t2.resize(t2.size());
  for (std::size_t i = 0; i < t1.size(); ++i) {
    out.grad_t1[i] = dl * (t2[i] / (n1 * n2) - out.cosine * t1[i] / (n1 * n1));
    out.grad_t2[i] = dl * (t1[i] / (n1 * n2) - out.cosine * t2[i] / (n2 * n2));
  }
  return out;
}

struct AdamWConfig {
  double lr = 5e-6;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
};

struct AdamWState {
  AdamWConfig config;
  std::uint64_t t = 0;
  std::vector<double> m;
  std::vector<double> v;
};

// Decoupled weight decay:
//   m <- b1 m + (1-b1) g,  v <- b2 v + (1-b2) g^2
//   p <- p - lr (m_hat / (sqrt(v_hat) + eps) + wd p)
inline void adamw_step(std::span<float> params, std::span<const double> grads, AdamWState& s) {
  if (params.size() != grads.size()) throw DimensionError("adamw: params/grads size mismatch");
  for (std::size_t i = 0; i < grads.size(); ++i) {
    if (!std::isfinite(grads[i])) {
      throw NumericError("adamw: non-finite gradient at index " + std::to_string(i) +
                         " (step " + std::to_string(s.t + 1) + ")");
    }
  }
  if (s.m.empty()) {
    s.m.assign(params.size(), 0.0);
    s.v.assign(params.size(), 0.0);
  }
  if (s.m.size() != params.size()) throw DimensionError("adamw: state shape mismatch");
  const auto& c = s.config;
  ++s.t;
  const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(s.t));
  const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(s.t));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i];
    s.m[i] = c.beta1 * s.m[i] + (1.0 - c.beta1) * g;
    s.v[i] = c.beta2 * s.v[i] + (1.0 - c.beta2) * g * g;
    const double m_hat = s.m[i] / bc1;
    const double v_hat = s.v[i] / bc2;
    const double p = params[i];
    params[i] = static_cast<float>(p - c.lr * (m_hat / (std::sqrt(v_hat) + c.eps) +
                                               c.weight_decay * p));
  }
}

// One AdamW state per weight and bias tensor of a layer stack.
class AdamW {
 public:
  AdamW(std::span<const DenseLayer> layers, AdamWConfig config) {
    for (std::size_t i = 0; i < layers.size(); ++i) {
      states_.push_back({config, 0, {}, {}});
      states_.push_back({config, 0, {}, {}});
    }
  }

  void step(std::span<DenseLayer> layers, const Gradients& grads) {
    for (std::size_t k = 0; k < layers.size(); ++k) {
      adamw_step(layers[k].weights, grads[k].weights, states_[2 * k]);
      adamw_step(layers[k].bias, grads[k].bias, states_[2 * k + 1]);
    }
  }

  std::uint64_t steps() const { return states_.empty() ? 0 : states_.front().t; }

 private:
  std::vector<AdamWState> states_;
};

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::size_t checked = 0;
  std::size_t worst_index = 0;
  bool passed = true;
};

// |a - n| / max(|a|, |n|); pairs where both magnitudes are below `floor` are
// compared absolutely against `floor`.
inline GradCheckReport compare_gradients(std::span<const double> analytic,
                                         std::span<const double> numeric, double tol,
                                         double floor = 1e-8) {
  GradCheckReport r;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    const double a = analytic[i];
    const double n = numeric[i];
    const double scale = std::max({std::abs(a), std::abs(n), floor});
    const double err = std::abs(a - n) / scale;
    if (err > r.max_rel_error || !std::isfinite(err)) {
      r.max_rel_error = std::isfinite(err) ? err : std::numeric_limits<double>::infinity();
      r.worst_index = i;
    }
    ++r.checked;
  }
  r.passed = r.max_rel_error <= tol;
  return r;
}

// Central difference of `loss` with respect to every entry of `params`.
// The step is applied in float storage and the realized step is used as the
// denominator.
inline std::vector<double> numeric_gradient(std::span<float> params,
                                            const std::function<double()>& loss, double h = 1e-3) {
  std::vector<double> g(params.size());
  for (std::size_t i = 0; i < params.size(); ++i) {
    const float orig = params[i];
    const float up = static_cast<float>(orig + h);
    const float down = static_cast<float>(orig - h);
    params[i] = up;
    const double lp = loss();
    params[i] = down;
    const double lm = loss();
    params[i] = orig;
    g[i] = (lp - lm) / (static_cast<double>(up) - static_cast<double>(down));
  }
  return g;
}

// Maps a network output to (loss, dloss/doutput).
using OutputLoss = std::function<std::pair<double, std::vector<double>>(std::span<const double>)>;

inline std::vector<double> flatten(const Gradients& g) {
  std::vector<double> flat;
  for (const auto& l : g) {
    flat.insert(flat.end(), l.weights.begin(), l.weights.end());
    flat.insert(flat.end(), l.bias.begin(), l.bias.end());
  }
  return flat;
}

// Backprop gradient of loss(forward(layers, x)) against central differences
// over every parameter.
inline GradCheckReport finite_difference_check(std::vector<DenseLayer> layers,
                                               const OutputLoss& loss, std::span<const double> x,
                                               double tol, double h = 1e-3) {
  const auto pass = forward(layers, x);
  auto grads = zero_gradients(layers);
  backward(layers, pass, loss(pass.output).second, grads);
  const auto analytic = flatten(grads);

  auto eval = [&] { return loss(evaluate<double>(layers, x)).first; };
  std::vector<double> numeric;
  for (auto& layer : layers) {
    auto gw = numeric_gradient(layer.weights, eval, h);
    auto gb = numeric_gradient(layer.bias, eval, h);
    numeric.insert(numeric.end(), gw.begin(), gw.end());
    numeric.insert(numeric.end(), gb.begin(), gb.end());
  }
  return compare_gradients(analytic, numeric, tol);
}

}  // namespace evlink::nn
