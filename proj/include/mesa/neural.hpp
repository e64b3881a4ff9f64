#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "mesa/error.hpp"
#include "mesa/random.hpp"

namespace mesa::nn {

enum class Activation { linear, relu, tanh };

inline const char* to_string(Activation a) {
  switch (a) {
    case Activation::linear: return "linear";
    case Activation::relu: return "relu";
    case Activation::tanh: return "tanh";
  }
  return "linear";
}

inline Activation parse_activation(const std::string& s) {
  if (s == "linear") return Activation::linear;
  if (s == "relu") return Activation::relu;
  if (s == "tanh") return Activation::tanh;
  throw ConfigError("unknown activation '" + s + "'");
}

// Fully connected network. All parameters live in one flat buffer: for each
// layer, the (out x in) row-major weight matrix followed by the bias vector.
class Mlp {
 public:
  // Per-layer inputs and pre-activations of the most recent forward pass.
  struct Cache {
    std::vector<std::vector<double>> inputs;
    std::vector<std::vector<double>> pre;
    std::vector<double> output;
  };

  Mlp() = default;

  Mlp(std::vector<std::size_t> layer_sizes, std::vector<Activation> activations)
      : sizes_(std::move(layer_sizes)), acts_(std::move(activations)) {
    if (sizes_.size() < 2) throw ConfigError("an MLP needs at least input and output sizes");
    if (acts_.size() != sizes_.size() - 1) throw ConfigError("one activation per layer required");
    for (std::size_t s : sizes_) {
      if (s == 0) throw ConfigError("layer sizes must be positive");
    }
    std::size_t off = 0;
    for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
      offsets_.push_back(off);
      off += sizes_[l + 1] * sizes_[l] + sizes_[l + 1];
    }
    params_.assign(off, 0.0);
  }

  // Weights and biases uniform in +-1/sqrt(fan_in).
  static Mlp uniform_init(std::vector<std::size_t> layer_sizes, std::vector<Activation> activations,
                          Rng& rng) {
    Mlp net(std::move(layer_sizes), std::move(activations));
    for (std::size_t l = 0; l < net.layers(); ++l) {
      const double bound = 1.0 / std::sqrt(static_cast<double>(net.sizes_[l]));
      auto p = net.layer_params(l);
      for (double& w : p) w = bound * (2.0 * uniform01(rng) - 1.0);
    }
    return net;
  }

  std::size_t layers() const noexcept { return acts_.size(); }
  std::size_t input_size() const noexcept { return sizes_.front(); }
  std::size_t output_size() const noexcept { return sizes_.back(); }
  std::size_t parameter_count() const noexcept { return params_.size(); }
  const std::vector<std::size_t>& layer_sizes() const noexcept { return sizes_; }
  const std::vector<Activation>& activations() const noexcept { return acts_; }

  std::span<double> params() noexcept { return params_; }
  std::span<const double> params() const noexcept { return params_; }

  double& weight(std::size_t l, std::size_t out, std::size_t in) {
    return params_[offsets_[l] + out * sizes_[l] + in];
  }
  double& bias(std::size_t l, std::size_t out) {
    return params_[offsets_[l] + sizes_[l + 1] * sizes_[l] + out];
  }

  bool same_architecture(const Mlp& o) const { return sizes_ == o.sizes_ && acts_ == o.acts_; }

  std::span<const double> forward(std::span<const double> x, Cache& cache) const {
    if (x.size() != input_size()) {
      throw DataError(DataErrc::dimension_mismatch,
                      "network input has " + std::to_string(x.size()) + " values, expected " +
                          std::to_string(input_size()));
    }
    cache.inputs.resize(layers());
    cache.pre.resize(layers());
    cache.inputs[0].assign(x.begin(), x.end());
    for (std::size_t l = 0; l < layers(); ++l) {
      const std::size_t in = sizes_[l], out = sizes_[l + 1];
      const double* w = params_.data() + offsets_[l];
      const double* b = w + out * in;
      const std::vector<double>& a = cache.inputs[l];
      std::vector<double>& z = cache.pre[l];
      z.resize(out);
      for (std::size_t o = 0; o < out; ++o) {
        double acc = b[o];
        const double* wr = w + o * in;
        for (std::size_t i = 0; i < in; ++i) acc += wr[i] * a[i];
        z[o] = acc;
      }
      std::vector<double>& next = (l + 1 < layers()) ? cache.inputs[l + 1] : cache.output;
      next.resize(out);
      for (std::size_t o = 0; o < out; ++o) next[o] = activate(acts_[l], z[o]);
    }
    return cache.output;
  }

  std::vector<double> predict(std::span<const double> x) const {
    Cache c;
    forward(x, c);
    return c.output;
  }

  // Reverse pass for the scalar output . output_grad. Parameter gradients are
  // accumulated into param_grad; the input gradient, if requested, is written
  // to input_grad.
  void backward(const Cache& cache, std::span<const double> output_grad, std::span<double> param_grad,
                std::span<double> input_grad = {}) const {
    if (output_grad.size() != output_size() || param_grad.size() != params_.size() ||
        cache.pre.size() != layers()) {
      throw DataError(DataErrc::dimension_mismatch, "backward shapes do not match the network");
    }
    if (!input_grad.empty() && input_grad.size() != input_size()) {
      throw DataError(DataErrc::dimension_mismatch, "input gradient has the wrong length");
    }
    std::vector<double> delta(output_grad.begin(), output_grad.end());
    std::vector<double> prev;
    for (std::size_t l = layers(); l-- > 0;) {
      const std::size_t in = sizes_[l], out = sizes_[l + 1];
      const std::vector<double>& z = cache.pre[l];
      for (std::size_t o = 0; o < out; ++o) delta[o] *= derivative(acts_[l], z[o]);
      const double* w = params_.data() + offsets_[l];
      double* gw = param_grad.data() + offsets_[l];
      double* gb = gw + out * in;
      const std::vector<double>& a = cache.inputs[l];
      for (std::size_t o = 0; o < out; ++o) {
        gb[o] += delta[o];
        double* gr = gw + o * in;
        for (std::size_t i = 0; i < in; ++i) gr[i] += delta[o] * a[i];
      }
      if (l == 0 && input_grad.empty()) break;
      prev.assign(in, 0.0);
      for (std::size_t o = 0; o < out; ++o) {
        const double* wr = w + o * in;
        for (std::size_t i = 0; i < in; ++i) prev[i] += wr[i] * delta[o];
      }
      delta.swap(prev);
    }
    if (!input_grad.empty()) std::copy(delta.begin(), delta.end(), input_grad.begin());
  }

 private:
  static double activate(Activation a, double z) {
    switch (a) {
      case Activation::relu: return z > 0.0 ? z : 0.0;
      case Activation::tanh: return std::tanh(z);
      case Activation::linear: break;
    }
    return z;
  }
  static double derivative(Activation a, double z) {
    switch (a) {
      case Activation::relu: return z > 0.0 ? 1.0 : 0.0;
      case Activation::tanh: {
        const double t = std::tanh(z);
        return 1.0 - t * t;
      }
      case Activation::linear: break;
    }
    return 1.0;
  }

  std::span<double> layer_params(std::size_t l) {
    const std::size_t n = sizes_[l + 1] * sizes_[l] + sizes_[l + 1];
    return {params_.data() + offsets_[l], n};
  }

  std::vector<std::size_t> sizes_;
  std::vector<Activation> acts_;
  std::vector<std::size_t> offsets_;
  std::vector<double> params_;
};

// ---------------------------------------------------------------------------
// Adam with a step-decay learning-rate schedule
// ---------------------------------------------------------------------------

struct AdamState {
  std::vector<double> m, v;
  std::uint64_t step = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double base_lr = 1e-3;
  double lr = 1e-3;
  std::uint64_t decay_ticks = 0;
  std::uint64_t decay_every = 10;
  double decay_ratio = 0.99;

  AdamState() = default;
  AdamState(std::size_t n, double learning_rate, std::uint64_t every = 10, double ratio = 0.99)
      : m(n, 0.0), v(n, 0.0), base_lr(learning_rate), lr(learning_rate), decay_every(every),
        decay_ratio(ratio) {}
};

inline void adam_step(std::span<double> params, std::span<const double> grads, AdamState& s) {
  if (params.size() != grads.size() || s.m.size() != params.size() || s.v.size() != params.size()) {
    throw DataError(DataErrc::dimension_mismatch, "Adam shapes do not match");
  }
  for (double g : grads) {
    if (!std::isfinite(g)) throw NumericalError("non-finite gradient");
  }
  ++s.step;
  const double t = static_cast<double>(s.step);
  const double c1 = 1.0 - std::pow(s.beta1, t);
  const double c2 = 1.0 - std::pow(s.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i];
    s.m[i] = s.beta1 * s.m[i] + (1.0 - s.beta1) * g;
    s.v[i] = s.beta2 * s.v[i] + (1.0 - s.beta2) * g * g;
    const double mhat = s.m[i] / c1;
    const double vhat = s.v[i] / c2;
    params[i] -= s.lr * mhat / (std::sqrt(vhat) + s.epsilon);
  }
}

// One scheduler tick: every `decay_every` ticks the rate drops by `decay_ratio`.
inline void decay_learning_rate(AdamState& s) {
  ++s.decay_ticks;
  if (s.decay_every > 0 && s.decay_ticks % s.decay_every == 0) {
    s.lr = s.base_lr * std::pow(s.decay_ratio, static_cast<double>(s.decay_ticks / s.decay_every));
  }
}

// target <- tau * source + (1 - tau) * target, parameter-wise.
inline void soft_update(Mlp& target, const Mlp& source, double tau) {
  if (!target.same_architecture(source)) throw ConfigError("soft update across different architectures");
  auto t = target.params();
  auto s = source.params();
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = tau * s[i] + (1.0 - tau) * t[i];
}

// ---------------------------------------------------------------------------
// Serialisation
// ---------------------------------------------------------------------------

inline constexpr int network_format_version = 1;

inline nlohmann::json to_json(const Mlp& net) {
  nlohmann::json j;
  j["format_version"] = network_format_version;
  j["layer_sizes"] = net.layer_sizes();
  std::vector<std::string> acts;
  for (Activation a : net.activations()) acts.emplace_back(to_string(a));
  j["activations"] = acts;
  auto weights = nlohmann::json::array();
  auto biases = nlohmann::json::array();
  const auto& sz = net.layer_sizes();
  std::size_t off = 0;
  for (std::size_t l = 0; l < net.layers(); ++l) {
    const std::size_t nw = sz[l + 1] * sz[l];
    const auto p = net.params();
    weights.push_back(std::vector<double>(p.begin() + off, p.begin() + off + nw));
    biases.push_back(std::vector<double>(p.begin() + off + nw, p.begin() + off + nw + sz[l + 1]));
    off += nw + sz[l + 1];
  }
  j["weights"] = std::move(weights);
  j["biases"] = std::move(biases);
  return j;
}

inline Mlp mlp_from_json(const nlohmann::json& j) {
  try {
    if (j.at("format_version").get<int>() != network_format_version) {
      throw ConfigError("unsupported network format_version");
    }
    auto sizes = j.at("layer_sizes").get<std::vector<std::size_t>>();
    std::vector<Activation> acts;
    for (const auto& a : j.at("activations")) acts.push_back(parse_activation(a.get<std::string>()));
    Mlp net(sizes, acts);
    const auto& weights = j.at("weights");
    const auto& biases = j.at("biases");
    if (weights.size() != net.layers() || biases.size() != net.layers()) {
      throw ConfigError("network document has the wrong number of layers");
    }
    auto p = net.params();
    std::size_t off = 0;
    for (std::size_t l = 0; l < net.layers(); ++l) {
      const auto w = weights[l].get<std::vector<double>>();
      const auto b = biases[l].get<std::vector<double>>();
      if (w.size() != sizes[l + 1] * sizes[l] || b.size() != sizes[l + 1]) {
        throw ConfigError("layer " + std::to_string(l) + " has the wrong parameter count");
      }
      std::copy(w.begin(), w.end(), p.begin() + off);
      off += w.size();
      std::copy(b.begin(), b.end(), p.begin() + off);
      off += b.size();
    }
    for (double x : p) {
      if (!std::isfinite(x)) throw NumericalError("non-finite network parameter");
    }
    return net;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed network document: ") + e.what());
  }
}

}  // namespace mesa::nn
