#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "plexsyn/error.hpp"
#include "plexsyn/random.hpp"

namespace plexsyn {

enum class OutputActivation { identity, logistic };

inline const char* to_string(OutputActivation a) {
  return a == OutputActivation::identity ? "identity" : "logistic";
}

struct DenseLayer {
  std::size_t inputs = 0;
  std::size_t outputs = 0;
  std::vector<double> weights;  // outputs x inputs
  std::vector<double> bias;

  friend bool operator==(const DenseLayer&, const DenseLayer&) = default;
};

/// Fully connected network: leaky-rectifier hidden layers, identity or
/// logistic output.
struct Mlp {
  std::vector<std::size_t> layer_sizes;
  std::vector<DenseLayer> layers;
  OutputActivation output = OutputActivation::identity;
  double leak = 0.01;
  // Identity of the parameter state; forward caches are tied to it.
  std::uint64_t instance = 0;
  std::uint64_t generation = 0;

  /// Glorot-uniform weights, zero biases.
  static Mlp create(std::vector<std::size_t> sizes, OutputActivation output,
                    std::uint64_t seed) {
    require(sizes.size() >= 2, "an MLP needs at least an input and output size");
    for (auto s : sizes) require(s >= 1, "MLP layer sizes must be >= 1");
    Mlp m;
    m.layer_sizes = std::move(sizes);
    m.output = output;
    m.instance = next_instance();
    Rng rng(seed);
    for (std::size_t l = 0; l + 1 < m.layer_sizes.size(); ++l) {
      DenseLayer layer;
      layer.inputs = m.layer_sizes[l];
      layer.outputs = m.layer_sizes[l + 1];
      const double limit =
          std::sqrt(6.0 / static_cast<double>(layer.inputs + layer.outputs));
      layer.weights.resize(layer.inputs * layer.outputs);
      for (auto& w : layer.weights) w = rng.uniform(-limit, limit);
      layer.bias.assign(layer.outputs, 0.0);
      m.layers.push_back(std::move(layer));
    }
    return m;
  }

  std::size_t input_size() const { return layer_sizes.front(); }
  std::size_t output_size() const { return layer_sizes.back(); }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& l : layers) n += l.weights.size() + l.bias.size();
    return n;
  }

  /// Flat parameter access in layer order, weights before biases.
  double& parameter(std::size_t index) {
    for (auto& l : layers) {
      if (index < l.weights.size()) return l.weights[index];
      index -= l.weights.size();
      if (index < l.bias.size()) return l.bias[index];
      index -= l.bias.size();
    }
    fail(ErrorKind::validation, "parameter index out of range");
  }

  /// Marks the parameters as changed, invalidating older forward caches.
  void touch() { ++generation; }

  bool same_parameters(const Mlp& other) const { return layers == other.layers; }

 private:
  static std::uint64_t next_instance() {
    static std::atomic<std::uint64_t> counter{1};
    return counter.fetch_add(1);
  }
};

struct MlpCache {
  std::uint64_t instance = 0;
  std::uint64_t generation = 0;
  std::vector<std::vector<double>> inputs;  // input to each layer
  std::vector<std::vector<double>> pre;     // pre-activation of each layer
  std::vector<double> output;
};

struct MlpGradients {
  std::vector<std::vector<double>> weights;
  std::vector<std::vector<double>> bias;
  std::vector<double> input;

  static MlpGradients zeros_like(const Mlp& m) {
    MlpGradients g;
    for (const auto& l : m.layers) {
      g.weights.emplace_back(l.weights.size(), 0.0);
      g.bias.emplace_back(l.bias.size(), 0.0);
    }
    g.input.assign(m.input_size(), 0.0);
    return g;
  }

  void add(const MlpGradients& other, double scale = 1.0) {
    for (std::size_t l = 0; l < weights.size(); ++l) {
      for (std::size_t i = 0; i < weights[l].size(); ++i) weights[l][i] += scale * other.weights[l][i];
      for (std::size_t i = 0; i < bias[l].size(); ++i) bias[l][i] += scale * other.bias[l][i];
    }
  }

  double parameter(std::size_t index) const {
    for (std::size_t l = 0; l < weights.size(); ++l) {
      if (index < weights[l].size()) return weights[l][index];
      index -= weights[l].size();
      if (index < bias[l].size()) return bias[l][index];
      index -= bias[l].size();
    }
    fail(ErrorKind::validation, "gradient index out of range");
  }
};

inline double logistic(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

inline MlpCache mlp_forward(const Mlp& m, std::span<const double> input) {
  require(input.size() == m.input_size(), "MLP input dimension mismatch");
  MlpCache cache;
  cache.instance = m.instance;
  cache.generation = m.generation;
  std::vector<double> activation(input.begin(), input.end());
  for (std::size_t l = 0; l < m.layers.size(); ++l) {
    const auto& layer = m.layers[l];
    std::vector<double> z(layer.outputs);
    for (std::size_t o = 0; o < layer.outputs; ++o) {
      double sum = layer.bias[o];
      const double* w = layer.weights.data() + o * layer.inputs;
      for (std::size_t i = 0; i < layer.inputs; ++i) sum += w[i] * activation[i];
      z[o] = sum;
    }
    const bool last = l + 1 == m.layers.size();
    std::vector<double> a(z.size());
    for (std::size_t o = 0; o < z.size(); ++o) {
      if (!last) {
        a[o] = z[o] > 0.0 ? z[o] : m.leak * z[o];
      } else {
        a[o] = m.output == OutputActivation::logistic ? logistic(z[o]) : z[o];
      }
    }
    cache.inputs.push_back(std::move(activation));
    cache.pre.push_back(std::move(z));
    activation = std::move(a);
  }
  cache.output = std::move(activation);
  return cache;
}

/// Reverse-mode gradients given dLoss/dOutput; also returns dLoss/dInput.
inline MlpGradients mlp_backward(const Mlp& m, const MlpCache& cache,
                                 std::span<const double> upstream) {
  require(cache.instance == m.instance && cache.generation == m.generation,
          "forward cache is stale for this network");
  require(cache.pre.size() == m.layers.size(), "forward cache does not match network depth");
  require(upstream.size() == m.output_size(), "upstream gradient dimension mismatch");
  MlpGradients g = MlpGradients::zeros_like(m);
  std::vector<double> delta(upstream.begin(), upstream.end());
  for (std::size_t l = m.layers.size(); l-- > 0;) {
    const auto& layer = m.layers[l];
    const auto& z = cache.pre[l];
    const bool last = l + 1 == m.layers.size();
    for (std::size_t o = 0; o < layer.outputs; ++o) {
      double slope = 1.0;
      if (!last) {
        slope = z[o] > 0.0 ? 1.0 : m.leak;
      } else if (m.output == OutputActivation::logistic) {
        const double p = cache.output[o];
        slope = p * (1.0 - p);
      }
      delta[o] *= slope;
    }
    const auto& in = cache.inputs[l];
    std::vector<double> previous(layer.inputs, 0.0);
    for (std::size_t o = 0; o < layer.outputs; ++o) {
      const double d = delta[o];
      g.bias[l][o] = d;
      double* gw = g.weights[l].data() + o * layer.inputs;
      const double* w = layer.weights.data() + o * layer.inputs;
      for (std::size_t i = 0; i < layer.inputs; ++i) {
        gw[i] = d * in[i];
        previous[i] += d * w[i];
      }
    }
    delta = std::move(previous);
  }
  g.input = std::move(delta);
  return g;
}

/// Loss of a network output: returns (value, dValue/dOutput).
using OutputLoss =
    std::function<std::pair<double, std::vector<double>>(std::span<const double>)>;

/// Largest relative error between backprop and central differences over
/// every parameter and every input coordinate.
inline double grad_check(const Mlp& m, const OutputLoss& loss,
                         std::span<const double> input, double h) {
  require(h > 0.0, "finite-difference step must be positive");
  const auto cache = mlp_forward(m, input);
  const auto [value, upstream] = loss(cache.output);
  const auto analytic = mlp_backward(m, cache, upstream);
  const auto relative = [](double a, double n) {
    return std::abs(a - n) / std::max({std::abs(a), std::abs(n), 1e-8});
  };

  double worst = 0.0;
  Mlp probe = m;
  for (std::size_t p = 0; p < m.parameter_count(); ++p) {
    double& slot = probe.parameter(p);
    const double original = slot;
    slot = original + h;
    probe.touch();
    const double plus = loss(mlp_forward(probe, input).output).first;
    slot = original - h;
    probe.touch();
    const double minus = loss(mlp_forward(probe, input).output).first;
    slot = original;
    probe.touch();
    worst = std::max(worst, relative(analytic.parameter(p), (plus - minus) / (2.0 * h)));
  }
  std::vector<double> x(input.begin(), input.end());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double original = x[i];
    x[i] = original + h;
    const double plus = loss(mlp_forward(m, x).output).first;
    x[i] = original - h;
    const double minus = loss(mlp_forward(m, x).output).first;
    x[i] = original;
    worst = std::max(worst, relative(analytic.input[i], (plus - minus) / (2.0 * h)));
  }
  return worst;
}

/// Adam moments for one network.
class Adam {
 public:
  Adam(const Mlp& m, double learning_rate, double beta1 = 0.5,
       double beta2 = 0.999, double epsilon = 1e-8)
      : lr_(learning_rate), beta1_(beta1), beta2_(beta2), epsilon_(epsilon),
        first_(MlpGradients::zeros_like(m)), second_(MlpGradients::zeros_like(m)) {}

  void set_learning_rate(double lr) { lr_ = lr; }

  void step(Mlp& m, const MlpGradients& g) {
    ++t_;
    const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    const auto update = [&](std::vector<double>& param, const std::vector<double>& grad,
                            std::vector<double>& m1, std::vector<double>& m2) {
      for (std::size_t i = 0; i < param.size(); ++i) {
        m1[i] = beta1_ * m1[i] + (1.0 - beta1_) * grad[i];
        m2[i] = beta2_ * m2[i] + (1.0 - beta2_) * grad[i] * grad[i];
        param[i] -= lr_ * (m1[i] / c1) / (std::sqrt(m2[i] / c2) + epsilon_);
      }
    };
    for (std::size_t l = 0; l < m.layers.size(); ++l) {
      update(m.layers[l].weights, g.weights[l], first_.weights[l], second_.weights[l]);
      update(m.layers[l].bias, g.bias[l], first_.bias[l], second_.bias[l]);
    }
    m.touch();
  }

 private:
  double lr_;
  double beta1_;
  double beta2_;
  double epsilon_;
  std::uint64_t t_ = 0;
  MlpGradients first_;
  MlpGradients second_;
};

inline nlohmann::json to_json(const Mlp& m) {
  nlohmann::json weights = nlohmann::json::array();
  nlohmann::json biases = nlohmann::json::array();
  for (const auto& l : m.layers) {
    weights.push_back(l.weights);
    biases.push_back(l.bias);
  }
  return {{"type", "mlp"},
          {"layer_sizes", m.layer_sizes},
          {"weights", weights},
          {"biases", biases},
          {"hidden_activation", "leaky_relu"},
          {"leak", m.leak},
          {"output_activation", to_string(m.output)}};
}

inline Mlp mlp_from_json(const nlohmann::json& j) {
  require(j.at("type").get<std::string>() == "mlp", "not an MLP model");
  const std::string out = j.at("output_activation").get<std::string>();
  require(out == "identity" || out == "logistic", "unknown output activation");
  Mlp m = Mlp::create(j.at("layer_sizes").get<std::vector<std::size_t>>(),
                      out == "identity" ? OutputActivation::identity
                                        : OutputActivation::logistic,
                      0);
  m.leak = j.value("leak", 0.01);
  const auto& weights = j.at("weights");
  const auto& biases = j.at("biases");
  require(weights.size() == m.layers.size() && biases.size() == m.layers.size(),
          "MLP parameter lists do not match its layers");
  for (std::size_t l = 0; l < m.layers.size(); ++l) {
    auto w = weights[l].get<std::vector<double>>();
    auto b = biases[l].get<std::vector<double>>();
    require(w.size() == m.layers[l].weights.size() && b.size() == m.layers[l].bias.size(),
            "MLP layer parameter size mismatch");
    m.layers[l].weights = std::move(w);
    m.layers[l].bias = std::move(b);
  }
  return m;
}

}  // namespace plexsyn
