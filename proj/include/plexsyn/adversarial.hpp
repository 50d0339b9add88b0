#pragma once

#include <cmath>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "plexsyn/error.hpp"
#include "plexsyn/format.hpp"
#include "plexsyn/linear.hpp"
#include "plexsyn/losses.hpp"
#include "plexsyn/mlp.hpp"
#include "plexsyn/patches.hpp"
#include "plexsyn/random.hpp"

namespace plexsyn {

// The conditional discriminator scores [x, y] or [x, G(x)].
inline std::vector<double> concat(std::span<const double> a, std::span<const double> b) {
  std::vector<double> out(a.begin(), a.end());
  out.insert(out.end(), b.begin(), b.end());
  return out;
}

struct ObjectiveGradient {
  double value = 0.0;
  MlpGradients gradients;
};

inline void check_adversarial_pair(const Mlp& g, const Mlp& d, const PatchDataset& data) {
  require(g.input_size() == data.feature_dim,
          "generator input must match the patch feature dimension");
  require(g.output_size() == data.target_count,
          "generator output must match the target count");
  require(g.output == OutputActivation::identity, "generator output must be identity");
  require(d.input_size() == data.feature_dim + data.target_count,
          "discriminator input must be feature_dim + target_count");
  require(d.output_size() == 1, "discriminator must emit one probability");
  require(d.output == OutputActivation::logistic, "discriminator output must be logistic");
}

/// Negated adversarial value on a batch, -(mean log D(x,y) + mean log(1 -
/// D(x,G(x)))), with its gradient for the discriminator parameters.
inline ObjectiveGradient discriminator_objective(const Mlp& g, const Mlp& d,
                                                 const PatchDataset& data,
                                                 std::span<const std::size_t> rows) {
  require(!rows.empty(), "batch must not be empty");
  const double inv = 1.0 / static_cast<double>(rows.size());
  ObjectiveGradient out{0.0, MlpGradients::zeros_like(d)};
  for (std::size_t r : rows) {
    const auto x = data.feature_row(r);
    const auto real_cache = mlp_forward(d, concat(x, data.target_row(r)));
    const double p_real = real_cache.output[0];
    out.value -= inv * std::log(clamp_probability(p_real));
    const bool real_inside = p_real >= probability_clamp && p_real <= 1.0 - probability_clamp;
    const double up_real = real_inside ? -inv / p_real : 0.0;
    out.gradients.add(mlp_backward(d, real_cache, std::span<const double>(&up_real, 1)));

    const auto fake = mlp_forward(g, x).output;
    const auto fake_cache = mlp_forward(d, concat(x, fake));
    const double p_fake = fake_cache.output[0];
    out.value -= inv * std::log(clamp_probability(1.0 - p_fake));
    const double q = 1.0 - p_fake;
    const bool fake_inside = q >= probability_clamp && q <= 1.0 - probability_clamp;
    const double up_fake = fake_inside ? inv / q : 0.0;
    out.gradients.add(mlp_backward(d, fake_cache, std::span<const double>(&up_fake, 1)));
  }
  return out;
}

/// Generator objective on a batch: lambda * L1(G(x), y) - mean log D(x, G(x)),
/// the non-saturating form of the adversarial term, with its gradient for
/// the generator parameters.
inline ObjectiveGradient generator_objective(const Mlp& g, const Mlp& d,
                                             const PatchDataset& data,
                                             std::span<const std::size_t> rows,
                                             double lambda) {
  require(!rows.empty(), "batch must not be empty");
  const double inv = 1.0 / static_cast<double>(rows.size());
  const double inv_entries = inv / static_cast<double>(data.target_count);
  const std::size_t fd = data.feature_dim;
  ObjectiveGradient out{0.0, MlpGradients::zeros_like(g)};
  for (std::size_t r : rows) {
    const auto x = data.feature_row(r);
    const auto y = data.target_row(r);
    const auto g_cache = mlp_forward(g, x);
    const auto& fake = g_cache.output;
    const auto d_cache = mlp_forward(d, concat(x, fake));
    const double p = d_cache.output[0];
    out.value -= inv * std::log(clamp_probability(p));
    const bool inside = p >= probability_clamp && p <= 1.0 - probability_clamp;
    const double up = inside ? -inv / p : 0.0;
    const auto d_grad = mlp_backward(d, d_cache, std::span<const double>(&up, 1));

    std::vector<double> upstream(data.target_count);
    for (std::size_t t = 0; t < data.target_count; ++t) {
      const double e = fake[t] - y[t];
      out.value += lambda * inv_entries * std::abs(e);
      const double sign = e > 0.0 ? 1.0 : (e < 0.0 ? -1.0 : 0.0);
      upstream[t] = d_grad.input[fd + t] + lambda * inv_entries * sign;
    }
    out.gradients.add(mlp_backward(g, g_cache, upstream));
  }
  return out;
}

struct AdversarialEpoch {
  std::size_t epoch = 0;
  double gan = 0.0;
  double l1 = 0.0;
  double objective = 0.0;
};

/// Adversarial value and reconstruction error of the pair on a dataset.
inline AdversarialEpoch evaluate_adversarial(const Mlp& g, const Mlp& d,
                                             const PatchDataset& data, double lambda) {
  std::vector<double> real(data.rows());
  std::vector<double> fake(data.rows());
  std::vector<double> generated;
  generated.reserve(data.rows() * data.target_count);
  for (std::size_t r = 0; r < data.rows(); ++r) {
    const auto x = data.feature_row(r);
    const auto y_hat = mlp_forward(g, x).output;
    generated.insert(generated.end(), y_hat.begin(), y_hat.end());
    real[r] = mlp_forward(d, concat(x, data.target_row(r))).output[0];
    fake[r] = mlp_forward(d, concat(x, y_hat)).output[0];
  }
  AdversarialEpoch e;
  e.gan = gan_loss(real, fake);
  e.l1 = l1_loss(generated, data.target_values);
  e.objective = combined_objective(e.gan, e.l1, lambda);
  return e;
}

struct AdversarialTraining {
  Mlp generator;
  Mlp discriminator;
  std::vector<AdversarialEpoch> history;  // entry 0 is the initial state
};

/// Alternating minibatch updates: d_steps discriminator ascent steps on the
/// adversarial value, then one generator step, both with Adam.
inline AdversarialTraining train_adversarial(const PatchDataset& data,
                                             const std::vector<std::size_t>& g_sizes,
                                             const std::vector<std::size_t>& d_sizes,
                                             const TrainConfig& cfg) {
  cfg.validate();
  require(data.rows() > 0, "cannot train on an empty dataset");
  AdversarialTraining out{
      Mlp::create(g_sizes, OutputActivation::identity, derive_seed(cfg.seed, 1)),
      Mlp::create(d_sizes, OutputActivation::logistic, derive_seed(cfg.seed, 2)),
      {}};
  Mlp& g = out.generator;
  Mlp& d = out.discriminator;
  check_adversarial_pair(g, d, data);

  Adam g_opt(g, cfg.learning_rate);
  Adam d_opt(d, cfg.learning_rate);
  Rng rng(derive_seed(cfg.seed, 3));
  std::vector<std::size_t> order(data.rows());
  std::iota(order.begin(), order.end(), std::size_t{0});

  out.history.push_back(evaluate_adversarial(g, d, data, cfg.lambda_l1));
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    rng.shuffle(std::span<std::size_t>(order));
    g_opt.set_learning_rate(cfg.step_size(epoch));
    d_opt.set_learning_rate(cfg.step_size(epoch));
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      const std::span<const std::size_t> batch(order.data() + start, end - start);
      for (std::size_t s = 0; s < cfg.d_steps_per_g_step; ++s) {
        d_opt.step(d, discriminator_objective(g, d, data, batch).gradients);
      }
      g_opt.step(g, generator_objective(g, d, data, batch, cfg.lambda_l1).gradients);
    }
    auto row = evaluate_adversarial(g, d, data, cfg.lambda_l1);
    row.epoch = epoch + 1;
    out.history.push_back(row);
  }
  return out;
}

inline std::vector<double> predict_rows(const Mlp& g, const PatchDataset& data) {
  require(g.input_size() == data.feature_dim && g.output_size() == data.target_count,
          "generator does not match dataset geometry");
  std::vector<double> out;
  out.reserve(data.rows() * data.target_count);
  for (std::size_t r = 0; r < data.rows(); ++r) {
    const auto y = mlp_forward(g, data.feature_row(r)).output;
    out.insert(out.end(), y.begin(), y.end());
  }
  return out;
}

inline PredictedChannels predict(const Mlp& generator, const ChannelStack& stack,
                                 const ChannelSelection& selection,
                                 std::span<const std::size_t> targets,
                                 std::size_t radius, std::size_t stride = 1,
                                 unsigned threads = 1) {
  return predict_image(
      stack, selection, targets, radius, stride, generator.input_size(),
      generator.output_size(),
      [&](std::span<const double> x, std::span<double> y) {
        const auto out = mlp_forward(generator, x).output;
        std::copy(out.begin(), out.end(), y.begin());
      },
      threads);
}

inline std::string history_csv(const std::vector<AdversarialEpoch>& history) {
  std::string out = "epoch,gan,l1,objective\n";
  for (const auto& e : history) {
    out += std::to_string(e.epoch) + "," + format_double(e.gan) + "," +
           format_double(e.l1) + "," + format_double(e.objective) + "\n";
  }
  return out;
}

}  // namespace plexsyn
