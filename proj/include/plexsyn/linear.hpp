#pragma once

#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <vector>

#include <json.hpp>

#include "plexsyn/cluster.hpp"
#include "plexsyn/error.hpp"
#include "plexsyn/losses.hpp"
#include "plexsyn/parallel.hpp"
#include "plexsyn/patches.hpp"
#include "plexsyn/random.hpp"
#include "plexsyn/stack.hpp"

namespace plexsyn {

struct TrainConfig {
  std::size_t epochs = 1000;
  double learning_rate = 0.05;
  std::size_t batch_size = 64;
  double lambda_l1 = 100.0;
  std::uint64_t seed = 0;
  std::size_t d_steps_per_g_step = 1;
  // Step size at epoch e is learning_rate / (1 + lr_decay * e).
  double lr_decay = 0.0;

  void validate() const {
    require(epochs >= 1, "epochs must be >= 1");
    require(learning_rate > 0.0 && std::isfinite(learning_rate),
            "learning rate must be positive");
    require(batch_size >= 1, "batch size must be >= 1");
    require(lambda_l1 >= 0.0, "lambda must be >= 0");
    require(d_steps_per_g_step >= 1, "d_steps_per_g_step must be >= 1");
    require(lr_decay >= 0.0, "lr_decay must be >= 0");
  }

  double step_size(std::size_t epoch) const {
    return learning_rate / (1.0 + lr_decay * static_cast<double>(epoch));
  }
};

inline nlohmann::json to_json(const TrainConfig& c) {
  return {{"epochs", c.epochs},
          {"learning_rate", c.learning_rate},
          {"batch_size", c.batch_size},
          {"lambda_l1", c.lambda_l1},
          {"seed", c.seed},
          {"d_steps_per_g_step", c.d_steps_per_g_step},
          {"lr_decay", c.lr_decay}};
}

/// prediction[t] = bias[t] + sum_f features[f] * weights[f * targets + t].
struct LinearModel {
  std::size_t feature_dim = 0;
  std::size_t target_count = 0;
  std::vector<double> weights;  // feature_dim x target_count
  std::vector<double> bias;

  static LinearModel zeros(std::size_t feature_dim, std::size_t target_count) {
    return {feature_dim, target_count,
            std::vector<double>(feature_dim * target_count, 0.0),
            std::vector<double>(target_count, 0.0)};
  }

  void predict_into(std::span<const double> features, std::span<double> out) const {
    for (std::size_t t = 0; t < target_count; ++t) out[t] = bias[t];
    for (std::size_t f = 0; f < feature_dim; ++f) {
      const double x = features[f];
      if (x == 0.0) continue;
      const double* w = weights.data() + f * target_count;
      for (std::size_t t = 0; t < target_count; ++t) out[t] += x * w[t];
    }
  }

  friend bool operator==(const LinearModel&, const LinearModel&) = default;
};

/// Predictions for every row of a dataset, row-major rows x targets.
inline std::vector<double> predict_rows(const LinearModel& model,
                                        const PatchDataset& data) {
  require(model.feature_dim == data.feature_dim &&
              model.target_count == data.target_count,
          "model does not match dataset geometry");
  std::vector<double> out(data.rows() * data.target_count);
  for (std::size_t r = 0; r < data.rows(); ++r) {
    model.predict_into(data.feature_row(r),
                       std::span<double>(out).subspan(r * data.target_count,
                                                      data.target_count));
  }
  return out;
}

inline double dataset_l1(const LinearModel& model, const PatchDataset& data) {
  return l1_loss(predict_rows(model, data), data.target_values);
}

struct LinearTraining {
  LinearModel model;
  std::vector<double> epoch_loss;  // full-dataset L1 of the kept parameters per epoch
};

/// Minibatch subgradient descent on mean absolute error from a zero start.
/// Each target column descends its own mean absolute error, so the step size
/// does not shrink with the number of targets. An epoch that raises the
/// full-dataset L1 is rolled back and the step halved, so `epoch_loss` never
/// increases.
inline LinearTraining train_linear_l1(const PatchDataset& data,
                                      const TrainConfig& cfg) {
  cfg.validate();
  require(data.rows() > 0, "cannot train on an empty dataset");
  const std::size_t fd = data.feature_dim;
  const std::size_t tc = data.target_count;
  LinearTraining result{LinearModel::zeros(fd, tc), {}};
  LinearModel& model = result.model;

  std::vector<std::size_t> order(data.rows());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(cfg.seed);
  std::vector<double> prediction(tc);
  std::vector<double> sign(tc);
  std::vector<double> grad_w(fd * tc);
  std::vector<double> grad_b(tc);
  LinearModel kept = model;
  double kept_loss = dataset_l1(model, data);
  double gain = 1.0;

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    rng.shuffle(std::span<std::size_t>(order));
    const double lr = gain * cfg.step_size(epoch);
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      std::fill(grad_w.begin(), grad_w.end(), 0.0);
      std::fill(grad_b.begin(), grad_b.end(), 0.0);
      for (std::size_t i = start; i < end; ++i) {
        const auto x = data.feature_row(order[i]);
        const auto y = data.target_row(order[i]);
        model.predict_into(x, prediction);
        for (std::size_t t = 0; t < tc; ++t) {
          const double e = prediction[t] - y[t];
          sign[t] = e > 0.0 ? 1.0 : (e < 0.0 ? -1.0 : 0.0);
          grad_b[t] += sign[t];
        }
        for (std::size_t f = 0; f < fd; ++f) {
          const double xf = x[f];
          if (xf == 0.0) continue;
          double* g = grad_w.data() + f * tc;
          for (std::size_t t = 0; t < tc; ++t) g[t] += xf * sign[t];
        }
      }
      const double scale = lr / static_cast<double>(end - start);
      for (std::size_t k = 0; k < grad_w.size(); ++k) model.weights[k] -= scale * grad_w[k];
      for (std::size_t t = 0; t < tc; ++t) model.bias[t] -= scale * grad_b[t];
    }
    const double loss = dataset_l1(model, data);
    if (loss <= kept_loss) {
      kept = model;
      kept_loss = loss;
    } else {
      model = kept;
      gain *= 0.5;
    }
    result.epoch_loss.push_back(kept_loss);
  }
  return result;
}

/// Full-image predictions for the target channels. Pixels without a full
/// patch (or off the stride grid) are marked invalid and hold 0.
struct PredictedChannels {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<std::size_t> targets;
  std::vector<float> values;          // targets x height x width
  std::vector<std::uint8_t> valid;    // height x width

  std::span<const float> channel(std::size_t t) const {
    return std::span<const float>(values).subspan(t * height * width, height * width);
  }

  ChannelStack to_stack(const std::vector<std::string>& names) const {
    return ChannelStack(height, width, names, values);
  }
};

template <typename RowPredictor>
PredictedChannels predict_image(const ChannelStack& stack,
                                const ChannelSelection& selection,
                                std::span<const std::size_t> targets,
                                std::size_t radius, std::size_t stride,
                                std::size_t feature_dim, std::size_t target_count,
                                RowPredictor&& row_predictor, unsigned threads) {
  check_source_target(stack, selection.indices, targets);
  const std::size_t side = 2 * radius + 1;
  require(feature_dim == selection.indices.size() * side * side,
          "model feature dimension does not match the patch geometry");
  require(target_count == targets.size(),
          "model target count does not match the requested targets");
  PredictedChannels out;
  out.height = stack.height();
  out.width = stack.width();
  out.targets.assign(targets.begin(), targets.end());
  out.values.assign(target_count * stack.pixels(), 0.0f);
  out.valid.assign(stack.pixels(), 0);
  const auto centers = patch_centers(stack.height(), stack.width(), radius, stride);
  parallel_for(centers.size(), threads, [&](std::size_t i) {
    const auto [cy, cx] = centers[i];
    std::vector<double> features;
    features.reserve(feature_dim);
    gather_features(stack, selection.indices, radius, cy, cx, features);
    std::vector<double> prediction(target_count);
    row_predictor(std::span<const double>(features), std::span<double>(prediction));
    const std::size_t pixel = cy * stack.width() + cx;
    out.valid[pixel] = 1;
    for (std::size_t t = 0; t < target_count; ++t) {
      out.values[t * stack.pixels() + pixel] = static_cast<float>(prediction[t]);
    }
  });
  return out;
}

inline PredictedChannels predict(const LinearModel& model,
                                 const ChannelStack& stack,
                                 const ChannelSelection& selection,
                                 std::span<const std::size_t> targets,
                                 std::size_t radius, std::size_t stride = 1,
                                 unsigned threads = 1) {
  return predict_image(
      stack, selection, targets, radius, stride, model.feature_dim,
      model.target_count,
      [&](std::span<const double> x, std::span<double> y) { model.predict_into(x, y); },
      threads);
}

/// Mean absolute error of one predicted channel over its valid pixels.
inline double masked_l1(std::span<const float> predicted,
                        std::span<const float> actual,
                        std::span<const std::uint8_t> valid) {
  require(predicted.size() == actual.size() && actual.size() == valid.size(),
          "masked_l1 shape mismatch");
  double total = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < actual.size(); ++i) {
    if (!valid[i]) continue;
    total += std::abs(static_cast<double>(actual[i]) - predicted[i]);
    ++count;
  }
  require(count > 0, "no valid pixels to score");
  return total / static_cast<double>(count);
}

inline nlohmann::json to_json(const LinearModel& m) {
  return {{"type", "linear"},
          {"feature_dim", m.feature_dim},
          {"target_count", m.target_count},
          {"weights", m.weights},
          {"bias", m.bias}};
}

inline LinearModel linear_from_json(const nlohmann::json& j) {
  require(j.at("type").get<std::string>() == "linear", "not a linear model");
  LinearModel m;
  m.feature_dim = j.at("feature_dim").get<std::size_t>();
  m.target_count = j.at("target_count").get<std::size_t>();
  m.weights = j.at("weights").get<std::vector<double>>();
  m.bias = j.at("bias").get<std::vector<double>>();
  require(m.weights.size() == m.feature_dim * m.target_count &&
              m.bias.size() == m.target_count,
          "linear model parameter sizes do not match its dimensions");
  return m;
}

}  // namespace plexsyn
