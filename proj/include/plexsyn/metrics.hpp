#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "plexsyn/error.hpp"

namespace plexsyn {

/// Summed loss divided by the number of predicted channels.
inline double normalized_loss(double total, std::size_t n_prediction_channels) {
  require(n_prediction_channels >= 1, "normalized loss needs at least one prediction channel");
  require(total >= 0.0, "total loss must be non-negative");
  return total / static_cast<double>(n_prediction_channels);
}

struct LossReport {
  std::vector<std::pair<std::string, double>> per_channel;  // name -> mean L1
  double total = 0.0;
  std::size_t n_prediction_channels = 0;
  double normalized = 0.0;
};

inline LossReport make_loss_report(std::vector<std::pair<std::string, double>> per_channel) {
  LossReport r;
  r.per_channel = std::move(per_channel);
  for (const auto& [name, loss] : r.per_channel) r.total += loss;
  r.n_prediction_channels = r.per_channel.size();
  r.normalized = normalized_loss(r.total, r.n_prediction_channels);
  return r;
}

inline nlohmann::json to_json(const LossReport& r) {
  nlohmann::json channels = nlohmann::json::object();
  nlohmann::json order = nlohmann::json::array();
  for (const auto& [name, loss] : r.per_channel) {
    channels[name] = loss;
    order.push_back(name);
  }
  return {{"per_channel", channels},
          {"channels", order},
          {"total", r.total},
          {"n_prediction_channels", r.n_prediction_channels},
          {"normalized", r.normalized}};
}

struct VarianceMap {
  std::vector<double> map;
  double mean = 0.0;
  double max = 0.0;
};

/// Squared real-vs-generated difference per pixel. When a mask is given,
/// only pixels with a non-zero mask enter the summary (others map to 0).
inline VarianceMap pixel_variance_map(std::span<const float> real,
                                      std::span<const float> generated,
                                      std::span<const std::uint8_t> valid = {}) {
  require(real.size() == generated.size() && !real.empty(),
          "pixel_variance_map inputs must share a non-empty shape");
  require(valid.empty() || valid.size() == real.size(), "mask shape mismatch");
  VarianceMap out;
  out.map.assign(real.size(), 0.0);
  double total = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < real.size(); ++i) {
    if (!valid.empty() && !valid[i]) continue;
    const double d = static_cast<double>(real[i]) - generated[i];
    out.map[i] = d * d;
    total += out.map[i];
    out.max = std::max(out.max, out.map[i]);
    ++count;
  }
  require(count > 0, "no valid pixels in pixel_variance_map");
  out.mean = total / static_cast<double>(count);
  return out;
}

struct RegressionFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
  std::vector<std::pair<double, double>> points;
};

/// Ordinary least squares line through (x, y) points.
inline RegressionFit fit_line(std::vector<std::pair<double, double>> points) {
  require(points.size() >= 2, "fit_line needs at least two points");
  const double n = static_cast<double>(points.size());
  double mx = 0.0;
  double my = 0.0;
  for (const auto& [x, y] : points) {
    mx += x;
    my += y;
  }
  mx /= n;
  my /= n;
  double sxx = 0.0;
  double sxy = 0.0;
  double syy = 0.0;
  for (const auto& [x, y] : points) {
    sxx += (x - mx) * (x - mx);
    sxy += (x - mx) * (y - my);
    syy += (y - my) * (y - my);
  }
  if (sxx == 0.0) fail(ErrorKind::degenerate_fit, "fit_line needs at least two distinct x values");
  RegressionFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  double ss_res = 0.0;
  for (const auto& [x, y] : points) {
    const double r = y - (fit.intercept + fit.slope * x);
    ss_res += r * r;
  }
  if (syy > 0.0) {
    fit.r_squared = 1.0 - ss_res / syy;
  } else {
    fit.r_squared = ss_res == 0.0 ? 1.0 : 0.0;
  }
  fit.points = std::move(points);
  return fit;
}

/// Largest channel count whose predicted loss stays under the threshold:
/// floor((threshold - intercept) / slope).
inline std::int64_t extrapolate_max_channels(const RegressionFit& fit, double loss_threshold) {
  require(fit.slope > 0.0, "extrapolation needs a positive slope");
  return static_cast<std::int64_t>(
      std::floor((loss_threshold - fit.intercept) / fit.slope));
}

inline nlohmann::json to_json(const RegressionFit& fit) {
  nlohmann::json pts = nlohmann::json::array();
  for (const auto& [x, y] : fit.points) pts.push_back({x, y});
  return {{"slope", fit.slope},
          {"intercept", fit.intercept},
          {"r_squared", fit.r_squared},
          {"points", pts}};
}

/// Fit plus extrapolation record; the bound is null unless the slope is
/// positive.
inline nlohmann::json extrapolation_json(const RegressionFit& fit, double threshold) {
  nlohmann::json j = {{"fit", to_json(fit)}, {"threshold", threshold}};
  if (fit.slope > 0.0) {
    j["max_channels"] = extrapolate_max_channels(fit, threshold);
  } else {
    j["max_channels"] = nullptr;
    j["reason"] = "non-positive slope gives no finite channel bound";
  }
  return j;
}

}  // namespace plexsyn
