#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <string>
#include <vector>

#include "plexsyn/error.hpp"
#include "plexsyn/random.hpp"
#include "plexsyn/stack.hpp"

namespace plexsyn {

struct SyntheticSpec {
  std::size_t height = 64;
  std::size_t width = 64;
  std::size_t channel_count = 24;
  std::size_t template_count = 4;
  double gain_min = 0.6;
  double gain_max = 1.4;
  double offset_min = 0.0;
  double offset_max = 0.2;
  double noise_sigma = 0.05;
  std::size_t blob_count = 10;
  std::uint64_t seed = 1;

  void validate() const {
    require(height >= 1 && width >= 1, "synthetic dimensions must be >= 1");
    require(channel_count >= 1, "synthetic stack needs at least one channel");
    require(template_count >= 1, "template count must be >= 1");
    require(template_count <= channel_count,
            "template count must not exceed channel count");
    require(std::isfinite(gain_min) && std::isfinite(gain_max) &&
                gain_min <= gain_max,
            "gain range must be a finite interval");
    require(gain_min * gain_max > 0.0, "gain range must exclude zero");
    require(std::isfinite(offset_min) && std::isfinite(offset_max) &&
                offset_min <= offset_max,
            "offset range must be a finite interval");
    require(std::isfinite(noise_sigma) && noise_sigma >= 0.0,
            "noise sigma must be >= 0");
    require(blob_count >= 1, "blob count must be >= 1");
  }
};

struct SyntheticStack {
  ChannelStack stack;
  std::vector<std::size_t> labels;  // template index per channel
};

/// Smooth template: a sum of Gaussian blobs rescaled so its peak is 1.
inline std::vector<double> blob_template(std::size_t height, std::size_t width,
                                         std::size_t blobs, Rng& rng) {
  std::vector<double> image(height * width, 0.0);
  const double extent = static_cast<double>(std::min(height, width));
  for (std::size_t b = 0; b < blobs; ++b) {
    const double cy = rng.uniform(0.0, static_cast<double>(height));
    const double cx = rng.uniform(0.0, static_cast<double>(width));
    const double sigma = rng.uniform(extent / 16.0, extent / 6.0);
    const double amplitude = rng.uniform(0.5, 1.0);
    const double inv = 1.0 / (2.0 * sigma * sigma);
    for (std::size_t y = 0; y < height; ++y) {
      const double dy = static_cast<double>(y) - cy;
      for (std::size_t x = 0; x < width; ++x) {
        const double dx = static_cast<double>(x) - cx;
        image[y * width + x] += amplitude * std::exp(-(dx * dx + dy * dy) * inv);
      }
    }
  }
  const double peak = *std::max_element(image.begin(), image.end());
  if (peak > 0.0) {
    for (auto& v : image) v /= peak;
  }
  return image;
}

/// channel c = gain_c * template[c % K] + offset_c + N(0, noise_sigma).
inline SyntheticStack generate_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  const std::size_t n = spec.height * spec.width;

  std::vector<std::vector<double>> templates;
  for (std::size_t t = 0; t < spec.template_count; ++t) {
    Rng rng(derive_seed(spec.seed, t));
    templates.push_back(
        blob_template(spec.height, spec.width, spec.blob_count, rng));
  }

  Rng affine(derive_seed(spec.seed, 1u << 20));
  Rng noise(derive_seed(spec.seed, (1u << 20) + 1));
  SyntheticStack out;
  std::vector<std::string> names;
  std::vector<float> data(n * spec.channel_count);
  for (std::size_t c = 0; c < spec.channel_count; ++c) {
    const std::size_t label = c % spec.template_count;
    const double gain = affine.uniform(spec.gain_min, spec.gain_max);
    const double offset = affine.uniform(spec.offset_min, spec.offset_max);
    const auto& base = templates[label];
    float* dst = data.data() + c * n;
    for (std::size_t i = 0; i < n; ++i) {
      double v = gain * base[i] + offset;
      if (spec.noise_sigma > 0.0) v += noise.normal(0.0, spec.noise_sigma);
      dst[i] = std::isfinite(v) ? static_cast<float>(v) : 0.0f;
    }
    char name[32];
    std::snprintf(name, sizeof(name), "marker_%02zu", c);
    names.emplace_back(name);
    out.labels.push_back(label);
  }
  out.stack = ChannelStack(spec.height, spec.width, std::move(names),
                           std::move(data));
  return out;
}

}  // namespace plexsyn
