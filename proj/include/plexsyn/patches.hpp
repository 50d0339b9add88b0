#pragma once

#include <algorithm>
#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "plexsyn/cluster.hpp"
#include "plexsyn/error.hpp"
#include "plexsyn/stack.hpp"

namespace plexsyn {

/// Supervised rows built from an image stack: each row pairs the
/// concatenated neighbourhoods of the source channels with the centre-pixel
/// values of the target channels.
struct PatchDataset {
  std::size_t radius = 0;
  std::size_t stride = 1;
  std::size_t feature_dim = 0;
  std::size_t target_count = 0;
  std::vector<std::size_t> sources;
  std::vector<std::size_t> targets;
  std::vector<double> features;       // rows x feature_dim
  std::vector<double> target_values;  // rows x target_count
  std::vector<std::pair<std::size_t, std::size_t>> centers;  // (y, x)

  std::size_t rows() const { return centers.size(); }

  std::span<const double> feature_row(std::size_t r) const {
    return std::span<const double>(features).subspan(r * feature_dim, feature_dim);
  }
  std::span<const double> target_row(std::size_t r) const {
    return std::span<const double>(target_values)
        .subspan(r * target_count, target_count);
  }

  PatchDataset subset(std::span<const std::size_t> row_indices) const {
    PatchDataset out;
    out.radius = radius;
    out.stride = stride;
    out.feature_dim = feature_dim;
    out.target_count = target_count;
    out.sources = sources;
    out.targets = targets;
    out.features.reserve(row_indices.size() * feature_dim);
    out.target_values.reserve(row_indices.size() * target_count);
    for (std::size_t r : row_indices) {
      require(r < rows(), "patch row index out of range");
      const auto f = feature_row(r);
      const auto t = target_row(r);
      out.features.insert(out.features.end(), f.begin(), f.end());
      out.target_values.insert(out.target_values.end(), t.begin(), t.end());
      out.centers.push_back(centers[r]);
    }
    return out;
  }
};

/// Centres whose full (2r+1)^2 patch fits inside the image, on a stride grid.
inline std::vector<std::pair<std::size_t, std::size_t>> patch_centers(
    std::size_t height, std::size_t width, std::size_t radius,
    std::size_t stride) {
  require(stride >= 1, "patch stride must be >= 1");
  require(2 * radius + 1 <= height && 2 * radius + 1 <= width,
          "patch radius too large for the image");
  std::vector<std::pair<std::size_t, std::size_t>> out;
  for (std::size_t y = radius; y + radius < height; y += stride) {
    for (std::size_t x = radius; x + radius < width; x += stride) out.emplace_back(y, x);
  }
  return out;
}

inline void check_source_target(const ChannelStack& stack,
                                std::span<const std::size_t> sources,
                                std::span<const std::size_t> targets) {
  require(!sources.empty(), "need at least one conditioning channel");
  require(!targets.empty(), "need at least one target channel");
  for (auto c : sources) require(c < stack.channels(), "source channel out of range");
  for (auto c : targets) require(c < stack.channels(), "target channel out of range");
  for (auto c : targets) {
    require(std::find(sources.begin(), sources.end(), c) == sources.end(),
            "conditioning and target channels overlap");
  }
  std::vector<std::size_t> t(targets.begin(), targets.end());
  std::sort(t.begin(), t.end());
  require(std::adjacent_find(t.begin(), t.end()) == t.end(),
          "target channels must be unique");
}

/// Feature vector for one centre: selected channels in index order, each a
/// row-major (2r+1)^2 neighbourhood.
inline void gather_features(const ChannelStack& stack,
                            std::span<const std::size_t> sources,
                            std::size_t radius, std::size_t cy, std::size_t cx,
                            std::vector<double>& out) {
  for (std::size_t c : sources) {
    for (std::size_t y = cy - radius; y <= cy + radius; ++y) {
      for (std::size_t x = cx - radius; x <= cx + radius; ++x) {
        out.push_back(stack.at(c, y, x));
      }
    }
  }
}

inline PatchDataset extract_patches(const ChannelStack& stack,
                                    const ChannelSelection& selection,
                                    std::span<const std::size_t> targets,
                                    std::size_t radius, std::size_t stride = 1) {
  check_source_target(stack, selection.indices, targets);
  PatchDataset ds;
  ds.radius = radius;
  ds.stride = stride;
  ds.sources = selection.indices;
  ds.targets.assign(targets.begin(), targets.end());
  const std::size_t side = 2 * radius + 1;
  ds.feature_dim = ds.sources.size() * side * side;
  ds.target_count = ds.targets.size();
  ds.centers = patch_centers(stack.height(), stack.width(), radius, stride);
  ds.features.reserve(ds.centers.size() * ds.feature_dim);
  ds.target_values.reserve(ds.centers.size() * ds.target_count);
  for (const auto& [cy, cx] : ds.centers) {
    gather_features(stack, ds.sources, radius, cy, cx, ds.features);
    for (std::size_t t : ds.targets) ds.target_values.push_back(stack.at(t, cy, cx));
  }
  return ds;
}

}  // namespace plexsyn
