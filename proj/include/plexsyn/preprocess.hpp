#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <vector>

#include "plexsyn/error.hpp"
#include "plexsyn/parallel.hpp"
#include "plexsyn/random.hpp"
#include "plexsyn/stack.hpp"

namespace plexsyn {

namespace detail {

struct AxisWeight {
  std::size_t source;
  double weight;
};

// Output cell i spans source coordinates [i*src/dst, (i+1)*src/dst). Working
// in units scaled by dst keeps every overlap an exact integer.
inline std::vector<std::vector<AxisWeight>> area_weights(std::size_t src,
                                                         std::size_t dst) {
  std::vector<std::vector<AxisWeight>> weights(dst);
  for (std::size_t i = 0; i < dst; ++i) {
    const std::uint64_t lo = i * src;
    const std::uint64_t hi = (i + 1) * src;
    for (std::size_t s = lo / dst; s < src && s * dst < hi; ++s) {
      const std::uint64_t cell_lo = std::max<std::uint64_t>(s * dst, lo);
      const std::uint64_t cell_hi = std::min<std::uint64_t>((s + 1) * dst, hi);
      if (cell_hi > cell_lo) {
        weights[i].push_back(
            {s, static_cast<double>(cell_hi - cell_lo) / static_cast<double>(src)});
      }
    }
  }
  return weights;
}

}  // namespace detail

/// Area-averaging reduction: each output pixel is the overlap-weighted mean
/// of the source box it covers.
inline ChannelStack downsample_area(const ChannelStack& stack,
                                    std::size_t target_h, std::size_t target_w,
                                    unsigned threads = 1) {
  require(target_h >= 1 && target_w >= 1, "target dimensions must be >= 1");
  require(target_h <= stack.height() && target_w <= stack.width(),
          "downsample_area cannot upscale");
  const auto rows = detail::area_weights(stack.height(), target_h);
  const auto cols = detail::area_weights(stack.width(), target_w);

  std::vector<float> out(target_h * target_w * stack.channels());
  parallel_for(stack.channels(), threads, [&](std::size_t c) {
    const auto src = stack.channel(c);
    float* dst = out.data() + c * target_h * target_w;
    for (std::size_t i = 0; i < target_h; ++i) {
      for (std::size_t j = 0; j < target_w; ++j) {
        double sum = 0.0;
        for (const auto& r : rows[i]) {
          double row_sum = 0.0;
          for (const auto& q : cols[j]) {
            row_sum += q.weight * src[r.source * stack.width() + q.source];
          }
          sum += r.weight * row_sum;
        }
        dst[i * target_w + j] = static_cast<float>(sum);
      }
    }
  });
  return ChannelStack(target_h, target_w, stack.names(), std::move(out));
}

/// Per-channel min-max rescale to [0, 1]; constant channels become zero.
inline ChannelStack normalize_minmax(const ChannelStack& stack,
                                     unsigned threads = 1) {
  std::vector<float> out(stack.data().begin(), stack.data().end());
  const std::size_t n = stack.pixels();
  parallel_for(stack.channels(), threads, [&](std::size_t c) {
    std::span<float> values(out.data() + c * n, n);
    const auto [lo_it, hi_it] = std::minmax_element(values.begin(), values.end());
    const double lo = *lo_it;
    const double range = static_cast<double>(*hi_it) - lo;
    for (auto& v : values) {
      v = range > 0.0 ? static_cast<float>((v - lo) / range) : 0.0f;
    }
  });
  return ChannelStack(stack.height(), stack.width(), stack.names(),
                      std::move(out));
}

struct SplitResult {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
  std::uint64_t seed = 0;
};

/// Seeded shuffle then cut; train size is round-half-up of n * fraction,
/// clamped so neither side is empty. Each side is returned in ascending order.
inline SplitResult split_indices(std::size_t n, double train_fraction,
                                 std::uint64_t seed) {
  require(train_fraction > 0.0 && train_fraction < 1.0,
          "train fraction must lie strictly between 0 and 1");
  require(n >= 2, "need at least two items to split");
  auto train_size = static_cast<std::size_t>(
      std::floor(static_cast<double>(n) * train_fraction + 0.5));
  train_size = std::clamp<std::size_t>(train_size, 1, n - 1);

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(seed);
  rng.shuffle(std::span<std::size_t>(order));

  SplitResult split;
  split.seed = seed;
  split.train.assign(order.begin(), order.begin() + train_size);
  split.test.assign(order.begin() + train_size, order.end());
  std::sort(split.train.begin(), split.train.end());
  std::sort(split.test.begin(), split.test.end());
  return split;
}

template <typename T>
SplitResult split_train_test(std::span<const T> items, double train_fraction,
                             std::uint64_t seed) {
  return split_indices(items.size(), train_fraction, seed);
}

}  // namespace plexsyn
