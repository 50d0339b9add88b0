#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "plexsyn/error.hpp"
#include "plexsyn/stack.hpp"

namespace plexsyn {

struct SsimConstants {
  double k1 = 0.01;
  double k2 = 0.03;
  double dynamic_range = 1.0;
  double c1 = 1e-4;
  double c2 = 9e-4;
  double c3 = 4.5e-4;

  /// c1 = (k1 L)^2, c2 = (k2 L)^2, c3 = c2 / 2.
  static SsimConstants from_k(double k1 = 0.01, double k2 = 0.03,
                              double dynamic_range = 1.0) {
    SsimConstants c;
    c.k1 = k1;
    c.k2 = k2;
    c.dynamic_range = dynamic_range;
    c.c1 = (k1 * dynamic_range) * (k1 * dynamic_range);
    c.c2 = (k2 * dynamic_range) * (k2 * dynamic_range);
    c.c3 = c.c2 / 2.0;
    c.validate();
    return c;
  }

  SsimConstants with_c3(double value) const {
    SsimConstants c = *this;
    c.c3 = value;
    c.validate();
    return c;
  }

  void validate() const {
    require(k1 > 0.0 && k2 > 0.0 && dynamic_range > 0.0,
            "SSIM k1, k2 and dynamic range must be positive");
    require(c1 > 0.0 && c2 > 0.0 && c3 > 0.0, "SSIM constants must be positive");
  }
};

struct SsimExponents {
  double alpha = 1.0;
  double beta = 1.0;
  double gamma = 1.0;

  void validate() const {
    require(alpha >= 0.0 && beta >= 0.0 && gamma >= 0.0,
            "SSIM exponents must be non-negative");
  }
};

enum class WindowWeighting { uniform, gaussian };

struct WindowSpec {
  std::size_t size = 11;
  WindowWeighting weighting = WindowWeighting::gaussian;
  double sigma = 1.5;

  static WindowSpec gaussian(std::size_t size = 11, double sigma = 1.5) {
    return {size, WindowWeighting::gaussian, sigma};
  }
  static WindowSpec uniform(std::size_t size) {
    return {size, WindowWeighting::uniform, 0.0};
  }

  void validate() const {
    require(size >= 3 && size % 2 == 1, "window size must be odd and >= 3");
    if (weighting == WindowWeighting::gaussian) {
      require(sigma > 0.0, "gaussian window sigma must be positive");
    }
  }

  /// 1-D profile summing to 1; the 2-D window is its outer product.
  std::vector<double> kernel() const {
    validate();
    std::vector<double> k(size, 1.0);
    if (weighting == WindowWeighting::gaussian) {
      const double center = static_cast<double>(size / 2);
      for (std::size_t i = 0; i < size; ++i) {
        const double d = static_cast<double>(i) - center;
        k[i] = std::exp(-d * d / (2.0 * sigma * sigma));
      }
    }
    double total = 0.0;
    for (double v : k) total += v;
    for (double& v : k) v /= total;
    return k;
  }

  /// Row-major size x size weights.
  std::vector<double> weights() const {
    const auto k = kernel();
    std::vector<double> w(size * size);
    for (std::size_t u = 0; u < size; ++u) {
      for (std::size_t v = 0; v < size; ++v) w[u * size + v] = k[u] * k[v];
    }
    return w;
  }
};

struct WindowStats {
  double mu_x = 0.0;
  double mu_y = 0.0;
  double var_x = 0.0;
  double var_y = 0.0;
  double cov_xy = 0.0;
};

/// Weighted population statistics of two equally sized pixel windows.
template <typename T>
WindowStats window_stats(std::span<const T> x, std::span<const T> y,
                         std::span<const double> weights) {
  require(x.size() == y.size() && x.size() == weights.size(),
          "window_stats inputs must match the window length");
  WindowStats s;
  for (std::size_t i = 0; i < x.size(); ++i) {
    s.mu_x += weights[i] * x[i];
    s.mu_y += weights[i] * y[i];
  }
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - s.mu_x;
    const double dy = y[i] - s.mu_y;
    s.var_x += weights[i] * dx * dx;
    s.var_y += weights[i] * dy * dy;
    s.cov_xy += weights[i] * dx * dy;
  }
  s.var_x = std::max(0.0, s.var_x);
  s.var_y = std::max(0.0, s.var_y);
  return s;
}

template <typename T>
WindowStats window_stats(std::span<const T> x, std::span<const T> y,
                         const WindowSpec& window) {
  const auto w = window.weights();
  return window_stats<T>(x, y, std::span<const double>(w));
}

/// Equal-weight statistics over every element (whole image as one window).
template <typename T>
WindowStats global_stats(std::span<const T> x, std::span<const T> y) {
  require(x.size() == y.size() && !x.empty(),
          "global_stats inputs must be non-empty and equally sized");
  const std::vector<double> w(x.size(), 1.0 / static_cast<double>(x.size()));
  return window_stats<T>(x, y, std::span<const double>(w));
}

inline double luminance_term(const WindowStats& s, const SsimConstants& c) {
  return (2.0 * s.mu_x * s.mu_y + c.c1) /
         (s.mu_x * s.mu_x + s.mu_y * s.mu_y + c.c1);
}

inline double contrast_term(const WindowStats& s, const SsimConstants& c) {
  const double sx = std::sqrt(s.var_x);
  const double sy = std::sqrt(s.var_y);
  return (2.0 * sx * sy + c.c2) / (s.var_x + s.var_y + c.c2);
}

inline double structure_term(const WindowStats& s, const SsimConstants& c) {
  return (s.cov_xy + c.c3) / (std::sqrt(s.var_x) * std::sqrt(s.var_y) + c.c3);
}

/// l^alpha * c^beta * s^gamma.
inline double ssim_full(const WindowStats& s, const SsimExponents& e,
                        const SsimConstants& c) {
  e.validate();
  const double structure = structure_term(s, c);
  if (structure < 0.0 && e.gamma != std::floor(e.gamma)) {
    fail(ErrorKind::domain,
         "fractional structure exponent of a negative structure term");
  }
  return std::pow(luminance_term(s, c), e.alpha) *
         std::pow(contrast_term(s, c), e.beta) * std::pow(structure, e.gamma);
}

inline double ssim_simplified(const WindowStats& s, const SsimConstants& c) {
  return ((2.0 * s.mu_x * s.mu_y + c.c1) * (2.0 * s.cov_xy + c.c2)) /
         ((s.mu_x * s.mu_x + s.mu_y * s.mu_y + c.c1) *
          (s.var_x + s.var_y + c.c2));
}

namespace detail {

// Valid-region separable filter: out is (h-k+1) x (w-k+1).
inline std::vector<double> filter_valid(std::span<const double> image,
                                        std::size_t height, std::size_t width,
                                        std::span<const double> kernel) {
  const std::size_t k = kernel.size();
  const std::size_t oh = height - k + 1;
  const std::size_t ow = width - k + 1;
  std::vector<double> rows(height * ow);
  for (std::size_t y = 0; y < height; ++y) {
    const double* src = image.data() + y * width;
    for (std::size_t x = 0; x < ow; ++x) {
      double sum = 0.0;
      for (std::size_t t = 0; t < k; ++t) sum += kernel[t] * src[x + t];
      rows[y * ow + x] = sum;
    }
  }
  std::vector<double> out(oh * ow);
  for (std::size_t y = 0; y < oh; ++y) {
    for (std::size_t x = 0; x < ow; ++x) {
      double sum = 0.0;
      for (std::size_t t = 0; t < k; ++t) sum += kernel[t] * rows[(y + t) * ow + x];
      out[y * ow + x] = sum;
    }
  }
  return out;
}

/// Filtered first and second moments of one channel, reused across pairs.
struct ChannelMoments {
  std::vector<double> mean;
  std::vector<double> second;
};

inline ChannelMoments channel_moments(const ChannelView& ch,
                                      std::span<const double> kernel) {
  std::vector<double> x(ch.values.begin(), ch.values.end());
  std::vector<double> xx(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) xx[i] = x[i] * x[i];
  return {filter_valid(x, ch.height, ch.width, kernel),
          filter_valid(xx, ch.height, ch.width, kernel)};
}

}  // namespace detail

struct SsimMap {
  std::size_t height = 0;  // valid-region rows: image height - window + 1
  std::size_t width = 0;
  std::vector<double> values;
  double mean = 0.0;
};

namespace detail {

inline SsimMap ssim_from_moments(const ChannelView& a, const ChannelView& b,
                                 const ChannelMoments& ma,
                                 const ChannelMoments& mb,
                                 std::span<const double> kernel,
                                 const SsimConstants& c) {
  std::vector<double> xy(a.values.size());
  for (std::size_t i = 0; i < xy.size(); ++i) {
    xy[i] = static_cast<double>(a.values[i]) * b.values[i];
  }
  const auto exy = filter_valid(xy, a.height, a.width, kernel);
  SsimMap map;
  map.height = a.height - kernel.size() + 1;
  map.width = a.width - kernel.size() + 1;
  map.values.resize(exy.size());
  double total = 0.0;
  for (std::size_t i = 0; i < exy.size(); ++i) {
    WindowStats s;
    s.mu_x = ma.mean[i];
    s.mu_y = mb.mean[i];
    s.var_x = std::max(0.0, ma.second[i] - s.mu_x * s.mu_x);
    s.var_y = std::max(0.0, mb.second[i] - s.mu_y * s.mu_y);
    s.cov_xy = exy[i] - s.mu_x * s.mu_y;
    const double value = std::clamp(ssim_simplified(s, c), -1.0, 1.0);
    map.values[i] = value;
    total += value;
  }
  map.mean = total / static_cast<double>(map.values.size());
  return map;
}

inline void check_window_fits(const ChannelView& a, const ChannelView& b,
                              const WindowSpec& w) {
  w.validate();
  require(a.height == b.height && a.width == b.width,
          "SSIM inputs must have identical dimensions");
  require(a.values.size() == a.height * a.width &&
              b.values.size() == b.height * b.width,
          "channel view size does not match its dimensions");
  require(a.height >= w.size && a.width >= w.size,
          "image is smaller than the SSIM window");
}

}  // namespace detail

/// Simplified SSIM at every window position fully inside the image.
inline SsimMap ssim_map(const ChannelView& a, const ChannelView& b,
                        const WindowSpec& window, const SsimConstants& c) {
  detail::check_window_fits(a, b, window);
  c.validate();
  const auto kernel = window.kernel();
  const auto ma = detail::channel_moments(a, kernel);
  const auto mb = detail::channel_moments(b, kernel);
  return detail::ssim_from_moments(a, b, ma, mb, kernel, c);
}

/// Simplified SSIM with the whole image treated as a single window.
inline double ssim_global(const ChannelView& a, const ChannelView& b,
                          const SsimConstants& c) {
  require(a.height == b.height && a.width == b.width,
          "SSIM inputs must have identical dimensions");
  c.validate();
  return std::clamp(ssim_simplified(global_stats(a.values, b.values), c), -1.0,
                    1.0);
}

}  // namespace plexsyn
