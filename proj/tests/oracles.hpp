#pragma once

// Independent reference computations used only by tests. Nothing here calls
// into the code paths it is meant to check.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace oracle {

struct Stats {
  double mx, my, vx, vy, cov;
};

// Direct two-pass population statistics with explicit weights.
inline Stats weighted_stats(const std::vector<double>& x, const std::vector<double>& y,
                            const std::vector<double>& w) {
  Stats s{0, 0, 0, 0, 0};
  double wsum = 0.0;
  for (double v : w) wsum += v;
  for (std::size_t i = 0; i < x.size(); ++i) {
    s.mx += w[i] * x[i] / wsum;
    s.my += w[i] * y[i] / wsum;
  }
  for (std::size_t i = 0; i < x.size(); ++i) {
    s.vx += w[i] * (x[i] - s.mx) * (x[i] - s.mx) / wsum;
    s.vy += w[i] * (y[i] - s.my) * (y[i] - s.my) / wsum;
    s.cov += w[i] * (x[i] - s.mx) * (y[i] - s.my) / wsum;
  }
  return s;
}

inline double ssim_formula(const Stats& s, double c1, double c2) {
  return ((2 * s.mx * s.my + c1) * (2 * s.cov + c2)) /
         ((s.mx * s.mx + s.my * s.my + c1) * (s.vx + s.vy + c2));
}

// 2-D Gaussian weights evaluated directly on (dy, dx) offsets.
inline std::vector<double> gaussian_window(int size, double sigma) {
  std::vector<double> w;
  const int half = size / 2;
  for (int dy = -half; dy <= half; ++dy) {
    for (int dx = -half; dx <= half; ++dx) {
      w.push_back(std::exp(-(dx * dx + dy * dy) / (2 * sigma * sigma)));
    }
  }
  return w;
}

// Mean SSIM by visiting every valid window and summing its pixels directly.
inline double brute_force_mean_ssim(const std::vector<float>& a, const std::vector<float>& b,
                                    int height, int width, int size, double sigma,
                                    double c1, double c2) {
  const auto w = gaussian_window(size, sigma);
  double total = 0.0;
  int windows = 0;
  for (int y0 = 0; y0 + size <= height; ++y0) {
    for (int x0 = 0; x0 + size <= width; ++x0) {
      std::vector<double> xs, ys;
      for (int dy = 0; dy < size; ++dy) {
        for (int dx = 0; dx < size; ++dx) {
          xs.push_back(a[(y0 + dy) * width + x0 + dx]);
          ys.push_back(b[(y0 + dy) * width + x0 + dx]);
        }
      }
      total += ssim_formula(weighted_stats(xs, ys, w), c1, c2);
      ++windows;
    }
  }
  return total / windows;
}

// Area-weighted box mean via continuous interval intersection.
inline std::vector<double> box_downsample(const std::vector<double>& src, int h, int w,
                                          int th, int tw) {
  std::vector<double> out(th * tw, 0.0);
  const double sy = static_cast<double>(h) / th;
  const double sx = static_cast<double>(w) / tw;
  for (int i = 0; i < th; ++i) {
    for (int j = 0; j < tw; ++j) {
      const double y0 = i * sy, y1 = (i + 1) * sy;
      const double x0 = j * sx, x1 = (j + 1) * sx;
      double sum = 0.0;
      for (int r = 0; r < h; ++r) {
        const double oy = std::max(0.0, std::min<double>(y1, r + 1) - std::max<double>(y0, r));
        if (oy <= 0) continue;
        for (int c = 0; c < w; ++c) {
          const double ox = std::max(0.0, std::min<double>(x1, c + 1) - std::max<double>(x0, c));
          sum += oy * ox * src[r * w + c];
        }
      }
      out[i * tw + j] = sum / (sy * sx);
    }
  }
  return out;
}

inline double pearson(const std::vector<double>& a, const std::vector<double>& b) {
  const double n = static_cast<double>(a.size());
  double sa = 0, sb = 0, saa = 0, sbb = 0, sab = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sa += a[i];
    sb += b[i];
    saa += a[i] * a[i];
    sbb += b[i] * b[i];
    sab += a[i] * b[i];
  }
  const double cov = sab / n - (sa / n) * (sb / n);
  const double va = saa / n - (sa / n) * (sa / n);
  const double vb = sbb / n - (sb / n) * (sb / n);
  return cov / std::sqrt(va * vb);
}

// Least squares via the 2x2 normal equations [n sx; sx sxx][b; m] = [sy; sxy].
inline std::pair<double, double> normal_equations(const std::vector<std::pair<double, double>>& p) {
  double n = 0, sx = 0, sxx = 0, sy = 0, sxy = 0;
  for (auto [x, y] : p) {
    n += 1;
    sx += x;
    sxx += x * x;
    sy += y;
    sxy += x * y;
  }
  const double det = n * sxx - sx * sx;
  const double intercept = (sy * sxx - sx * sxy) / det;
  const double slope = (n * sxy - sx * sy) / det;
  return {slope, intercept};
}

inline std::vector<float> random_image(int n, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<float> dist(0.0f, 1.0f);
  std::vector<float> v(n);
  for (auto& x : v) x = dist(gen);
  return v;
}

}  // namespace oracle
