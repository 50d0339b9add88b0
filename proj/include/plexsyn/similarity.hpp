#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "plexsyn/error.hpp"
#include "plexsyn/format.hpp"
#include "plexsyn/parallel.hpp"
#include "plexsyn/ssim.hpp"
#include "plexsyn/stack.hpp"

namespace plexsyn {

enum class SimilarityKind { ssim, pearson };

inline const char* to_string(SimilarityKind kind) {
  return kind == SimilarityKind::ssim ? "ssim" : "pearson";
}

/// Symmetric n x n channel similarity, row-major.
struct SimilarityMatrix {
  SimilarityKind kind = SimilarityKind::ssim;
  std::vector<std::string> names;
  std::vector<double> values;

  std::size_t size() const { return names.size(); }
  double at(std::size_t i, std::size_t j) const { return values[i * size() + j]; }
  double& at(std::size_t i, std::size_t j) { return values[i * size() + j]; }

  void validate() const {
    const std::size_t n = size();
    require(n >= 1 && values.size() == n * n,
            "similarity matrix shape does not match its names");
    for (std::size_t i = 0; i < n; ++i) {
      require(std::abs(at(i, i) - 1.0) <= 1e-9,
              "similarity matrix diagonal must be 1");
      for (std::size_t j = 0; j < n; ++j) {
        const double v = at(i, j);
        require(std::isfinite(v) && v >= -1.0 - 1e-9 && v <= 1.0 + 1e-9,
                "similarity entries must lie in [-1, 1]");
        require(v == at(j, i), "similarity matrix must be symmetric");
      }
    }
  }
};

/// Whole-image SSIM is an alternative to windowed mean SSIM.
enum class SsimMode { windowed, global };

namespace detail {

inline std::vector<std::pair<std::size_t, std::size_t>> upper_pairs(
    std::size_t n) {
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) pairs.emplace_back(i, j);
  }
  return pairs;
}

}  // namespace detail

/// Mean windowed SSIM between every channel pair; each i<j entry is
/// computed once and mirrored.
inline SimilarityMatrix ssim_matrix(const ChannelStack& stack,
                                    const WindowSpec& window,
                                    const SsimConstants& constants,
                                    SsimMode mode = SsimMode::windowed,
                                    unsigned threads = 1) {
  const std::size_t n = stack.channels();
  require(n >= 2, "SSIM matrix needs at least two channels");
  constants.validate();
  SimilarityMatrix m;
  m.kind = SimilarityKind::ssim;
  m.names = stack.names();
  m.values.assign(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) m.at(i, i) = 1.0;

  const auto pairs = detail::upper_pairs(n);
  std::vector<double> scores(pairs.size());
  if (mode == SsimMode::global) {
    parallel_for(pairs.size(), threads, [&](std::size_t p) {
      scores[p] = ssim_global(stack.view(pairs[p].first),
                              stack.view(pairs[p].second), constants);
    });
  } else {
    detail::check_window_fits(stack.view(0), stack.view(0), window);
    const auto kernel = window.kernel();
    std::vector<detail::ChannelMoments> moments(n);
    parallel_for(n, threads, [&](std::size_t c) {
      moments[c] = detail::channel_moments(stack.view(c), kernel);
    });
    parallel_for(pairs.size(), threads, [&](std::size_t p) {
      const auto [i, j] = pairs[p];
      scores[p] = detail::ssim_from_moments(stack.view(i), stack.view(j),
                                            moments[i], moments[j], kernel,
                                            constants)
                      .mean;
    });
  }
  for (std::size_t p = 0; p < pairs.size(); ++p) {
    const auto [i, j] = pairs[p];
    m.at(i, j) = scores[p];
    m.at(j, i) = scores[p];
  }
  return m;
}

/// Pearson correlation over all pixels. A constant channel has no defined
/// correlation and scores 0 against every other channel.
inline double pearson(std::span<const float> a, std::span<const float> b) {
  require(a.size() == b.size() && !a.empty(),
          "pearson inputs must be non-empty and equally sized");
  double ma = 0.0;
  double mb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= static_cast<double>(a.size());
  mb /= static_cast<double>(b.size());
  double sab = 0.0;
  double saa = 0.0;
  double sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double da = a[i] - ma;
    const double db = b[i] - mb;
    sab += da * db;
    saa += da * da;
    sbb += db * db;
  }
  if (saa <= 0.0 || sbb <= 0.0) return 0.0;
  return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

inline SimilarityMatrix pearson_matrix(const ChannelStack& stack,
                                       unsigned threads = 1) {
  const std::size_t n = stack.channels();
  require(n >= 2, "Pearson matrix needs at least two channels");
  SimilarityMatrix m;
  m.kind = SimilarityKind::pearson;
  m.names = stack.names();
  m.values.assign(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) m.at(i, i) = 1.0;
  const auto pairs = detail::upper_pairs(n);
  std::vector<double> scores(pairs.size());
  parallel_for(pairs.size(), threads, [&](std::size_t p) {
    scores[p] = pearson(stack.channel(pairs[p].first),
                        stack.channel(pairs[p].second));
  });
  for (std::size_t p = 0; p < pairs.size(); ++p) {
    const auto [i, j] = pairs[p];
    m.at(i, j) = scores[p];
    m.at(j, i) = scores[p];
  }
  return m;
}

/// Header row of channel names followed by n rows of values.
inline std::string to_csv(const SimilarityMatrix& m) {
  std::string out;
  for (std::size_t i = 0; i < m.size(); ++i) {
    if (i) out += ',';
    out += csv_field(m.names[i]);
  }
  out += '\n';
  for (std::size_t i = 0; i < m.size(); ++i) {
    for (std::size_t j = 0; j < m.size(); ++j) {
      if (j) out += ',';
      out += format_double(m.at(i, j));
    }
    out += '\n';
  }
  return out;
}

inline nlohmann::json to_json(const SimilarityMatrix& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (std::size_t i = 0; i < m.size(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (std::size_t j = 0; j < m.size(); ++j) row.push_back(m.at(i, j));
    rows.push_back(std::move(row));
  }
  return {{"kind", to_string(m.kind)}, {"names", m.names}, {"values", rows}};
}

inline SimilarityMatrix similarity_from_json(const nlohmann::json& j) {
  SimilarityMatrix m;
  const std::string kind = j.at("kind").get<std::string>();
  require(kind == "ssim" || kind == "pearson", "unknown similarity kind");
  m.kind = kind == "ssim" ? SimilarityKind::ssim : SimilarityKind::pearson;
  m.names = j.at("names").get<std::vector<std::string>>();
  for (const auto& row : j.at("values")) {
    require(row.size() == m.names.size(), "similarity row length mismatch");
    for (const auto& v : row) m.values.push_back(v.get<double>());
  }
  m.validate();
  return m;
}

}  // namespace plexsyn
