#pragma once

#include <algorithm>
#include <cmath>
#include <span>

#include "plexsyn/error.hpp"

namespace plexsyn {

inline constexpr double probability_clamp = 1e-7;

/// Mean absolute deviation over all entries.
inline double l1_loss(std::span<const double> predicted,
                      std::span<const double> actual) {
  require(predicted.size() == actual.size(), "l1_loss shape mismatch");
  require(!predicted.empty(), "l1_loss needs at least one entry");
  double total = 0.0;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    total += std::abs(actual[i] - predicted[i]);
  }
  return total / static_cast<double>(predicted.size());
}

inline double clamp_probability(double p) {
  return std::clamp(p, probability_clamp, 1.0 - probability_clamp);
}

/// E[log D(real)] + E[log(1 - D(fake))] with probabilities clamped away
/// from 0 and 1.
inline double gan_loss(std::span<const double> d_real,
                       std::span<const double> d_fake) {
  require(!d_real.empty() && !d_fake.empty(), "gan_loss needs non-empty inputs");
  const auto check = [](double p) {
    require(p >= 0.0 && p <= 1.0, "discriminator outputs must lie in [0, 1]");
  };
  double real = 0.0;
  for (double p : d_real) {
    check(p);
    real += std::log(clamp_probability(p));
  }
  double fake = 0.0;
  for (double p : d_fake) {
    check(p);
    fake += std::log(clamp_probability(1.0 - p));
  }
  return real / static_cast<double>(d_real.size()) +
         fake / static_cast<double>(d_fake.size());
}

/// gan + lambda * l1.
inline double combined_objective(double gan, double l1, double lambda) {
  require(lambda >= 0.0, "lambda must be >= 0");
  return gan + lambda * l1;
}

}  // namespace plexsyn
