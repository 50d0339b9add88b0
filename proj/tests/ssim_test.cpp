#include <gtest/gtest.h>

#include <cmath>

#include "oracles.hpp"
#include "plexsyn/random.hpp"
#include "plexsyn/similarity.hpp"
#include "plexsyn/synthetic.hpp"

using namespace plexsyn;

namespace {

const SsimConstants kC = SsimConstants::from_k();

WindowStats stats_of(const std::vector<double>& x, const std::vector<double>& y) {
  return global_stats<double>(x, y);
}

WindowStats random_stats(Rng& rng) {
  WindowStats s;
  s.mu_x = rng.uniform();
  s.mu_y = rng.uniform();
  s.var_x = rng.uniform(0.0, 0.25);
  s.var_y = rng.uniform(0.0, 0.25);
  s.cov_xy = rng.uniform(-1.0, 1.0) * std::sqrt(s.var_x * s.var_y);
  return s;
}

ChannelStack stack_from(std::size_t h, std::size_t w, const std::vector<std::vector<float>>& chans) {
  std::vector<std::string> names;
  std::vector<float> data;
  for (std::size_t c = 0; c < chans.size(); ++c) {
    names.push_back("c" + std::to_string(c));
    data.insert(data.end(), chans[c].begin(), chans[c].end());
  }
  return ChannelStack(h, w, names, data);
}

}  // namespace

TEST(SsimConstants, DefaultsAndValidation) {
  EXPECT_DOUBLE_EQ(kC.c1, 1e-4);
  EXPECT_DOUBLE_EQ(kC.c2, 9e-4);
  EXPECT_DOUBLE_EQ(kC.c3, 4.5e-4);
  EXPECT_THROW(SsimConstants::from_k(0.0), Error);
  EXPECT_THROW(kC.with_c3(0.0), Error);
  EXPECT_THROW(WindowSpec::gaussian(4).kernel(), Error);
  EXPECT_THROW(WindowSpec::gaussian(1).kernel(), Error);
  EXPECT_THROW(WindowSpec::gaussian(5, 0.0).kernel(), Error);
}

TEST(WindowSpecWeights, SumToOneAndMatchDirectGaussian) {
  for (auto spec : {WindowSpec::gaussian(), WindowSpec::gaussian(7, 0.8), WindowSpec::uniform(5)}) {
    const auto w = spec.weights();
    double total = 0;
    for (double v : w) total += v;
    EXPECT_NEAR(total, 1.0, 1e-12);
  }
  const auto w = WindowSpec::gaussian().weights();
  auto direct = oracle::gaussian_window(11, 1.5);
  double total = 0;
  for (double v : direct) total += v;
  for (std::size_t i = 0; i < w.size(); ++i) EXPECT_NEAR(w[i], direct[i] / total, 1e-15);
}

TEST(WindowStatsTest, Examples) {
  const auto s = window_stats<double>(std::vector<double>{0, 1}, std::vector<double>{0, 1},
                                      std::vector<double>{0.5, 0.5});
  EXPECT_DOUBLE_EQ(s.mu_x, 0.5);
  EXPECT_DOUBLE_EQ(s.var_x, 0.25);
  EXPECT_DOUBLE_EQ(s.cov_xy, 0.25);

  const auto flat = stats_of({0.3, 0.3, 0.3}, {0.7, 0.7, 0.7});
  EXPECT_EQ(flat.var_x, 0.0);
  EXPECT_EQ(flat.var_y, 0.0);
  EXPECT_EQ(flat.cov_xy, 0.0);

  const std::vector<double> x = {0, 0.2, 0.9, 1}, y = {1, 0.8, 0.1, 0};
  const auto t = stats_of(x, y);
  const auto o = oracle::weighted_stats(x, y, {1, 1, 1, 1});
  EXPECT_NEAR(t.mu_x, o.mx, 1e-12);
  EXPECT_NEAR(t.mu_y, o.my, 1e-12);
  EXPECT_NEAR(t.var_x, o.vx, 1e-12);
  EXPECT_NEAR(t.var_y, o.vy, 1e-12);
  EXPECT_NEAR(t.cov_xy, o.cov, 1e-12);

  EXPECT_THROW(window_stats<double>(std::vector<double>{0, 1}, std::vector<double>{0},
                                    std::vector<double>{0.5, 0.5}),
               Error);
}

TEST(WindowStatsTest, CovarianceBoundedBySpreads) {
  Rng rng(3);
  for (int t = 0; t < 200; ++t) {
    std::vector<double> x(9), y(9);
    for (int i = 0; i < 9; ++i) {
      x[i] = rng.uniform();
      y[i] = rng.uniform();
    }
    const auto s = window_stats<double>(x, y, WindowSpec::gaussian(3, 1.0));
    EXPECT_GE(s.var_x, 0.0);
    EXPECT_LE(std::abs(s.cov_xy), std::sqrt(s.var_x * s.var_y) + 1e-9);
  }
}

TEST(Terms, ContrastExamples) {
  WindowStats s;
  s.var_x = s.var_y = 0.04;
  EXPECT_DOUBLE_EQ(contrast_term(s, kC), 1.0);
  s.var_x = 0.25;
  s.var_y = 0.0;
  EXPECT_NEAR(contrast_term(s, kC), 9e-4 / (0.25 + 9e-4), 1e-15);
  EXPECT_NEAR(contrast_term(s, kC), 0.003587, 1e-6);
  s.var_x = 0;
  EXPECT_EQ(contrast_term(s, kC), 1.0);
}

TEST(Terms, StructureExamples) {
  WindowStats s;
  s.var_x = 0.09;
  s.var_y = 0.04;
  s.cov_xy = 0.3 * 0.2;
  EXPECT_NEAR(structure_term(s, kC), 1.0, 1e-15);
  s.var_x = s.var_y = 0.25;
  s.cov_xy = -0.25;
  EXPECT_NEAR(structure_term(s, kC), (-0.25 + 4.5e-4) / (0.25 + 4.5e-4), 1e-15);
  EXPECT_NEAR(structure_term(s, kC), -0.99641, 1e-5);
  EXPECT_EQ(structure_term(WindowStats{}, kC), 1.0);
}

TEST(Terms, LuminanceExamples) {
  WindowStats s;
  s.mu_x = s.mu_y = 0.5;
  EXPECT_EQ(luminance_term(s, kC), 1.0);
  s.mu_y = 0;
  EXPECT_NEAR(luminance_term(s, kC), 1e-4 / (0.25 + 1e-4), 1e-15);
  EXPECT_NEAR(luminance_term(s, kC), 3.998e-4, 1e-7);
  EXPECT_EQ(luminance_term(WindowStats{}, kC), 1.0);
}

TEST(SsimFull, ExamplesAndDomainError) {
  Rng rng(1);
  const auto s = random_stats(rng);
  EXPECT_EQ(ssim_full(s, {0, 0, 0}, kC), 1.0);
  EXPECT_NEAR(ssim_full(s, {1, 1, 1}, kC), ssim_simplified(s, kC), 1e-12);

  const auto t = stats_of({0, 0.2, 0.9, 1}, {1, 0.8, 0.1, 0});
  const auto o = oracle::weighted_stats({0, 0.2, 0.9, 1}, {1, 0.8, 0.1, 0}, {1, 1, 1, 1});
  const double l = (2 * o.mx * o.my + kC.c1) / (o.mx * o.mx + o.my * o.my + kC.c1);
  const double c = (2 * std::sqrt(o.vx * o.vy) + kC.c2) / (o.vx + o.vy + kC.c2);
  const double st = (o.cov + kC.c3) / (std::sqrt(o.vx * o.vy) + kC.c3);
  EXPECT_NEAR(ssim_full(t, {1, 2, 1}, kC), l * c * c * st, 1e-12);

  EXPECT_THROW(ssim_full(t, {1, 1, 0.5}, kC), Error);
  try {
    ssim_full(t, {1, 1, 0.5}, kC);
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::domain);
  }
  EXPECT_THROW(ssim_full(t, {-1, 1, 1}, kC), Error);
}

TEST(SsimSimplified, Examples) {
  const auto self = stats_of({0.1, 0.5, 0.7}, {0.1, 0.5, 0.7});
  EXPECT_NEAR(ssim_simplified(self, kC), 1.0, 1e-15);
  const auto anti = stats_of({0, 1}, {1, 0});
  EXPECT_NEAR(ssim_simplified(anti, kC), (-0.5 + 9e-4) / (0.5 + 9e-4), 1e-15);
  EXPECT_NEAR(ssim_simplified(anti, kC), -0.99641, 1e-5);
}

TEST(SsimProperties, SymmetryIdentityBoundsShiftAndGain) {
  Rng rng(11);
  for (int t = 0; t < 500; ++t) {
    const auto s = random_stats(rng);
    WindowStats swapped{s.mu_y, s.mu_x, s.var_y, s.var_x, s.cov_xy};
    EXPECT_EQ(ssim_simplified(s, kC), ssim_simplified(swapped, kC));
    EXPECT_EQ(luminance_term(s, kC), luminance_term(swapped, kC));
    EXPECT_EQ(contrast_term(s, kC), contrast_term(swapped, kC));
    EXPECT_EQ(structure_term(s, kC), structure_term(swapped, kC));
    EXPECT_NEAR(ssim_full(s, {1, 1, 1}, kC), ssim_simplified(s, kC), 1e-12);
    EXPECT_GT(luminance_term(s, kC), 0.0);
    EXPECT_LE(luminance_term(s, kC), 1.0);
    EXPECT_GT(contrast_term(s, kC), 0.0);
    EXPECT_LE(contrast_term(s, kC), 1.0);
  }

  for (int t = 0; t < 50; ++t) {
    std::vector<double> x(25), y(25), xs(25), gx(25), gy(25);
    const double k = rng.uniform(0.05, 0.5);
    const double g = rng.uniform(0.5, 2.0);
    for (int i = 0; i < 25; ++i) {
      x[i] = rng.uniform();
      y[i] = rng.uniform();
      xs[i] = x[i] + k;
      gx[i] = g * x[i];
      gy[i] = g * y[i];
    }
    const auto base = stats_of(x, y);
    const auto shifted = stats_of(xs, y);
    EXPECT_NE(luminance_term(base, kC), luminance_term(shifted, kC));
    EXPECT_NEAR(contrast_term(base, kC), contrast_term(shifted, kC), 1e-12);
    EXPECT_NEAR(structure_term(base, kC), structure_term(shifted, kC), 1e-12);

    const auto tiny = kC.with_c3(1e-12);
    EXPECT_NEAR(structure_term(base, tiny), structure_term(stats_of(gx, gy), tiny), 1e-6);
  }
}

TEST(SsimMapTest, SelfSimilarityAndErrors) {
  const auto img = oracle::random_image(20 * 20, 4);
  const ChannelView v{img, 20, 20};
  const auto m = ssim_map(v, v, WindowSpec::gaussian(), kC);
  EXPECT_EQ(m.height, 10u);
  EXPECT_EQ(m.width, 10u);
  for (double x : m.values) EXPECT_NEAR(x, 1.0, 1e-9);
  EXPECT_NEAR(m.mean, 1.0, 1e-9);

  const auto small = oracle::random_image(64, 1);
  const ChannelView s{small, 8, 8};
  EXPECT_THROW(ssim_map(s, s, WindowSpec::gaussian(9), kC), Error);
  const ChannelView other{img, 20, 20};
  EXPECT_THROW(ssim_map(s, other, WindowSpec::gaussian(3), kC), Error);
}

TEST(SsimMapTest, MatchesBruteForceOracle) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto a = oracle::random_image(256, 2 * seed);
    const auto b = oracle::random_image(256, 2 * seed + 1);
    const ChannelView va{a, 16, 16}, vb{b, 16, 16};
    const auto m = ssim_map(va, vb, WindowSpec::gaussian(), kC);
    EXPECT_NEAR(m.mean, oracle::brute_force_mean_ssim(a, b, 16, 16, 11, 1.5, kC.c1, kC.c2), 1e-6);
    for (double x : m.values) {
      EXPECT_GE(x, -1.0);
      EXPECT_LE(x, 1.0);
    }
  }
}

TEST(SsimMapTest, AnticorrelatedClampsInsideRange) {
  std::vector<float> a(121), b(121);
  for (int i = 0; i < 121; ++i) {
    a[i] = (i % 2) ? 1.0f : 0.0f;
    b[i] = 1.0f - a[i];
  }
  const auto m = ssim_map({a, 11, 11}, {b, 11, 11}, WindowSpec::uniform(11), kC);
  ASSERT_EQ(m.values.size(), 1u);
  EXPECT_LT(m.mean, -0.9);
  EXPECT_GE(m.mean, -1.0);
}

TEST(SsimGlobal, EqualsSimplifiedOnGlobalStats) {
  const auto a = oracle::random_image(100, 5);
  const auto b = oracle::random_image(100, 6);
  const std::vector<double> da(a.begin(), a.end()), db(b.begin(), b.end());
  const auto o = oracle::weighted_stats(da, db, std::vector<double>(100, 1.0));
  EXPECT_NEAR(ssim_global({a, 10, 10}, {b, 10, 10}, kC), oracle::ssim_formula(o, kC.c1, kC.c2), 1e-12);
}

TEST(SsimMatrixTest, DiagonalSymmetryAndPairwiseOracle) {
  SyntheticSpec spec;
  spec.height = spec.width = 24;
  spec.channel_count = 3;
  spec.template_count = 2;
  const auto syn = generate_synthetic(spec);
  const auto m = ssim_matrix(syn.stack, WindowSpec::gaussian(), kC);
  m.validate();
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(m.at(i, i), 1.0);
    for (std::size_t j = 0; j < 3; ++j) {
      EXPECT_EQ(m.at(i, j), m.at(j, i));
      if (i != j) {
        EXPECT_NEAR(m.at(i, j),
                    ssim_map(syn.stack.view(i), syn.stack.view(j), WindowSpec::gaussian(), kC).mean,
                    1e-12);
      }
    }
  }
  const auto g = ssim_matrix(syn.stack, WindowSpec::gaussian(), kC, SsimMode::global);
  EXPECT_NEAR(g.at(0, 1), ssim_global(syn.stack.view(0), syn.stack.view(1), kC), 1e-15);
}

TEST(SsimMatrixTest, ThreadCountDoesNotChangeBits) {
  SyntheticSpec spec;
  spec.height = spec.width = 32;
  spec.channel_count = 9;
  const auto syn = generate_synthetic(spec);
  const auto one = ssim_matrix(syn.stack, WindowSpec::gaussian(), kC, SsimMode::windowed, 1);
  const auto four = ssim_matrix(syn.stack, WindowSpec::gaussian(), kC, SsimMode::windowed, 4);
  EXPECT_EQ(one.values, four.values);
  EXPECT_EQ(to_csv(one), to_csv(four));
}

TEST(SsimMatrixTest, RequiresTwoChannelsAndFittingWindow) {
  EXPECT_THROW(ssim_matrix(ChannelStack(16, 16, {"a"}, std::vector<float>(256)),
                           WindowSpec::gaussian(), kC),
               Error);
  const auto s = stack_from(8, 8, {oracle::random_image(64, 1), oracle::random_image(64, 2)});
  EXPECT_THROW(ssim_matrix(s, WindowSpec::gaussian(), kC), Error);
  EXPECT_NO_THROW(ssim_matrix(s, WindowSpec::gaussian(), kC, SsimMode::global));
}

TEST(Pearson, Examples) {
  const std::vector<float> a = {1, 2, 3, 5}, b = {2, 2, 4, 4};
  std::vector<float> neg(4);
  for (int i = 0; i < 4; ++i) neg[i] = -2 * a[i] + 5;
  const auto s = stack_from(2, 2, {a, b, neg, {3, 3, 3, 3}});
  const auto m = pearson_matrix(s);
  m.validate();
  EXPECT_NEAR(m.at(0, 1), oracle::pearson({1, 2, 3, 5}, {2, 2, 4, 4}), 1e-12);
  EXPECT_NEAR(m.at(0, 2), -1.0, 1e-12);
  EXPECT_EQ(m.at(0, 3), 0.0);
  EXPECT_EQ(m.at(3, 3), 1.0);
  EXPECT_NEAR(pearson(a, a), 1.0, 1e-12);
}

TEST(SimilarityIo, CsvAndJsonRoundTrip) {
  const auto s = stack_from(2, 2, {{1, 2, 3, 5}, {2, 2, 4, 4}});
  const auto m = pearson_matrix(s);
  const auto csv = to_csv(m);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "c0,c1");
  const auto back = similarity_from_json(to_json(m));
  EXPECT_EQ(back.values, m.values);
  EXPECT_EQ(back.names, m.names);
  auto broken = to_json(m);
  broken["values"][0][1] = 0.123;
  EXPECT_THROW(similarity_from_json(broken), Error);
}
