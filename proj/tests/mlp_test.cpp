#include <gtest/gtest.h>

#include <cmath>

#include "plexsyn/adversarial.hpp"
#include "plexsyn/linear.hpp"
#include "plexsyn/mlp.hpp"
#include "plexsyn/synthetic.hpp"

using namespace plexsyn;

namespace {

std::pair<double, std::vector<double>> sum_loss(std::span<const double> y) {
  double v = 0;
  for (double x : y) v += x;
  return {v, std::vector<double>(y.size(), 1.0)};
}

Mlp fixed_2_3_1() {
  Mlp m = Mlp::create({2, 3, 1}, OutputActivation::identity, 0);
  m.layers[0].weights = {0.1, -0.2, 0.3, 0.4, -0.5, 0.6};
  m.layers[0].bias = {0.01, -0.02, 0.03};
  m.layers[1].weights = {0.7, -0.8, 0.9};
  m.layers[1].bias = {0.05};
  m.touch();
  return m;
}

ChannelSelection pick(std::vector<std::size_t> indices) {
  ChannelSelection s;
  s.indices = std::move(indices);
  return s;
}

PatchDataset identical_rows(std::uint64_t seed) {
  SyntheticSpec spec;
  spec.height = spec.width = 16;
  spec.channel_count = 2;
  spec.template_count = 2;
  spec.seed = seed;
  const auto syn = generate_synthetic(spec);
  auto names = syn.stack.names();
  names.push_back("copy");
  std::vector<float> data(syn.stack.data().begin(), syn.stack.data().end());
  const auto c0 = syn.stack.channel(0);
  data.insert(data.end(), c0.begin(), c0.end());
  const ChannelStack s(16, 16, names, data);
  const std::vector<std::size_t> target = {2};
  return extract_patches(s, pick({0, 1}), target, 0);
}

}  // namespace

TEST(MlpForward, PassThroughAndLogisticMidpoint) {
  Mlp m = Mlp::create({1, 1, 1}, OutputActivation::identity, 0);
  m.layers[0].weights = {1.0};
  m.layers[1].weights = {1.0};
  const std::vector<double> x = {0.4};
  const auto c = mlp_forward(m, x);
  EXPECT_EQ(c.pre[0][0], 0.4);
  EXPECT_EQ(c.output[0], 0.4);
  const std::vector<double> neg = {-2.0};
  EXPECT_DOUBLE_EQ(mlp_forward(m, neg).output[0], -0.02);

  Mlp d = Mlp::create({3, 1}, OutputActivation::logistic, 0);
  std::fill(d.layers[0].weights.begin(), d.layers[0].weights.end(), 0.0);
  EXPECT_EQ(mlp_forward(d, std::vector<double>{1, 2, 3}).output[0], 0.5);
  EXPECT_THROW(mlp_forward(d, std::vector<double>{1, 2}), Error);
}

TEST(MlpForward, HandComputedTwoThreeOne) {
  const auto m = fixed_2_3_1();
  const double x0 = 0.6, x1 = -0.9;
  const auto leaky = [](double z) { return z > 0 ? z : 0.01 * z; };
  const double h0 = leaky(0.1 * x0 - 0.2 * x1 + 0.01);
  const double h1 = leaky(0.3 * x0 + 0.4 * x1 - 0.02);
  const double h2 = leaky(-0.5 * x0 + 0.6 * x1 + 0.03);
  const double y = 0.7 * h0 - 0.8 * h1 + 0.9 * h2 + 0.05;
  EXPECT_NEAR(mlp_forward(m, std::vector<double>{x0, x1}).output[0], y, 1e-12);
}

TEST(MlpBackward, HandDerivativesAndZeroUpstream) {
  Mlp m = Mlp::create({1, 1}, OutputActivation::identity, 0);
  m.layers[0].weights = {-1.3};
  const std::vector<double> x = {0.7};
  const auto c = mlp_forward(m, x);
  const std::vector<double> one = {1.0};
  const auto g = mlp_backward(m, c, one);
  EXPECT_DOUBLE_EQ(g.weights[0][0], 0.7);
  EXPECT_DOUBLE_EQ(g.bias[0][0], 1.0);
  EXPECT_DOUBLE_EQ(g.input[0], -1.3);

  const auto net = fixed_2_3_1();
  const auto cache = mlp_forward(net, std::vector<double>{0.2, 0.3});
  const auto zero = mlp_backward(net, cache, std::vector<double>{0.0});
  for (std::size_t p = 0; p < net.parameter_count(); ++p) EXPECT_EQ(zero.parameter(p), 0.0);
}

TEST(MlpBackward, RejectsStaleCache) {
  Mlp m = fixed_2_3_1();
  const auto cache = mlp_forward(m, std::vector<double>{0.2, 0.3});
  m.touch();
  EXPECT_THROW(mlp_backward(m, cache, std::vector<double>{1.0}), Error);
  const Mlp other = fixed_2_3_1();
  EXPECT_THROW(mlp_backward(other, cache, std::vector<double>{1.0}), Error);
  const auto fresh = mlp_forward(m, std::vector<double>{0.2, 0.3});
  EXPECT_THROW(mlp_backward(m, fresh, std::vector<double>{1.0, 2.0}), Error);
}

TEST(GradCheck, LinearL1AwayFromKink) {
  Mlp m = Mlp::create({4, 2}, OutputActivation::identity, 8);
  const std::vector<double> x = {0.3, -0.1, 0.8, 0.5};
  const auto out = mlp_forward(m, x).output;
  // Targets sit 0.5 away from the outputs, far from the kink.
  const std::vector<double> target = {out[0] + 0.5, out[1] - 0.5};
  const OutputLoss l1 = [&](std::span<const double> y) {
    std::pair<double, std::vector<double>> r{0.0, std::vector<double>(2)};
    for (int t = 0; t < 2; ++t) {
      const double e = y[t] - target[t];
      r.first += std::abs(e) / 2;
      r.second[t] = (e > 0 ? 1.0 : -1.0) / 2;
    }
    return r;
  };
  EXPECT_LT(grad_check(m, l1, x, 1e-5), 1e-6);
  EXPECT_THROW(grad_check(m, l1, x, 0.0), Error);
}

TEST(GradCheck, LogisticWithGanStyleLoss) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Mlp d = Mlp::create({3, 5, 4, 1}, OutputActivation::logistic, seed);
    Rng rng(seed + 100);
    std::vector<double> x(3);
    for (auto& v : x) v = rng.uniform(-1, 1);
    const OutputLoss gan = [](std::span<const double> y) {
      const double p = y[0];
      return std::pair<double, std::vector<double>>{-std::log(p), {-1 / p}};
    };
    EXPECT_LT(grad_check(d, gan, x, 1e-5), 1e-4) << "seed " << seed;
    EXPECT_LT(grad_check(d, sum_loss, x, 1e-5), 1e-4);
  }
}

TEST(MlpIo, JsonRoundTrip) {
  const auto m = Mlp::create({3, 4, 2}, OutputActivation::logistic, 2);
  const auto back = mlp_from_json(nlohmann::json::parse(to_json(m).dump()));
  EXPECT_TRUE(back.same_parameters(m));
  EXPECT_EQ(back.output, OutputActivation::logistic);
  EXPECT_EQ(back.layer_sizes, m.layer_sizes);
  EXPECT_THROW(Mlp::create({3}, OutputActivation::identity, 0), Error);
}

TEST(Adversarial, CompositeObjectiveGradientsMatchFiniteDifferences) {
  const auto data = identical_rows(4);
  const std::vector<std::size_t> rows = {0, 5, 9, 40};
  Mlp g = Mlp::create({2, 4, 1}, OutputActivation::identity, 1);
  Mlp d = Mlp::create({3, 4, 1}, OutputActivation::logistic, 2);
  const double h = 1e-5;
  const auto rel = [](double a, double n) {
    return std::abs(a - n) / std::max({std::abs(a), std::abs(n), 1e-8});
  };

  const auto dobj = discriminator_objective(g, d, data, rows);
  for (std::size_t p = 0; p < d.parameter_count(); ++p) {
    Mlp probe = d;
    probe.parameter(p) += h;
    probe.touch();
    const double plus = discriminator_objective(g, probe, data, rows).value;
    probe.parameter(p) -= 2 * h;
    probe.touch();
    const double minus = discriminator_objective(g, probe, data, rows).value;
    EXPECT_LT(rel(dobj.gradients.parameter(p), (plus - minus) / (2 * h)), 1e-4) << p;
  }

  const auto gobj = generator_objective(g, d, data, rows, 10.0);
  for (std::size_t p = 0; p < g.parameter_count(); ++p) {
    Mlp probe = g;
    probe.parameter(p) += h;
    probe.touch();
    const double plus = generator_objective(probe, d, data, rows, 10.0).value;
    probe.parameter(p) -= 2 * h;
    probe.touch();
    const double minus = generator_objective(probe, d, data, rows, 10.0).value;
    EXPECT_LT(rel(gobj.gradients.parameter(p), (plus - minus) / (2 * h)), 1e-4) << p;
  }
}

TEST(Adversarial, DiscriminatorObjectiveIsNegatedGanLoss) {
  const auto data = identical_rows(2);
  const std::vector<std::size_t> rows = {1, 2, 3};
  const Mlp g = Mlp::create({2, 3, 1}, OutputActivation::identity, 5);
  const Mlp d = Mlp::create({3, 3, 1}, OutputActivation::logistic, 6);
  std::vector<double> real, fake;
  for (auto r : rows) {
    const auto x = data.feature_row(r);
    real.push_back(mlp_forward(d, concat(x, data.target_row(r))).output[0]);
    fake.push_back(mlp_forward(d, concat(x, mlp_forward(g, x).output)).output[0]);
  }
  EXPECT_NEAR(discriminator_objective(g, d, data, rows).value, -gan_loss(real, fake), 1e-12);
}

TEST(Adversarial, DeterministicAndImprovesOnIdenticalChannel) {
  const auto data = identical_rows(7);
  TrainConfig cfg;
  cfg.epochs = 60;
  cfg.learning_rate = 0.01;
  cfg.batch_size = 32;
  cfg.lambda_l1 = 100;
  cfg.seed = 3;
  const auto a = train_adversarial(data, {2, 8, 1}, {3, 8, 1}, cfg);
  const auto b = train_adversarial(data, {2, 8, 1}, {3, 8, 1}, cfg);
  ASSERT_EQ(a.history.size(), 61u);
  EXPECT_EQ(history_csv(a.history), history_csv(b.history));
  EXPECT_TRUE(a.generator.same_parameters(b.generator));
  EXPECT_LE(a.history.back().l1 * 5, a.history.front().l1)
      << a.history.front().l1 << " -> " << a.history.back().l1;
  EXPECT_EQ(history_csv(a.history).substr(0, 23), "epoch,gan,l1,objective\n");
}

TEST(Adversarial, LargeLambdaTracksLinearBaseline) {
  SyntheticSpec spec;
  spec.height = spec.width = 16;
  spec.channel_count = 4;
  spec.template_count = 2;
  spec.seed = 12;
  const auto syn = generate_synthetic(spec);
  const std::vector<std::size_t> target = {3};
  const auto data = extract_patches(syn.stack, pick({0, 2}), target, 0);
  TrainConfig cfg;
  cfg.epochs = 150;
  cfg.batch_size = 32;
  cfg.seed = 4;
  cfg.lambda_l1 = 1e4;
  const auto linear = train_linear_l1(data, cfg);
  cfg.learning_rate = 0.01;
  const auto adv = train_adversarial(data, {2, 1}, {3, 4, 1}, cfg);
  const double lin_l1 = linear.epoch_loss.back();
  const double adv_l1 = adv.history.back().l1;
  EXPECT_LE(adv_l1, lin_l1 * 1.1) << "adv " << adv_l1 << " linear " << lin_l1;
  EXPECT_GE(adv_l1, lin_l1 * 0.9) << "adv " << adv_l1 << " linear " << lin_l1;
}

TEST(Adversarial, ShapeErrors) {
  const auto data = identical_rows(1);
  TrainConfig cfg;
  cfg.epochs = 1;
  EXPECT_THROW(train_adversarial(data, {2, 2}, {3, 1}, cfg), Error);
  EXPECT_THROW(train_adversarial(data, {2, 1}, {2, 1}, cfg), Error);
  EXPECT_THROW(train_adversarial(data, {3, 1}, {4, 1}, cfg), Error);
}
