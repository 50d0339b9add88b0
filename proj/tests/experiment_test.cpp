#include <gtest/gtest.h>

#include "plexsyn/experiment.hpp"
#include "plexsyn/synthetic.hpp"

using namespace plexsyn;

namespace {

ChannelStack small_stack(std::uint64_t seed, std::size_t channels = 12) {
  SyntheticSpec spec;
  spec.height = spec.width = 32;
  spec.channel_count = channels;
  spec.template_count = std::min<std::size_t>(4, channels);
  spec.seed = seed;
  return generate_synthetic(spec).stack;
}

ExperimentOptions fast_options() {
  ExperimentOptions o;
  o.seeds = {1, 2, 3};
  o.predictor.epochs = 10;
  o.fixed_k = 4;
  return o;
}

}  // namespace

TEST(SelectionCount, RoundingAndRange) {
  EXPECT_EQ(selection_count(0.25, 24), 6u);
  EXPECT_EQ(selection_count(0.5, 24), 12u);
  EXPECT_EQ(selection_count(0.125, 12), 2u);  // 1.5 rounds up
  EXPECT_THROW(selection_count(0.01, 24), Error);
  EXPECT_THROW(selection_count(1.0, 24), Error);
  EXPECT_THROW(selection_count(0.0, 24), Error);
  EXPECT_EQ(complement({1, 3}, 5), (std::vector<std::size_t>{0, 2, 4}));
}

TEST(Experiment, TableShapeAndPairing) {
  const auto stack = small_stack(5);
  const auto options = fast_options();
  const auto table = run_selection_experiment(stack, options);
  EXPECT_EQ(table.k, 4u);
  ASSERT_EQ(table.rows.size(), 12u);
  for (double f : options.fractions) {
    for (auto s : options.seeds) {
      const auto [c, r] = table.cell(f, s);
      ASSERT_NE(c, nullptr);
      ASSERT_NE(r, nullptr);
      EXPECT_EQ(c->n_selected, r->n_selected);
      EXPECT_EQ(c->n_selected, selection_count(f, 12));
      EXPECT_EQ(c->test_report.n_prediction_channels, 12 - c->n_selected);
      EXPECT_NEAR(c->test_report.normalized * c->test_report.n_prediction_channels,
                  c->test_report.total, 1e-12);
    }
  }
  for (std::size_t i = 1; i < table.rows.size(); ++i) {
    const auto& a = table.rows[i - 1];
    const auto& b = table.rows[i];
    EXPECT_TRUE(std::tie(a.fraction, a.method, a.seed) < std::tie(b.fraction, b.method, b.seed));
  }
  const auto csv = to_csv(table);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "fraction,method,seed,test_l1");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 13);
}

TEST(Experiment, DeterministicAcrossRunsAndThreads) {
  const auto stack = small_stack(6);
  auto options = fast_options();
  const auto a = to_csv(run_selection_experiment(stack, options));
  const auto b = to_csv(run_selection_experiment(stack, options));
  options.threads = 4;
  const auto c = to_csv(run_selection_experiment(stack, options));
  EXPECT_EQ(a, b);
  EXPECT_EQ(a, c);
}

TEST(Experiment, NearlyAllSelectedGivesCloseLosses) {
  const auto stack = small_stack(7);
  auto options = fast_options();
  options.fractions = {1.0 - 1.0 / 12};
  options.predictor.epochs = 40;
  const auto table = run_selection_experiment(stack, options);
  double scale = 0, gap = 0;
  for (auto s : options.seeds) {
    const auto [c, r] = table.cell(options.fractions[0], s);
    scale += (c->test_l1 + r->test_l1) / 2;
    gap += std::abs(c->test_l1 - r->test_l1);
  }
  EXPECT_LT(gap, 0.5 * scale) << "gap " << gap << " scale " << scale;
}

TEST(Experiment, ClusterBeatsRandomOnMostCells) {
  SyntheticSpec spec;
  int wins = 0, cells = 0;
  for (std::uint64_t seed = 1; seed <= 4; ++seed) {
    spec.seed = seed;
    const auto syn = generate_synthetic(spec);
    ExperimentOptions options;
    options.seeds = {seed};
    const auto table = run_selection_experiment(syn.stack, options);
    for (double f : options.fractions) {
      const auto [c, r] = table.cell(f, seed);
      wins += c->test_l1 < r->test_l1;
      ++cells;
    }
  }
  EXPECT_GE(wins, 6) << wins << "/" << cells;
}

TEST(Experiment, Validation) {
  const auto tiny = small_stack(1, 4);
  auto options = fast_options();
  options.fixed_k = 2;
  options.fractions = {0.1};
  EXPECT_THROW(run_selection_experiment(tiny, options), Error);
  options.fractions = {0.5};
  options.seeds = {};
  EXPECT_THROW(run_selection_experiment(tiny, options), Error);
  const auto three = small_stack(1, 3);
  options.seeds = {1};
  EXPECT_THROW(run_selection_experiment(three, options), Error);
}
