#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <tuple>
#include <vector>

#include <json.hpp>

#include "plexsyn/cluster.hpp"
#include "plexsyn/error.hpp"
#include "plexsyn/format.hpp"
#include "plexsyn/linear.hpp"
#include "plexsyn/metrics.hpp"
#include "plexsyn/parallel.hpp"
#include "plexsyn/patches.hpp"
#include "plexsyn/preprocess.hpp"
#include "plexsyn/random.hpp"
#include "plexsyn/similarity.hpp"
#include "plexsyn/stack.hpp"

namespace plexsyn {

/// Everything that shapes one cluster-vs-random comparison.
struct ExperimentOptions {
  std::vector<double> fractions = {0.25, 0.5};
  std::vector<std::uint64_t> seeds = {1};
  TrainConfig predictor{.epochs = 40, .learning_rate = 0.02, .batch_size = 32,
                        .lambda_l1 = 100.0, .seed = 0, .d_steps_per_g_step = 1,
                        .lr_decay = 0.1};
  std::size_t radius = 0;
  std::size_t stride = 1;
  double train_fraction = 0.8;
  WindowSpec window = WindowSpec::gaussian();
  SsimConstants constants = SsimConstants::from_k();
  SsimMode ssim_mode = SsimMode::windowed;
  Linkage linkage = Linkage::average;
  std::size_t fixed_k = 0;  // 0 selects k by silhouette
  unsigned threads = 1;
};

struct ExperimentRow {
  double fraction = 0.0;
  std::string method;  // "cluster" or "random"
  std::uint64_t seed = 0;
  double test_l1 = 0.0;
  double train_l1 = 0.0;
  std::size_t n_selected = 0;
  std::vector<std::size_t> selected;
  LossReport test_report;
  LossReport train_report;
};

struct ExperimentTable {
  std::size_t k = 0;  // clusters used by the cluster-guided method
  std::vector<ExperimentRow> rows;

  /// Paired (cluster, random) rows for one cell.
  std::pair<const ExperimentRow*, const ExperimentRow*> cell(double fraction,
                                                             std::uint64_t seed) const {
    const ExperimentRow* cluster = nullptr;
    const ExperimentRow* random = nullptr;
    for (const auto& r : rows) {
      if (r.fraction != fraction || r.seed != seed) continue;
      (r.method == "cluster" ? cluster : random) = &r;
    }
    return {cluster, random};
  }
};

/// Round-half-up of fraction * channels; must leave at least one channel on
/// each side.
inline std::size_t selection_count(double fraction, std::size_t channels) {
  require(fraction > 0.0 && fraction <= 1.0, "selection fraction must lie in (0, 1]");
  const auto count = static_cast<std::size_t>(
      std::floor(fraction * static_cast<double>(channels) + 0.5));
  require(count >= 1 && count + 1 <= channels,
          "selection fraction must select between 1 and C-1 channels");
  return count;
}

inline std::vector<std::size_t> complement(const std::vector<std::size_t>& chosen,
                                           std::size_t n) {
  std::vector<std::size_t> out;
  for (std::size_t c = 0; c < n; ++c) {
    if (!std::binary_search(chosen.begin(), chosen.end(), c)) out.push_back(c);
  }
  return out;
}

/// Trains the linear baseline on an 80:20 split of patch rows and reports
/// per-channel L1 on both sides.
inline ExperimentRow evaluate_selection(const ChannelStack& stack,
                                        const ChannelSelection& selection,
                                        const ExperimentOptions& options,
                                        std::uint64_t seed) {
  const auto targets = complement(selection.indices, stack.channels());
  const auto data = extract_patches(stack, selection, targets, options.radius, options.stride);
  const auto split = split_indices(data.rows(), options.train_fraction, derive_seed(seed, 7));
  const auto train = data.subset(split.train);
  const auto test = data.subset(split.test);
  TrainConfig cfg = options.predictor;
  cfg.seed = derive_seed(seed, 11);
  const auto model = train_linear_l1(train, cfg).model;

  const auto report = [&](const PatchDataset& part) {
    const auto predicted = predict_rows(model, part);
    std::vector<std::pair<std::string, double>> per_channel;
    for (std::size_t t = 0; t < part.target_count; ++t) {
      double total = 0.0;
      for (std::size_t r = 0; r < part.rows(); ++r) {
        total += std::abs(predicted[r * part.target_count + t] -
                          part.target_values[r * part.target_count + t]);
      }
      per_channel.emplace_back(stack.name(targets[t]),
                               total / static_cast<double>(part.rows()));
    }
    return std::make_pair(make_loss_report(std::move(per_channel)),
                          l1_loss(predicted, part.target_values));
  };

  ExperimentRow row;
  row.seed = seed;
  row.n_selected = selection.indices.size();
  row.selected = selection.indices;
  std::tie(row.test_report, row.test_l1) = report(test);
  std::tie(row.train_report, row.train_l1) = report(train);
  return row;
}

struct ClusterPipeline {
  SimilarityMatrix similarity;
  Dendrogram tree;
  ClusterAssignment clusters;
};

inline ClusterPipeline cluster_channels(const ChannelStack& stack,
                                        const ExperimentOptions& options) {
  ClusterPipeline p;
  p.similarity = ssim_matrix(stack, options.window, options.constants, options.ssim_mode,
                             options.threads);
  const auto distance = to_distance(p.similarity);
  p.tree = agglomerate(distance, options.linkage);
  const std::size_t k =
      options.fixed_k ? options.fixed_k : choose_k_by_silhouette(distance, p.tree);
  p.clusters = cut(p.tree, k);
  return p;
}

/// Cluster-guided versus seeded-random conditioning channels, for every
/// (fraction, seed) cell. Both methods in a cell share the pixel split and
/// training seed.
inline ExperimentTable run_selection_experiment(const ChannelStack& stack,
                                                const ExperimentOptions& options) {
  const std::size_t n = stack.channels();
  require(n >= 4, "selection experiment needs at least four channels");
  require(!options.fractions.empty() && !options.seeds.empty(),
          "experiment needs fractions and seeds");
  for (double f : options.fractions) selection_count(f, n);
  options.predictor.validate();

  const auto pipeline = cluster_channels(stack, options);
  ExperimentTable table;
  table.k = pipeline.clusters.k;

  struct Cell {
    double fraction;
    std::uint64_t seed;
  };
  std::vector<Cell> cells;
  for (double f : options.fractions) {
    for (auto s : options.seeds) cells.push_back({f, s});
  }
  std::vector<ExperimentRow> rows(2 * cells.size());
  parallel_for(rows.size(), options.threads, [&](std::size_t i) {
    const Cell& cell = cells[i / 2];
    const std::size_t count = selection_count(cell.fraction, n);
    const bool cluster = i % 2 == 0;
    const auto selection =
        cluster ? select_by_cluster(pipeline.clusters, pipeline.similarity, count)
                : select_random(n, count, cell.seed);
    ExperimentRow row = evaluate_selection(stack, selection, options, cell.seed);
    row.fraction = cell.fraction;
    row.method = cluster ? "cluster" : "random";
    rows[i] = std::move(row);
  });
  std::sort(rows.begin(), rows.end(), [](const ExperimentRow& a, const ExperimentRow& b) {
    return std::tie(a.fraction, a.method, a.seed) < std::tie(b.fraction, b.method, b.seed);
  });
  table.rows = std::move(rows);
  return table;
}

inline std::string to_csv(const ExperimentTable& table) {
  std::string out = "fraction,method,seed,test_l1\n";
  for (const auto& r : table.rows) {
    out += format_double(r.fraction) + "," + r.method + "," + std::to_string(r.seed) +
           "," + format_double(r.test_l1) + "\n";
  }
  return out;
}

}  // namespace plexsyn
