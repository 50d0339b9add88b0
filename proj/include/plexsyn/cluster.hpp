#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdint>
#include <limits>
#include <map>
#include <numeric>
#include <string>
#include <vector>

#include <json.hpp>

#include "plexsyn/error.hpp"
#include "plexsyn/format.hpp"
#include "plexsyn/random.hpp"
#include "plexsyn/similarity.hpp"

namespace plexsyn {

struct DistanceMatrix {
  std::size_t n = 0;
  std::vector<double> values;

  double at(std::size_t i, std::size_t j) const { return values[i * n + j]; }
  double& at(std::size_t i, std::size_t j) { return values[i * n + j]; }

  void validate() const {
    require(n >= 1 && values.size() == n * n, "distance matrix shape mismatch");
    for (std::size_t i = 0; i < n; ++i) {
      require(at(i, i) >= 0.0, "distance matrix has a negative diagonal");
      require(at(i, i) <= 1e-12, "distance matrix diagonal must be zero");
      for (std::size_t j = 0; j < n; ++j) {
        require(std::isfinite(at(i, j)) && at(i, j) >= -1e-12,
                "distances must be finite and non-negative");
        require(std::abs(at(i, j) - at(j, i)) <= 1e-12,
                "distance matrix must be symmetric");
      }
    }
  }
};

/// d = 1 - similarity, so d lies in [0, 2].
inline DistanceMatrix to_distance(const SimilarityMatrix& m) {
  DistanceMatrix d;
  d.n = m.size();
  d.values.resize(m.values.size());
  for (std::size_t i = 0; i < d.n; ++i) {
    for (std::size_t j = 0; j < d.n; ++j) {
      d.at(i, j) = i == j ? 0.0 : 1.0 - m.at(i, j);
    }
  }
  return d;
}

enum class Linkage { single, complete, average };

inline const char* to_string(Linkage linkage) {
  switch (linkage) {
    case Linkage::single: return "single";
    case Linkage::complete: return "complete";
    case Linkage::average: return "average";
  }
  return "average";
}

inline Linkage parse_linkage(const std::string& text) {
  if (text == "single") return Linkage::single;
  if (text == "complete") return Linkage::complete;
  if (text == "average") return Linkage::average;
  fail(ErrorKind::validation, "unknown linkage '" + text + "'");
}

struct Merge {
  std::size_t left = 0;
  std::size_t right = 0;
  double height = 0.0;
  std::size_t size = 0;

  friend bool operator==(const Merge&, const Merge&) = default;
};

/// Leaves are nodes 0..n-1; the i-th merge creates node n+i.
struct Dendrogram {
  std::size_t n_leaves = 0;
  std::vector<Merge> merges;
};

/// Agglomerative clustering with Lance-Williams updates. Ties go to the
/// lexicographically smallest (left, right) node pair.
inline Dendrogram agglomerate(const DistanceMatrix& d,
                              Linkage linkage = Linkage::average) {
  d.validate();
  const std::size_t n = d.n;
  const std::size_t nodes = 2 * n - 1;
  std::vector<double> dist(nodes * nodes, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) dist[i * nodes + j] = d.at(i, j);
  }
  std::vector<std::size_t> size(nodes, 1);
  std::vector<std::size_t> active(n);
  std::iota(active.begin(), active.end(), std::size_t{0});

  Dendrogram tree;
  tree.n_leaves = n;
  for (std::size_t step = 0; step + 1 < n; ++step) {
    std::size_t best_a = 0;
    std::size_t best_b = 0;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t p = 0; p < active.size(); ++p) {
      for (std::size_t q = p + 1; q < active.size(); ++q) {
        const double v = dist[active[p] * nodes + active[q]];
        if (v < best) {
          best = v;
          best_a = active[p];
          best_b = active[q];
        }
      }
    }
    const std::size_t merged = n + step;
    size[merged] = size[best_a] + size[best_b];
    for (std::size_t k : active) {
      if (k == best_a || k == best_b) continue;
      const double da = dist[best_a * nodes + k];
      const double db = dist[best_b * nodes + k];
      double v = 0.0;
      switch (linkage) {
        case Linkage::single: v = std::min(da, db); break;
        case Linkage::complete: v = std::max(da, db); break;
        case Linkage::average:
          v = (static_cast<double>(size[best_a]) * da +
               static_cast<double>(size[best_b]) * db) /
              static_cast<double>(size[merged]);
          break;
      }
      dist[merged * nodes + k] = v;
      dist[k * nodes + merged] = v;
    }
    tree.merges.push_back({best_a, best_b, best, size[merged]});
    std::erase_if(active, [&](std::size_t k) { return k == best_a || k == best_b; });
    active.push_back(merged);
  }
  return tree;
}

struct ClusterAssignment {
  std::vector<std::size_t> labels;
  std::size_t k = 0;

  std::vector<std::vector<std::size_t>> members() const {
    std::vector<std::vector<std::size_t>> out(k);
    for (std::size_t i = 0; i < labels.size(); ++i) out[labels[i]].push_back(i);
    return out;
  }
};

/// Relabels an arbitrary partition so clusters are numbered by their
/// smallest member index.
inline ClusterAssignment canonical_labels(const std::vector<std::size_t>& raw) {
  std::map<std::size_t, std::size_t> remap;
  ClusterAssignment a;
  a.labels.resize(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) {
    const auto [it, inserted] = remap.emplace(raw[i], remap.size());
    a.labels[i] = it->second;
  }
  a.k = remap.size();
  return a;
}

/// Flat clusters obtained by undoing the last k-1 merges.
inline ClusterAssignment cut(const Dendrogram& tree, std::size_t k) {
  const std::size_t n = tree.n_leaves;
  require(k >= 1 && k <= n, "cluster count must lie in [1, n_leaves]");
  require(tree.merges.size() + 1 == n, "dendrogram must hold n-1 merges");
  std::vector<std::size_t> parent(2 * n - 1);
  std::iota(parent.begin(), parent.end(), std::size_t{0});
  const auto root = [&](std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  for (std::size_t i = 0; i < n - k; ++i) {
    const auto& m = tree.merges[i];
    parent[root(m.left)] = n + i;
    parent[root(m.right)] = n + i;
  }
  std::vector<std::size_t> raw(n);
  for (std::size_t leaf = 0; leaf < n; ++leaf) raw[leaf] = root(leaf);
  return canonical_labels(raw);
}

/// Mean silhouette width; singleton clusters contribute 0.
inline double mean_silhouette(const DistanceMatrix& d,
                              const ClusterAssignment& a) {
  const auto groups = a.members();
  double total = 0.0;
  for (std::size_t i = 0; i < d.n; ++i) {
    const auto& own = groups[a.labels[i]];
    if (own.size() <= 1) continue;
    double intra = 0.0;
    for (std::size_t j : own) intra += d.at(i, j);
    intra /= static_cast<double>(own.size() - 1);
    double nearest = std::numeric_limits<double>::infinity();
    for (std::size_t g = 0; g < groups.size(); ++g) {
      if (g == a.labels[i]) continue;
      double sum = 0.0;
      for (std::size_t j : groups[g]) sum += d.at(i, j);
      nearest = std::min(nearest, sum / static_cast<double>(groups[g].size()));
    }
    const double scale = std::max(intra, nearest);
    if (scale > 0.0) total += (nearest - intra) / scale;
  }
  return total / static_cast<double>(d.n);
}

/// k in [2, min(10, n-1)] maximizing mean silhouette; smallest k on ties.
inline std::size_t choose_k_by_silhouette(const DistanceMatrix& d,
                                          const Dendrogram& tree) {
  const std::size_t upper = std::min<std::size_t>(10, d.n - 1);
  if (d.n < 3) return 1;
  std::size_t best_k = 2;
  double best = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 2; k <= upper; ++k) {
    const double score = mean_silhouette(d, cut(tree, k));
    if (score > best) {
      best = score;
      best_k = k;
    }
  }
  return best_k;
}

enum class SelectionMethod { cluster_medoid, random };

inline const char* to_string(SelectionMethod method) {
  return method == SelectionMethod::cluster_medoid ? "cluster_medoid" : "random";
}

struct ChannelSelection {
  std::vector<std::size_t> indices;  // sorted, unique
  SelectionMethod method = SelectionMethod::cluster_medoid;
  std::uint64_t seed = 0;
  std::size_t source_k = 0;
};

/// Mean similarity of each channel to the other members of its cluster.
inline std::vector<double> medoid_scores(const ClusterAssignment& a,
                                         const SimilarityMatrix& m) {
  const auto groups = a.members();
  std::vector<double> score(a.labels.size(), 0.0);
  for (const auto& group : groups) {
    if (group.size() <= 1) continue;
    for (std::size_t i : group) {
      double sum = 0.0;
      for (std::size_t j : group) {
        if (j != i) sum += m.at(i, j);
      }
      score[i] = sum / static_cast<double>(group.size() - 1);
    }
  }
  return score;
}

/// Seats per cluster. With count >= k every cluster gets one seat and the
/// remaining count-k are split by largest remainder in proportion to each
/// cluster's spare capacity (size - 1). With count < k the count largest
/// clusters get one seat each. Ties favour the lower cluster label.
inline std::vector<std::size_t> allocate_seats(
    const std::vector<std::size_t>& sizes, std::size_t count) {
  const std::size_t k = sizes.size();
  std::vector<std::size_t> seats(k, 0);
  if (count < k) {
    std::vector<std::size_t> order(k);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
      return sizes[x] > sizes[y];
    });
    for (std::size_t i = 0; i < count; ++i) seats[order[i]] = 1;
    return seats;
  }
  std::fill(seats.begin(), seats.end(), 1);
  const std::size_t extra = count - k;
  std::size_t capacity = 0;
  for (std::size_t s : sizes) capacity += s - 1;
  if (extra == 0 || capacity == 0) return seats;

  std::vector<std::uint64_t> remainder(k);
  std::size_t given = 0;
  for (std::size_t c = 0; c < k; ++c) {
    const std::uint64_t numerator = static_cast<std::uint64_t>(extra) * (sizes[c] - 1);
    seats[c] += numerator / capacity;
    given += numerator / capacity;
    remainder[c] = numerator % capacity;
  }
  std::vector<std::size_t> order(k);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
    return remainder[x] > remainder[y];
  });
  for (std::size_t i = 0; given < extra; ++i) {
    ++seats[order[i]];
    ++given;
  }
  return seats;
}

/// Cluster-guided subset: seats per cluster, filled by descending medoid
/// score with lower channel index winning ties.
inline ChannelSelection select_by_cluster(const ClusterAssignment& a,
                                          const SimilarityMatrix& m,
                                          std::size_t count) {
  const std::size_t n = a.labels.size();
  require(m.size() == n, "similarity matrix does not match the assignment");
  require(count >= 1, "selection count must be >= 1");
  require(count <= n, "selection count exceeds channel count");
  const auto groups = a.members();
  for (const auto& g : groups) require(!g.empty(), "cluster assignment has an empty cluster");

  std::vector<std::size_t> sizes;
  for (const auto& g : groups) sizes.push_back(g.size());
  const auto seats = allocate_seats(sizes, count);
  const auto score = medoid_scores(a, m);

  ChannelSelection sel;
  sel.method = SelectionMethod::cluster_medoid;
  sel.source_k = a.k;
  for (std::size_t c = 0; c < groups.size(); ++c) {
    auto ranked = groups[c];
    std::stable_sort(ranked.begin(), ranked.end(), [&](std::size_t x, std::size_t y) {
      return score[x] > score[y];
    });
    sel.indices.insert(sel.indices.end(), ranked.begin(),
                       ranked.begin() + static_cast<std::ptrdiff_t>(seats[c]));
  }
  std::sort(sel.indices.begin(), sel.indices.end());
  return sel;
}

/// Uniform subset without replacement: the first `count` slots of a seeded
/// Fisher-Yates shuffle.
inline ChannelSelection select_random(std::size_t n_channels, std::size_t count,
                                      std::uint64_t seed) {
  require(count >= 1, "selection count must be >= 1");
  require(count <= n_channels, "selection count exceeds channel count");
  std::vector<std::size_t> pool(n_channels);
  std::iota(pool.begin(), pool.end(), std::size_t{0});
  Rng rng(seed);
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.below(n_channels - i));
    std::swap(pool[i], pool[j]);
  }
  ChannelSelection sel;
  sel.method = SelectionMethod::random;
  sel.seed = seed;
  sel.indices.assign(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(count));
  std::sort(sel.indices.begin(), sel.indices.end());
  return sel;
}

/// Chance-corrected agreement between two partitions of the same items.
inline double adjusted_rand_index(const std::vector<std::size_t>& a,
                                  const std::vector<std::size_t>& b) {
  require(a.size() == b.size() && !a.empty(), "partitions must be the same size");
  std::map<std::pair<std::size_t, std::size_t>, double> table;
  std::map<std::size_t, double> rows;
  std::map<std::size_t, double> cols;
  for (std::size_t i = 0; i < a.size(); ++i) {
    table[{a[i], b[i]}] += 1.0;
    rows[a[i]] += 1.0;
    cols[b[i]] += 1.0;
  }
  const auto pairs = [](double x) { return x * (x - 1.0) / 2.0; };
  double index = 0.0;
  for (const auto& [key, count] : table) index += pairs(count);
  double sum_rows = 0.0;
  for (const auto& [key, count] : rows) sum_rows += pairs(count);
  double sum_cols = 0.0;
  for (const auto& [key, count] : cols) sum_cols += pairs(count);
  const double total = pairs(static_cast<double>(a.size()));
  const double expected = total > 0.0 ? sum_rows * sum_cols / total : 0.0;
  const double maximum = 0.5 * (sum_rows + sum_cols);
  if (maximum == expected) return index == maximum ? 1.0 : 0.0;
  return (index - expected) / (maximum - expected);
}

inline nlohmann::json to_json(const Dendrogram& tree) {
  nlohmann::json merges = nlohmann::json::array();
  for (const auto& m : tree.merges) {
    merges.push_back({m.left, m.right, m.height, m.size});
  }
  return {{"n_leaves", tree.n_leaves}, {"merges", merges}};
}

inline Dendrogram dendrogram_from_json(const nlohmann::json& j) {
  Dendrogram tree;
  tree.n_leaves = j.at("n_leaves").get<std::size_t>();
  for (const auto& m : j.at("merges")) {
    require(m.size() == 4, "dendrogram merge entries need four fields");
    tree.merges.push_back({m[0].get<std::size_t>(), m[1].get<std::size_t>(),
                           m[2].get<double>(), m[3].get<std::size_t>()});
  }
  require(tree.n_leaves >= 1 && tree.merges.size() + 1 == tree.n_leaves,
          "dendrogram must hold n-1 merges");
  return tree;
}

namespace detail {

inline std::string newick_label(const std::string& name) {
  if (name.find_first_of(" ()[]':;,") == std::string::npos && !name.empty()) {
    return name;
  }
  std::string quoted = "'";
  for (char ch : name) {
    if (ch == '\'') quoted += '\'';
    quoted += ch;
  }
  return quoted + "'";
}

inline std::string newick_length(double value) {
  char text[32];
  std::snprintf(text, sizeof(text), "%.12g", value);
  return text;
}

}  // namespace detail

/// Newick text with branch lengths equal to merge-height differences,
/// written to 12 significant digits.
inline std::string to_newick(const Dendrogram& tree,
                             const std::vector<std::string>& names) {
  const std::size_t n = tree.n_leaves;
  require(names.size() == n, "need one name per dendrogram leaf");
  std::vector<std::string> text(2 * n - 1);
  std::vector<double> height(2 * n - 1, 0.0);
  for (std::size_t i = 0; i < n; ++i) text[i] = detail::newick_label(names[i]);
  for (std::size_t i = 0; i < tree.merges.size(); ++i) {
    const auto& m = tree.merges[i];
    const std::size_t node = n + i;
    height[node] = m.height;
    text[node] = "(" + text[m.left] + ":" +
                 detail::newick_length(m.height - height[m.left]) + "," +
                 text[m.right] + ":" +
                 detail::newick_length(m.height - height[m.right]) + ")";
    text[m.left].clear();
    text[m.right].clear();
  }
  return text[2 * n - 2] + ";\n";
}

inline nlohmann::json to_json(const ClusterAssignment& a,
                              const std::vector<std::string>& names) {
  return {{"k", a.k}, {"labels", a.labels}, {"names", names}};
}

inline nlohmann::json to_json(const ChannelSelection& s,
                              const std::vector<std::string>& names) {
  std::vector<std::string> chosen;
  for (std::size_t i : s.indices) chosen.push_back(names.at(i));
  nlohmann::json j = {{"method", to_string(s.method)},
                      {"seed", s.seed},
                      {"k", s.source_k},
                      {"indices", s.indices},
                      {"names", chosen}};
  return j;
}

inline ChannelSelection selection_from_json(const nlohmann::json& j) {
  ChannelSelection s;
  const std::string method = j.at("method").get<std::string>();
  require(method == "cluster_medoid" || method == "random",
          "unknown selection method '" + method + "'");
  s.method = method == "random" ? SelectionMethod::random
                                : SelectionMethod::cluster_medoid;
  s.seed = j.value("seed", std::uint64_t{0});
  s.source_k = j.value("k", std::size_t{0});
  s.indices = j.at("indices").get<std::vector<std::size_t>>();
  std::sort(s.indices.begin(), s.indices.end());
  require(!s.indices.empty(), "selection must not be empty");
  require(std::adjacent_find(s.indices.begin(), s.indices.end()) == s.indices.end(),
          "selection indices must be unique");
  return s;
}

}  // namespace plexsyn
