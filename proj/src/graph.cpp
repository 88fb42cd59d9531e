#include "edgedis/graph.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "edgedis/error.hpp"
#include "edgedis/rng.hpp"

namespace edgedis {

namespace {

void sort_edges(std::vector<int>& src, std::vector<int>& dst) {
  std::vector<std::pair<int, int>> order(src.size());
  for (std::size_t i = 0; i < src.size(); ++i) order[i] = {dst[i], src[i]};
  std::sort(order.begin(), order.end());
  for (std::size_t i = 0; i < order.size(); ++i) {
    dst[i] = order[i].first;
    src[i] = order[i].second;
  }
}

}  // namespace

int Graph::num_real_edges() const {
  int count = 0;
  for (int e = 0; e < num_edges(); ++e)
    if (!is_self_loop(e)) ++count;
  return count;
}

std::vector<int> Graph::in_degrees() const {
  std::vector<int> deg(static_cast<std::size_t>(n), 0);
  for (int v : edge_dst) ++deg[static_cast<std::size_t>(v)];
  return deg;
}

std::unordered_set<std::int64_t> Graph::edge_set() const {
  std::unordered_set<std::int64_t> set;
  set.reserve(edge_src.size() * 2);
  for (int e = 0; e < num_edges(); ++e)
    set.insert(pair_key(edge_src[static_cast<std::size_t>(e)], edge_dst[static_cast<std::size_t>(e)]));
  return set;
}

Graph Graph::from_undirected(int n, Matrix features, const std::vector<std::pair<int, int>>& pairs,
                             std::vector<int> labels, int num_classes, IngestStats* stats) {
  Graph g;
  g.n = n;
  g.d = static_cast<int>(features.cols());
  g.num_classes = num_classes;
  g.features = std::move(features);
  g.labels = std::move(labels);
  if (static_cast<int>(g.features.rows()) != n)
    throw DimensionError("graph: feature row count != node count");
  if (static_cast<int>(g.labels.size()) != n)
    throw DimensionError("graph: label count != node count");
  for (int y : g.labels) {
    if (y >= num_classes)
      throw DataError("graph: label " + std::to_string(y) + " >= class count " +
                      std::to_string(num_classes));
  }

  IngestStats local;
  std::unordered_set<std::int64_t> seen;
  seen.reserve(pairs.size() * 4);
  for (const auto& [a, b] : pairs) {
    if (a < 0 || a >= n || b < 0 || b >= n)
      throw DataError("graph: edge endpoint (" + std::to_string(a) + "," + std::to_string(b) +
                      ") out of range for n=" + std::to_string(n));
    if (a == b) {
      ++local.self_pairs;
      continue;
    }
    bool fresh = seen.insert(g.pair_key(a, b)).second;
    seen.insert(g.pair_key(b, a));
    if (!fresh) {
      ++local.duplicate_pairs;
      continue;
    }
    g.edge_src.push_back(a);
    g.edge_dst.push_back(b);
    g.edge_src.push_back(b);
    g.edge_dst.push_back(a);
  }
  sort_edges(g.edge_src, g.edge_dst);
  if (stats) *stats = local;
  return g;
}

Graph add_self_loops(const Graph& g) {
  Graph out = g;
  std::vector<std::uint8_t> has_loop(static_cast<std::size_t>(g.n), 0);
  for (int e = 0; e < g.num_edges(); ++e)
    if (g.is_self_loop(e)) has_loop[static_cast<std::size_t>(g.edge_src[static_cast<std::size_t>(e)])] = 1;
  for (int v = 0; v < g.n; ++v) {
    if (!has_loop[static_cast<std::size_t>(v)]) {
      out.edge_src.push_back(v);
      out.edge_dst.push_back(v);
    }
  }
  sort_edges(out.edge_src, out.edge_dst);
  return out;
}

Masks split_nodes(const Graph& g, const SplitRatios& ratios, std::uint64_t seed) {
  if (!(ratios.train > 0 && ratios.val > 0 && ratios.test > 0))
    throw ConfigError("split_nodes: ratios must be positive");
  if (std::abs(ratios.train + ratios.val + ratios.test - 1.0) > 1e-9)
    throw ConfigError("split_nodes: ratios must sum to 1");

  std::vector<std::vector<int>> by_class(static_cast<std::size_t>(g.num_classes));
  for (int v = 0; v < g.n; ++v) {
    const int y = g.labels[static_cast<std::size_t>(v)];
    if (y >= 0) by_class[static_cast<std::size_t>(y)].push_back(v);
  }

  Masks m;
  m.train.assign(static_cast<std::size_t>(g.n), 0);
  m.val.assign(static_cast<std::size_t>(g.n), 0);
  m.test.assign(static_cast<std::size_t>(g.n), 0);

  for (int c = 0; c < g.num_classes; ++c) {
    auto& nodes = by_class[static_cast<std::size_t>(c)];
    if (nodes.empty()) continue;
    if (nodes.size() < 3)
      throw DataError("split_nodes: class " + std::to_string(c) + " has only " +
                      std::to_string(nodes.size()) + " labeled nodes (need >= 3)");
    RngStream rng(mix_seed(seed, 1000 + static_cast<std::uint64_t>(c)));
    rng.shuffle(nodes);
    const std::size_t k = nodes.size();
    std::size_t n_train = static_cast<std::size_t>(std::llround(ratios.train * static_cast<double>(k)));
    std::size_t n_val = static_cast<std::size_t>(std::llround(ratios.val * static_cast<double>(k)));
    n_train = std::min(n_train, k);
    n_val = std::min(n_val, k - n_train);
    for (std::size_t i = 0; i < k; ++i) {
      if (i < n_train)
        m.train[static_cast<std::size_t>(nodes[i])] = 1;
      else if (i < n_train + n_val)
        m.val[static_cast<std::size_t>(nodes[i])] = 1;
      else
        m.test[static_cast<std::size_t>(nodes[i])] = 1;
    }
  }
  return m;
}

EdgePartition partition_edges(const Graph& g, LabelSource source) {
  const bool use_train_mask = source == LabelSource::TrainMask;
  if (use_train_mask && g.train_mask.empty())
    throw ContractError("partition_edges: graph has no train mask");

  auto visible = [&](int v) {
    if (g.labels[static_cast<std::size_t>(v)] < 0) return false;
    return !use_train_mask || g.train_mask[static_cast<std::size_t>(v)] != 0;
  };

  EdgePartition part;
  for (int e = 0; e < g.num_edges(); ++e) {
    if (g.is_self_loop(e)) continue;
    const int u = g.edge_src[static_cast<std::size_t>(e)];
    const int v = g.edge_dst[static_cast<std::size_t>(e)];
    if (visible(u) && visible(v)) {
      if (g.labels[static_cast<std::size_t>(u)] == g.labels[static_cast<std::size_t>(v)])
        part.homo.push_back(e);
      else
        part.hetero.push_back(e);
    } else {
      part.unknown.push_back(e);
    }
  }
  if (part.homo.empty() && part.hetero.empty())
    throw DataError("partition_edges: no edge has both endpoint labels visible");
  return part;
}

std::vector<std::pair<int, int>> negative_candidates(const Graph& g, std::size_t count,
                                                     std::uint64_t seed) {
  const std::int64_t non_self = static_cast<std::int64_t>(g.n) * (g.n - 1);
  const std::int64_t capacity = non_self - g.num_real_edges();
  if (static_cast<std::int64_t>(count) > capacity)
    throw SamplingError("negative_candidates: requested " + std::to_string(count) +
                        " pairs but only " + std::to_string(capacity) + " unconnected pairs exist");

  const auto edges = g.edge_set();
  std::unordered_set<std::int64_t> chosen;
  chosen.reserve(count * 2);
  std::vector<std::pair<int, int>> out;
  out.reserve(count);
  RngStream rng(mix_seed(seed, 0x6e65ULL));
  while (out.size() < count) {
    const int v = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(g.n)));
    const int u = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(g.n)));
    if (v == u) continue;
    const std::int64_t key = g.pair_key(v, u);
    if (edges.count(key) || !chosen.insert(key).second) continue;
    out.emplace_back(v, u);
  }
  return out;
}

}  // namespace edgedis
