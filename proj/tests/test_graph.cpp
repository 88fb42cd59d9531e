#include <set>
#include <utility>
#include <vector>

#include "doctest.h"
#include "edgedis/graph.hpp"

using namespace edgedis;

namespace {

Graph make_graph(int n, const std::vector<std::pair<int, int>>& pairs, std::vector<int> labels,
                 int classes) {
  return Graph::from_undirected(n, Matrix::Zero(n, 2), pairs, std::move(labels), classes);
}

// Counts unordered endpoint pairs covered by a set of directed edge indices.
int undirected_pairs(const Graph& g, const std::vector<int>& edges) {
  std::set<std::pair<int, int>> pairs;
  for (int e : edges) {
    int a = g.edge_src[static_cast<std::size_t>(e)];
    int b = g.edge_dst[static_cast<std::size_t>(e)];
    if (a > b) std::swap(a, b);
    pairs.insert({a, b});
  }
  return static_cast<int>(pairs.size());
}

}  // namespace

TEST_CASE("symmetrization and dedup at ingestion") {
  Graph::IngestStats stats;
  Graph g = Graph::from_undirected(4, Matrix::Zero(4, 2), {{0, 1}, {1, 0}, {0, 1}, {2, 2}, {2, 3}},
                                   {0, 0, 1, 1}, 2, &stats);
  CHECK(g.num_edges() == 4);  // (0,1),(1,0),(2,3),(3,2)
  CHECK(stats.duplicate_pairs == 2);
  CHECK(stats.self_pairs == 1);
  // Canonical (dst, src) ordering.
  for (int e = 1; e < g.num_edges(); ++e) {
    const auto key = [&](int i) {
      return std::pair<int, int>(g.edge_dst[static_cast<std::size_t>(i)],
                                 g.edge_src[static_cast<std::size_t>(i)]);
    };
    CHECK(key(e - 1) < key(e));
  }
}

TEST_CASE("add_self_loops on an empty edge set") {
  Graph g = make_graph(3, {}, {0, 0, 0}, 1);
  Graph with = add_self_loops(g);
  CHECK(with.num_edges() == 3);
  for (int e = 0; e < 3; ++e) CHECK(with.is_self_loop(e));
}

TEST_CASE("add_self_loops is idempotent and counts nodes lacking loops") {
  Graph g = make_graph(5, {{0, 1}, {1, 2}, {3, 4}}, {0, 0, 0, 0, 0}, 1);
  const int before = g.num_edges();
  Graph once = add_self_loops(g);
  CHECK(once.num_edges() == before + 5);
  Graph twice = add_self_loops(once);
  CHECK(twice.num_edges() == once.num_edges());
  CHECK(twice.edge_src == once.edge_src);
  CHECK(twice.edge_dst == once.edge_dst);
}

TEST_CASE("split_nodes hits the 2:3:5 sizes on one class of 100") {
  std::vector<int> labels(100, 0);
  Graph g = make_graph(100, {}, labels, 1);
  Masks m = split_nodes(g, {0.2, 0.3, 0.5}, 7);
  int tr = 0, va = 0, te = 0;
  for (int v = 0; v < 100; ++v) {
    tr += m.train[static_cast<std::size_t>(v)];
    va += m.val[static_cast<std::size_t>(v)];
    te += m.test[static_cast<std::size_t>(v)];
  }
  CHECK(tr == 20);
  CHECK(va == 30);
  CHECK(te == 50);
}

TEST_CASE("split_nodes is deterministic in the seed") {
  std::vector<int> labels(40, 0);
  for (int i = 20; i < 40; ++i) labels[static_cast<std::size_t>(i)] = 1;
  Graph g = make_graph(40, {}, labels, 2);
  Masks a = split_nodes(g, {0.2, 0.3, 0.5}, 99);
  Masks b = split_nodes(g, {0.2, 0.3, 0.5}, 99);
  CHECK(a.train == b.train);
  CHECK(a.val == b.val);
  CHECK(a.test == b.test);
  Masks c = split_nodes(g, {0.2, 0.3, 0.5}, 100);
  CHECK(a.train != c.train);
}

TEST_CASE("split_nodes stratifies per class") {
  std::vector<int> labels(100, 0);
  for (int i = 60; i < 100; ++i) labels[static_cast<std::size_t>(i)] = 1;
  Graph g = make_graph(100, {}, labels, 2);
  Masks m = split_nodes(g, {0.2, 0.3, 0.5}, 3);
  int tr0 = 0, tr1 = 0;
  for (int v = 0; v < 100; ++v) {
    if (!m.train[static_cast<std::size_t>(v)]) continue;
    (g.labels[static_cast<std::size_t>(v)] == 0 ? tr0 : tr1) += 1;
  }
  CHECK(tr0 == 12);
  CHECK(tr1 == 8);
}

TEST_CASE("split_nodes masks are disjoint and cover labeled nodes") {
  std::vector<int> labels(30, -1);
  for (int i = 0; i < 24; ++i) labels[static_cast<std::size_t>(i)] = i % 3;
  Graph g = make_graph(30, {}, labels, 3);
  Masks m = split_nodes(g, {0.4, 0.3, 0.3}, 11);
  for (int v = 0; v < 30; ++v) {
    const int hits = m.train[static_cast<std::size_t>(v)] + m.val[static_cast<std::size_t>(v)] +
                     m.test[static_cast<std::size_t>(v)];
    if (g.labels[static_cast<std::size_t>(v)] >= 0)
      CHECK(hits == 1);
    else
      CHECK(hits == 0);
  }
}

TEST_CASE("split_nodes rejects a class with fewer than 3 nodes") {
  std::vector<int> labels{0, 0, 0, 1, 1};
  Graph g = make_graph(5, {}, labels, 2);
  CHECK_THROWS_WITH_AS(split_nodes(g, {0.2, 0.3, 0.5}, 1), doctest::Contains("class 1"), DataError);
}

TEST_CASE("partition with a single class has no hetero edges") {
  Graph g = make_graph(4, {{0, 1}, {1, 2}, {2, 3}}, {0, 0, 0, 0}, 1);
  EdgePartition p = partition_edges(g, LabelSource::All);
  CHECK(p.hetero.empty());
  CHECK(static_cast<int>(p.homo.size()) == g.num_edges());
}

TEST_CASE("triangle with labels (0,0,1) partitions into 1 homo / 2 hetero pairs") {
  Graph g = make_graph(3, {{0, 1}, {1, 2}, {0, 2}}, {0, 0, 1}, 2);
  EdgePartition p = partition_edges(g, LabelSource::All);
  CHECK(undirected_pairs(g, p.homo) == 1);
  CHECK(undirected_pairs(g, p.hetero) == 2);
  CHECK(p.unknown.empty());
}

TEST_CASE("hiding one endpoint's label moves its edges to unknown") {
  Graph g = make_graph(3, {{0, 1}, {1, 2}, {0, 2}}, {0, 0, 1}, 2);
  g.train_mask = {1, 1, 0};  // node 2 not visible
  EdgePartition p = partition_edges(g, LabelSource::TrainMask);
  CHECK(undirected_pairs(g, p.homo) == 1);
  CHECK(p.hetero.empty());
  CHECK(undirected_pairs(g, p.unknown) == 2);
}

TEST_CASE("partition is consistent under a single label flip") {
  // Flipping one node's label moves exactly its incident labeled edges.
  Graph g = make_graph(5, {{0, 1}, {1, 2}, {2, 3}, {3, 4}, {4, 0}, {1, 3}}, {0, 0, 0, 0, 0}, 2);
  EdgePartition before = partition_edges(g, LabelSource::All);
  CHECK(before.hetero.empty());
  g.labels[1] = 1;
  EdgePartition after = partition_edges(g, LabelSource::All);
  // Node 1 touches 0,2,3: six directed edges flip from homo to hetero.
  CHECK(after.hetero.size() == 6);
  CHECK(before.homo.size() - after.homo.size() == 6);
  CHECK(undirected_pairs(g, after.hetero) == 3);
}

TEST_CASE("partition with zero labeled edges is an error") {
  Graph g = make_graph(3, {{0, 1}, {1, 2}}, {-1, -1, -1}, 2);
  CHECK_THROWS_AS(partition_edges(g, LabelSource::All), DataError);
}

TEST_CASE("negative_candidates returns only absent non-self pairs") {
  Graph g = make_graph(8, {{0, 1}, {1, 2}, {2, 3}, {4, 5}}, std::vector<int>(8, 0), 1);
  const auto edges = g.edge_set();
  const auto pairs = negative_candidates(g, 20, 5);
  CHECK(pairs.size() == 20);
  std::set<std::pair<int, int>> uniq;
  for (const auto& [v, u] : pairs) {
    CHECK(v != u);
    CHECK(edges.count(g.pair_key(v, u)) == 0);
    uniq.insert({v, u});
  }
  CHECK(uniq.size() == pairs.size());
  CHECK(negative_candidates(g, 20, 5) == pairs);
  CHECK(negative_candidates(g, 0, 5).empty());
}

TEST_CASE("negative_candidates on a complete graph can only fail") {
  std::vector<std::pair<int, int>> all;
  for (int a = 0; a < 4; ++a)
    for (int b = a + 1; b < 4; ++b) all.emplace_back(a, b);
  Graph g = make_graph(4, all, std::vector<int>(4, 0), 1);
  CHECK_THROWS_AS(negative_candidates(g, 1, 3), SamplingError);
}
