#pragma once

#include <cstdint>
#include <unordered_set>
#include <utility>
#include <vector>

#include "edgedis/tensor.hpp"

namespace edgedis {

/// Attributed graph. Undirected input is symmetrized at construction (both
/// directions stored) and the directed edge list is kept sorted by
/// (dst, src); that canonical order is what every per-edge array in the
/// library (channel weights, cached logits, partitions) indexes into.
struct Graph {
  int n = 0;
  int d = 0;
  int num_classes = 0;
  Matrix features;             // n x d
  std::vector<int> edge_src;   // directed, sorted by (dst, src)
  std::vector<int> edge_dst;
  std::vector<int> labels;     // -1 = unknown
  std::vector<std::uint8_t> train_mask, val_mask, test_mask;

  int num_edges() const { return static_cast<int>(edge_src.size()); }
  bool is_self_loop(int e) const {
    return edge_src[static_cast<std::size_t>(e)] == edge_dst[static_cast<std::size_t>(e)];
  }
  /// Directed edges excluding self-loops (the A+ of the samplers).
  int num_real_edges() const;

  /// In-degree per node under the stored directed edges.
  std::vector<int> in_degrees() const;

  /// Membership set keyed by src * n + dst.
  std::unordered_set<std::int64_t> edge_set() const;

  std::int64_t pair_key(int src, int dst) const {
    return static_cast<std::int64_t>(src) * n + dst;
  }

  struct IngestStats {
    int duplicate_pairs = 0;
    int self_pairs = 0;
  };

  /// Build from an undirected pair list: symmetrizes, drops self pairs,
  /// deduplicates, sorts canonically.
  static Graph from_undirected(int n, Matrix features,
                               const std::vector<std::pair<int, int>>& pairs,
                               std::vector<int> labels, int num_classes,
                               IngestStats* stats = nullptr);
};

/// Appends one (v,v) edge for every node that lacks one. Idempotent.
Graph add_self_loops(const Graph& g);

struct SplitRatios {
  double train = 0.2;
  double val = 0.3;
  double test = 0.5;
};

struct Masks {
  std::vector<std::uint8_t> train, val, test;
};

/// Per-class stratified split, deterministic in the seed. Every class must
/// have at least 3 labeled nodes; unlabeled nodes end up in no mask.
Masks split_nodes(const Graph& g, const SplitRatios& ratios, std::uint64_t seed);

/// Indices into the graph's edge list. Self-loops are excluded from the
/// partition: they exist only as aggregation plumbing, not as observed pairs.
struct EdgePartition {
  std::vector<int> homo;
  std::vector<int> hetero;
  std::vector<int> unknown;
};

enum class LabelSource { TrainMask, All };

/// Splits edges into same-label / different-label / insufficiently labeled,
/// judging labels only where `source` makes them visible.
EdgePartition partition_edges(const Graph& g, LabelSource source);

/// `count` distinct ordered (v,u) pairs with v != u and no stored edge
/// between them, uniform, deterministic in the seed.
std::vector<std::pair<int, int>> negative_candidates(const Graph& g, std::size_t count,
                                                     std::uint64_t seed);

}  // namespace edgedis
