#pragma once

#include <memory>
#include <string>
#include <vector>

#include "edgedis/adam.hpp"
#include "edgedis/graph.hpp"
#include "edgedis/ops.hpp"
#include "edgedis/rng.hpp"

namespace edgedis {

// Edge-scoring mechanism of a channel: two-layer perceptron on the
// concatenated endpoint embeddings, single linear layer on projected
// endpoints, or projected dot-product.
enum class ScorerVariant { MLP, GO, DP };

// Aggregation rule applied per channel.
enum class Backend { ATTN, GCN, SAGE };

std::string to_string(ScorerVariant v);
std::string to_string(Backend b);
ScorerVariant scorer_from_string(const std::string& s);
Backend backend_from_string(const std::string& s);

/// Per-graph constants reused across forward passes: the feature leaf, its
/// optional sparse view, and the fixed per-edge coefficients of the GCN and
/// SAGE aggregation rules. The graph must outlive this object.
struct GraphInputs {
  const Graph* graph = nullptr;
  Tensor x0;
  std::shared_ptr<const SparseRows> x0_sparse;  // null when the dense path is used
  std::vector<double> gcn_coeff;                // 1/sqrt(deg(u)*deg(v)) per edge
  std::vector<double> inv_in_degree;            // 1/indeg(dst) per edge
};

GraphInputs make_graph_inputs(Tape& tape, const Graph& g, double sparse_threshold = 0.25);

/// Layer input: a dense tensor plus an optional sparse fast path holding the
/// same values (only ever non-null for the constant feature matrix).
struct NodeInput {
  Tensor dense;
  std::shared_ptr<const SparseRows> sparse;
};

struct ChannelParams {
  Tensor w1;
  Tensor w2;  // MLP: 1 x hidden row; GO: (2*hidden) x 1 attention vector; DP: unused
};

struct ChannelScorer {
  ScorerVariant variant = ScorerVariant::MLP;
  int d_in = 0;
  int d_hidden = 0;
  double slope = 0.2;
  std::vector<ChannelParams> channels;

  int num_channels() const { return static_cast<int>(channels.size()); }
};

/// Per-node projections computed once per forward pass. score_pairs() can
/// then score any (v,u) list — realized edges or sampled negatives — through
/// the same parameters, so self-supervision gradients reach the scorer.
struct ScorerCache {
  const ChannelScorer* scorer = nullptr;
  struct Proj {
    Tensor left;   // MLP: W1_left*h ; GO/DP: W1*h
    Tensor right;  // MLP only: W1_right*h
  };
  std::vector<Proj> channels;
};

ScorerCache project_nodes(Tape& tape, const ChannelScorer& scorer, const NodeInput& h);

/// Logits e_{v,u} for channels [c0, c1), one (k x 1) tensor per channel.
/// v is the destination endpoint (first slot of the concatenation).
std::vector<Tensor> score_pairs(const ScorerCache& cache, const std::vector<int>& v,
                                const std::vector<int>& u, int c0, int c1);

/// Logits for every stored edge, channel-major, with v = edge destination.
std::vector<Tensor> score_edges(const ScorerCache& cache, const Graph& g);

/// Per-channel edge coefficients. `logits` are kept pre-sigmoid because the
/// edge-recovery objective sums them across channels before one sigmoid.
struct ChannelWeights {
  std::vector<Tensor> logits;
  std::vector<Tensor> probs;    // sigmoid(logits)
  std::vector<Tensor> weights;  // coefficients used by the aggregation rule
};

/// ATTN: softmax over each destination's in-edges (optionally rescaled by
/// the symmetric degree coefficients). GCN / SAGE: probability-gated fixed
/// coefficients; those rules bring their own normalization.
ChannelWeights normalize_channels(Tape& tape, std::vector<Tensor> logits, const GraphInputs& gi,
                                  Backend backend, bool kipf_renorm);

struct DisLayer {
  ChannelScorer scorer;
  Backend backend = Backend::ATTN;
  std::vector<Tensor> w_feat;  // per channel: d_channel x d_in
  Tensor w_agg;                // d_out x (channels * channel_out_dim)
  int d_in = 0;
  int d_channel = 0;
  int d_out = 0;
  double slope = 0.2;
  bool kipf_renorm = false;

  int channels() const { return scorer.num_channels(); }
  // SAGE concatenates the gated neighborhood mean with the projected self
  // term, doubling the per-channel width.
  int channel_out_dim() const { return backend == Backend::SAGE ? 2 * d_channel : d_channel; }

  void collect_parameters(const std::string& prefix, std::vector<NamedParam>& out) const;
};

DisLayer init_dis_layer(Tape& tape, int d_in, int d_channel, int d_out, int num_channels,
                        ScorerVariant variant, Backend backend, double slope, bool kipf_renorm,
                        int scorer_hidden, RngStream& rng);

std::vector<Tensor> channel_aggregate(Tape& tape, const DisLayer& layer, const NodeInput& h,
                                      const ChannelWeights& weights, const GraphInputs& gi);

Tensor fuse_channels(Tape& tape, const DisLayer& layer, const std::vector<Tensor>& per_channel);

struct LayerOutput {
  Tensor fused;
  ChannelWeights weights;
  std::vector<Tensor> per_channel;
  ScorerCache cache;
};

LayerOutput layer_forward(Tape& tape, const DisLayer& layer, const NodeInput& h,
                          const GraphInputs& gi);

/// Glorot-uniform leaf, seeded.
Tensor glorot(Tape& tape, int rows, int cols, RngStream& rng);

}  // namespace edgedis
