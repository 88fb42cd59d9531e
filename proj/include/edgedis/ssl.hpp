#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "edgedis/disentangle.hpp"

namespace edgedis {

// What counts as a negative pair for the conformity signal: the full ordered
// pair space minus the positive set, or realized edges only.
enum class ConformityNegatives { AllPairs, EdgesOnly };

struct SslBatch {
  // Edge recovery: positive edge indices (never self-loops) and negative
  // (v,u) pairs absent from the graph.
  std::vector<int> pos_edges;
  std::vector<std::pair<int, int>> neg_pairs;
  // Label conformity: positives per side, negatives drawn from the side's
  // complement set.
  std::vector<int> homo_pos, hetero_pos;
  std::vector<std::pair<int, int>> homo_neg, hetero_neg;
  bool conformity_available = true;
  double p_e = 1.0;
};

/// |E_p| = round(p_e * |A+|), |E_n| = min(round(p_e * |A-|), 3 |E_p|) with
/// A+ the directed non-self edge set and A- its complement over ordered
/// non-self pairs. Conformity sides get the same treatment against their own
/// positive sets. Deterministic in the seed; sampling is without
/// replacement. When either conformity side is empty the conformity sets
/// stay empty and `conformity_available` is false.
SslBatch sample_ssl_batch(const Graph& g, const EdgePartition& partition, double p_e,
                          ConformityNegatives mode, std::uint64_t seed);

/// Edge recovery: per layer, the sigmoid of the channel-summed logit is
/// pushed toward 1 on sampled edges and 0 on sampled non-edges; mean binary
/// cross entropy over the batch, summed across layers. Positive logits come
/// from the forward caches; negatives are scored on demand through the same
/// parameters.
Tensor edge_recovery_loss(Tape& tape, const std::vector<LayerOutput>& layers,
                          const SslBatch& batch);

/// Label conformity: the first half of the channels is trained to recover
/// same-label edges, the second half different-label edges; the two
/// mean-BCE terms are added, then summed across layers. Requires an even
/// channel count. Returns a zero constant (and sets *active=false) when the
/// batch has no conformity sets.
Tensor label_conformity_loss(Tape& tape, const std::vector<LayerOutput>& layers,
                             const SslBatch& batch, bool* active = nullptr);

/// Two-layer perceptron classifying channel-wise embeddings by channel id.
struct ChannelDiscriminator {
  Tensor w1;  // hidden x (d_prev + d_channel_out)
  Tensor w2;  // channels x hidden
  double slope = 0.2;

  void collect_parameters(const std::string& prefix, std::vector<NamedParam>& out) const {
    out.push_back({prefix + "/w1", w1});
    out.push_back({prefix + "/w2", w2});
  }
};

ChannelDiscriminator init_discriminator(Tape& tape, int d_prev, int d_channel_out, int channels,
                                        int hidden, double slope, RngStream& rng);

/// Channel difference for one layer: concat(h_prev[v], h^{l,i}[v]) is
/// classified by the discriminator with pseudo-label i; mean cross entropy
/// over the sampled nodes and all channels. Gradients flow into both the
/// discriminator and the extractor.
Tensor channel_difference_loss(Tape& tape, const Tensor& h_prev,
                               const std::vector<Tensor>& per_channel,
                               const ChannelDiscriminator& disc, const std::vector<int>& nodes);

/// min(n, cap) node ids, uniform without replacement, deterministic.
std::vector<int> node_subsample_for_channel_loss(int n, int cap, std::uint64_t seed);

}  // namespace edgedis
