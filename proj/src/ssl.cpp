#include "edgedis/ssl.hpp"

#include <cmath>
#include <unordered_set>

#include "edgedis/error.hpp"

namespace edgedis {

namespace op = ops;

namespace {

std::size_t scaled_count(double p_e, std::size_t pool) {
  return static_cast<std::size_t>(std::llround(p_e * static_cast<double>(pool)));
}

// Rejection-samples `count` distinct ordered non-self pairs outside
// `excluded`. The caller guarantees count is far below the free pair space.
std::vector<std::pair<int, int>> sample_pairs_outside(const Graph& g,
                                                      const std::unordered_set<std::int64_t>& excluded,
                                                      std::size_t count, RngStream& rng) {
  std::vector<std::pair<int, int>> out;
  out.reserve(count);
  std::unordered_set<std::int64_t> chosen;
  chosen.reserve(count * 2);
  while (out.size() < count) {
    const int v = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(g.n)));
    const int u = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(g.n)));
    if (v == u) continue;
    const std::int64_t key = g.pair_key(v, u);
    if (excluded.count(key) || !chosen.insert(key).second) continue;
    out.emplace_back(v, u);
  }
  return out;
}

std::unordered_set<std::int64_t> key_set(const Graph& g, const std::vector<int>& edges) {
  std::unordered_set<std::int64_t> set;
  set.reserve(edges.size() * 2);
  for (int e : edges)
    set.insert(g.pair_key(g.edge_src[static_cast<std::size_t>(e)],
                          g.edge_dst[static_cast<std::size_t>(e)]));
  return set;
}

// Sum of the cached per-channel logits over [c0,c1), gathered at the given
// edge indices.
Tensor summed_edge_logits(const LayerOutput& layer, const std::vector<int>& edges, int c0, int c1) {
  Tensor total;
  for (int c = c0; c < c1; ++c) {
    Tensor part = op::edge_gather(layer.weights.logits[static_cast<std::size_t>(c)], edges);
    total = total.valid() ? op::add(total, part) : part;
  }
  return total;
}

// Sum of on-demand logits for arbitrary pairs over [c0,c1).
Tensor summed_pair_logits(const LayerOutput& layer, const std::vector<std::pair<int, int>>& pairs,
                          int c0, int c1) {
  std::vector<int> vs, us;
  vs.reserve(pairs.size());
  us.reserve(pairs.size());
  for (const auto& [v, u] : pairs) {
    vs.push_back(v);
    us.push_back(u);
  }
  std::vector<Tensor> logits = score_pairs(layer.cache, vs, us, c0, c1);
  Tensor total = logits.front();
  for (std::size_t c = 1; c < logits.size(); ++c) total = op::add(total, logits[c]);
  return total;
}

// Mean BCE over positives (target 1) and negatives (target 0), composed as a
// batch-size weighted average so the union normalization of the objective is
// exact.
Tensor recovery_term(Tape& tape, Tensor pos_logits, Tensor neg_logits, std::size_t np,
                     std::size_t nn) {
  if (np == 0 && nn == 0) return tape.constant(Matrix::Zero(1, 1));
  Tensor total;
  if (np > 0) {
    Tensor bce = op::binary_cross_entropy_logits(pos_logits, std::vector<double>(np, 1.0));
    total = op::scale(bce, static_cast<double>(np));
  }
  if (nn > 0) {
    Tensor bce = op::binary_cross_entropy_logits(neg_logits, std::vector<double>(nn, 0.0));
    Tensor w = op::scale(bce, static_cast<double>(nn));
    total = total.valid() ? op::add(total, w) : w;
  }
  return op::scale(total, 1.0 / static_cast<double>(np + nn));
}

}  // namespace

SslBatch sample_ssl_batch(const Graph& g, const EdgePartition& partition, double p_e,
                          ConformityNegatives mode, std::uint64_t seed) {
  if (!(p_e > 0.0 && p_e <= 1.0)) throw ConfigError("sample_ssl_batch: p_e must lie in (0,1]");

  SslBatch batch;
  batch.p_e = p_e;

  std::vector<int> a_plus;
  a_plus.reserve(static_cast<std::size_t>(g.num_edges()));
  for (int e = 0; e < g.num_edges(); ++e)
    if (!g.is_self_loop(e)) a_plus.push_back(e);

  const std::int64_t pair_space = static_cast<std::int64_t>(g.n) * (g.n - 1);
  const std::size_t a_minus = static_cast<std::size_t>(pair_space - static_cast<std::int64_t>(a_plus.size()));

  RngStream rng_pos(mix_seed(seed, 1));
  batch.pos_edges = rng_pos.sample_without_replacement(a_plus, scaled_count(p_e, a_plus.size()));

  const std::size_t want_neg =
      std::min(scaled_count(p_e, a_minus), 3 * batch.pos_edges.size());
  if (want_neg > 0) {
    RngStream rng_neg(mix_seed(seed, 2));
    batch.neg_pairs = sample_pairs_outside(g, g.edge_set(), want_neg, rng_neg);
  }

  if (partition.homo.empty() || partition.hetero.empty()) {
    batch.conformity_available = false;
    return batch;
  }

  auto sample_side = [&](const std::vector<int>& side_pos, std::uint64_t stream,
                         std::vector<int>& pos_out, std::vector<std::pair<int, int>>& neg_out) {
    RngStream rng_p(mix_seed(seed, stream));
    pos_out = rng_p.sample_without_replacement(side_pos, scaled_count(p_e, side_pos.size()));
    const std::unordered_set<std::int64_t> pos_keys = key_set(g, side_pos);
    RngStream rng_n(mix_seed(seed, stream + 1));
    if (mode == ConformityNegatives::AllPairs) {
      const std::size_t complement =
          static_cast<std::size_t>(pair_space) - pos_keys.size();
      const std::size_t want = std::min(scaled_count(p_e, complement), 3 * pos_out.size());
      neg_out = sample_pairs_outside(g, pos_keys, want, rng_n);
    } else {
      std::vector<int> complement_edges;
      for (int e : a_plus)
        if (!pos_keys.count(g.pair_key(g.edge_src[static_cast<std::size_t>(e)],
                                       g.edge_dst[static_cast<std::size_t>(e)])))
          complement_edges.push_back(e);
      const std::size_t want =
          std::min(scaled_count(p_e, complement_edges.size()), 3 * pos_out.size());
      const std::vector<int> picked = rng_n.sample_without_replacement(complement_edges, want);
      for (int e : picked)
        neg_out.emplace_back(g.edge_dst[static_cast<std::size_t>(e)],
                             g.edge_src[static_cast<std::size_t>(e)]);
    }
  };
  sample_side(partition.homo, 10, batch.homo_pos, batch.homo_neg);
  sample_side(partition.hetero, 20, batch.hetero_pos, batch.hetero_neg);
  return batch;
}

Tensor edge_recovery_loss(Tape& tape, const std::vector<LayerOutput>& layers,
                          const SslBatch& batch) {
  Tensor total;
  for (const LayerOutput& layer : layers) {
    if (layer.weights.logits.empty())
      throw ContractError("edge_recovery_loss: layer has no cached logits");
    const int channels = static_cast<int>(layer.weights.logits.size());
    Tensor pos, neg;
    if (!batch.pos_edges.empty()) pos = summed_edge_logits(layer, batch.pos_edges, 0, channels);
    if (!batch.neg_pairs.empty()) neg = summed_pair_logits(layer, batch.neg_pairs, 0, channels);
    Tensor term = recovery_term(tape, pos, neg, batch.pos_edges.size(), batch.neg_pairs.size());
    total = total.valid() ? op::add(total, term) : term;
  }
  return total;
}

Tensor label_conformity_loss(Tape& tape, const std::vector<LayerOutput>& layers,
                             const SslBatch& batch, bool* active) {
  if (active) *active = batch.conformity_available;
  if (!batch.conformity_available) return tape.constant(Matrix::Zero(1, 1));

  Tensor total;
  for (const LayerOutput& layer : layers) {
    const int channels = static_cast<int>(layer.weights.logits.size());
    if (channels % 2 != 0)
      throw ConfigError("label_conformity_loss: channel count must be even, got " +
                        std::to_string(channels));
    const int half = channels / 2;

    Tensor homo_pos, homo_neg, hetero_pos, hetero_neg;
    if (!batch.homo_pos.empty()) homo_pos = summed_edge_logits(layer, batch.homo_pos, 0, half);
    if (!batch.homo_neg.empty()) homo_neg = summed_pair_logits(layer, batch.homo_neg, 0, half);
    if (!batch.hetero_pos.empty())
      hetero_pos = summed_edge_logits(layer, batch.hetero_pos, half, channels);
    if (!batch.hetero_neg.empty())
      hetero_neg = summed_pair_logits(layer, batch.hetero_neg, half, channels);

    Tensor homo = recovery_term(tape, homo_pos, homo_neg, batch.homo_pos.size(),
                                batch.homo_neg.size());
    Tensor hetero = recovery_term(tape, hetero_pos, hetero_neg, batch.hetero_pos.size(),
                                  batch.hetero_neg.size());
    Tensor term = op::add(homo, hetero);
    total = total.valid() ? op::add(total, term) : term;
  }
  return total;
}

ChannelDiscriminator init_discriminator(Tape& tape, int d_prev, int d_channel_out, int channels,
                                        int hidden, double slope, RngStream& rng) {
  if (hidden < 1 || channels < 1) throw ConfigError("discriminator dims must be positive");
  ChannelDiscriminator disc;
  disc.w1 = glorot(tape, hidden, d_prev + d_channel_out, rng);
  disc.w2 = glorot(tape, channels, hidden, rng);
  disc.slope = slope;
  return disc;
}

Tensor channel_difference_loss(Tape& tape, const Tensor& h_prev,
                               const std::vector<Tensor>& per_channel,
                               const ChannelDiscriminator& disc, const std::vector<int>& nodes) {
  if (per_channel.empty()) throw ContractError("channel_difference_loss: no channel outputs");
  if (nodes.empty()) throw ContractError("channel_difference_loss: empty node sample");
  const int channels = static_cast<int>(per_channel.size());
  const int width = h_prev.cols() + per_channel.front().cols();
  if (disc.w1.cols() != width)
    throw DimensionError("channel_difference_loss: discriminator expects width " +
                         std::to_string(disc.w1.cols()) + ", embeddings have " +
                         std::to_string(width));
  if (disc.w2.rows() != channels)
    throw DimensionError("channel_difference_loss: discriminator emits " +
                         std::to_string(disc.w2.rows()) + " classes for " +
                         std::to_string(channels) + " channels");

  Tensor prev_rows = op::edge_gather(h_prev, nodes);
  const std::vector<std::uint8_t> mask(nodes.size(), 1);
  Tensor total;
  for (int c = 0; c < channels; ++c) {
    Tensor rows = op::edge_gather(per_channel[static_cast<std::size_t>(c)], nodes);
    Tensor x = op::concat_cols(prev_rows, rows);
    Tensor hidden = op::leaky_relu(op::linear_cols(x, disc.w1, 0, width), disc.slope);
    Tensor logits = op::linear_cols(hidden, disc.w2, 0, disc.w2.cols());
    Tensor ce = op::softmax_cross_entropy(logits, std::vector<int>(nodes.size(), c), mask);
    total = total.valid() ? op::add(total, ce) : ce;
  }
  return op::scale(total, 1.0 / static_cast<double>(channels));
}

std::vector<int> node_subsample_for_channel_loss(int n, int cap, std::uint64_t seed) {
  if (cap < 1) throw ConfigError("node subsample cap must be >= 1");
  std::vector<int> ids(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) ids[static_cast<std::size_t>(i)] = i;
  RngStream rng(mix_seed(seed, 0xca9));
  return rng.sample_without_replacement(std::move(ids), static_cast<std::size_t>(cap));
}

}  // namespace edgedis
