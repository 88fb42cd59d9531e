#include "edgedis/disentangle.hpp"

#include <cmath>

#include "edgedis/error.hpp"

namespace edgedis {

namespace op = ops;

std::string to_string(ScorerVariant v) {
  switch (v) {
    case ScorerVariant::MLP: return "mlp";
    case ScorerVariant::GO: return "go";
    case ScorerVariant::DP: return "dp";
  }
  return "?";
}

std::string to_string(Backend b) {
  switch (b) {
    case Backend::ATTN: return "attn";
    case Backend::GCN: return "gcn";
    case Backend::SAGE: return "sage";
  }
  return "?";
}

ScorerVariant scorer_from_string(const std::string& s) {
  if (s == "mlp") return ScorerVariant::MLP;
  if (s == "go") return ScorerVariant::GO;
  if (s == "dp") return ScorerVariant::DP;
  throw ConfigError("unknown scorer variant '" + s + "' (expected mlp|go|dp)");
}

Backend backend_from_string(const std::string& s) {
  if (s == "attn") return Backend::ATTN;
  if (s == "gcn") return Backend::GCN;
  if (s == "sage") return Backend::SAGE;
  throw ConfigError("unknown backend '" + s + "' (expected attn|gcn|sage)");
}

Tensor glorot(Tape& tape, int rows, int cols, RngStream& rng) {
  const double a = std::sqrt(6.0 / (rows + cols));
  Matrix m(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) m(i, j) = rng.uniform(-a, a);
  return tape.leaf(std::move(m));
}

GraphInputs make_graph_inputs(Tape& tape, const Graph& g, double sparse_threshold) {
  GraphInputs gi;
  gi.graph = &g;
  gi.x0 = tape.constant(g.features);
  SparseRows sp = SparseRows::from_dense(g.features);
  if (sp.density() < sparse_threshold)
    gi.x0_sparse = std::make_shared<const SparseRows>(std::move(sp));

  const std::vector<int> deg = g.in_degrees();
  gi.gcn_coeff.resize(static_cast<std::size_t>(g.num_edges()));
  gi.inv_in_degree.resize(static_cast<std::size_t>(g.num_edges()));
  for (int e = 0; e < g.num_edges(); ++e) {
    const int u = g.edge_src[static_cast<std::size_t>(e)];
    const int v = g.edge_dst[static_cast<std::size_t>(e)];
    const double du = std::max(1, deg[static_cast<std::size_t>(u)]);
    const double dv = std::max(1, deg[static_cast<std::size_t>(v)]);
    gi.gcn_coeff[static_cast<std::size_t>(e)] = 1.0 / std::sqrt(du * dv);
    gi.inv_in_degree[static_cast<std::size_t>(e)] = 1.0 / dv;
  }
  return gi;
}

namespace {

// h * W[:, c0:c1]^T choosing the sparse path when available.
Tensor project(Tape& tape, const NodeInput& h, const Tensor& w, int c0, int c1) {
  if (h.sparse) return op::linear_cols(tape, h.sparse, w, c0, c1);
  return op::linear_cols(h.dense, w, c0, c1);
}

Matrix column(const std::vector<double>& v) {
  Matrix m(static_cast<int>(v.size()), 1);
  for (std::size_t i = 0; i < v.size(); ++i) m(static_cast<int>(i), 0) = v[i];
  return m;
}

}  // namespace

ScorerCache project_nodes(Tape& tape, const ChannelScorer& scorer, const NodeInput& h) {
  ScorerCache cache;
  cache.scorer = &scorer;
  cache.channels.reserve(scorer.channels.size());
  const int d = scorer.d_in;
  for (const ChannelParams& ch : scorer.channels) {
    ScorerCache::Proj proj;
    switch (scorer.variant) {
      case ScorerVariant::MLP:
        proj.left = project(tape, h, ch.w1, 0, d);
        proj.right = project(tape, h, ch.w1, d, 2 * d);
        break;
      case ScorerVariant::GO:
      case ScorerVariant::DP:
        proj.left = project(tape, h, ch.w1, 0, d);
        break;
    }
    cache.channels.push_back(proj);
  }
  return cache;
}

std::vector<Tensor> score_pairs(const ScorerCache& cache, const std::vector<int>& v,
                                const std::vector<int>& u, int c0, int c1) {
  if (!cache.scorer) throw ContractError("score_pairs: empty scorer cache");
  const ChannelScorer& scorer = *cache.scorer;
  if (c0 < 0 || c1 > scorer.num_channels() || c0 >= c1)
    throw ContractError("score_pairs: bad channel range");
  if (v.size() != u.size()) throw DimensionError("score_pairs: endpoint lists differ in length");
  if (v.empty()) throw ContractError("score_pairs: empty pair list");

  std::vector<Tensor> logits;
  logits.reserve(static_cast<std::size_t>(c1 - c0));
  const int dh = scorer.d_hidden;
  for (int c = c0; c < c1; ++c) {
    const ScorerCache::Proj& proj = cache.channels[static_cast<std::size_t>(c)];
    const ChannelParams& ch = scorer.channels[static_cast<std::size_t>(c)];
    switch (scorer.variant) {
      case ScorerVariant::MLP: {
        Tensor pre = op::add(op::edge_gather(proj.left, v), op::edge_gather(proj.right, u));
        Tensor hidden = op::leaky_relu(pre, scorer.slope);
        logits.push_back(op::linear_cols(hidden, ch.w2, 0, dh));
        break;
      }
      case ScorerVariant::GO: {
        Tensor lv = op::matmul_rows(op::edge_gather(proj.left, v), ch.w2, 0, dh);
        Tensor lu = op::matmul_rows(op::edge_gather(proj.left, u), ch.w2, dh, 2 * dh);
        logits.push_back(op::add(lv, lu));
        break;
      }
      case ScorerVariant::DP: {
        logits.push_back(
            op::row_dot(op::edge_gather(proj.left, v), op::edge_gather(proj.left, u)));
        break;
      }
    }
  }
  return logits;
}

std::vector<Tensor> score_edges(const ScorerCache& cache, const Graph& g) {
  if (g.num_edges() == 0) throw ContractError("score_edges: graph has no edges");
  return score_pairs(cache, g.edge_dst, g.edge_src, 0, cache.scorer->num_channels());
}

ChannelWeights normalize_channels(Tape& tape, std::vector<Tensor> logits, const GraphInputs& gi,
                                  Backend backend, bool kipf_renorm) {
  ChannelWeights cw;
  cw.logits = std::move(logits);
  cw.probs.reserve(cw.logits.size());
  cw.weights.reserve(cw.logits.size());
  const Graph& g = *gi.graph;
  Tensor gcn_c, inv_deg;
  if (backend == Backend::GCN || kipf_renorm) gcn_c = tape.constant(column(gi.gcn_coeff));
  if (backend == Backend::SAGE) inv_deg = tape.constant(column(gi.inv_in_degree));

  for (const Tensor& l : cw.logits) {
    cw.probs.push_back(op::sigmoid(l));
    switch (backend) {
      case Backend::ATTN: {
        Tensor w = op::segment_softmax(l, g.edge_dst, g.n);
        if (kipf_renorm) w = op::mul(w, gcn_c);
        cw.weights.push_back(w);
        break;
      }
      case Backend::GCN:
        cw.weights.push_back(op::mul(cw.probs.back(), gcn_c));
        break;
      case Backend::SAGE:
        cw.weights.push_back(op::mul(cw.probs.back(), inv_deg));
        break;
    }
  }
  return cw;
}

void DisLayer::collect_parameters(const std::string& prefix, std::vector<NamedParam>& out) const {
  for (int c = 0; c < channels(); ++c) {
    const ChannelParams& ch = scorer.channels[static_cast<std::size_t>(c)];
    out.push_back({prefix + "/scorer" + std::to_string(c) + "/w1", ch.w1});
    if (ch.w2.valid())
      out.push_back({prefix + "/scorer" + std::to_string(c) + "/w2", ch.w2});
    out.push_back({prefix + "/feat" + std::to_string(c), w_feat[static_cast<std::size_t>(c)]});
  }
  out.push_back({prefix + "/agg", w_agg});
}

DisLayer init_dis_layer(Tape& tape, int d_in, int d_channel, int d_out, int num_channels,
                        ScorerVariant variant, Backend backend, double slope, bool kipf_renorm,
                        int scorer_hidden, RngStream& rng) {
  if (num_channels < 1) throw ConfigError("layer needs at least one channel");
  if (d_in < 1 || d_channel < 1 || d_out < 1 || scorer_hidden < 1)
    throw ConfigError("layer dimensions must be positive");
  DisLayer layer;
  layer.backend = backend;
  layer.d_in = d_in;
  layer.d_channel = d_channel;
  layer.d_out = d_out;
  layer.slope = slope;
  layer.kipf_renorm = kipf_renorm;
  layer.scorer.variant = variant;
  layer.scorer.d_in = d_in;
  layer.scorer.d_hidden = scorer_hidden;
  layer.scorer.slope = slope;
  for (int c = 0; c < num_channels; ++c) {
    ChannelParams ch;
    switch (variant) {
      case ScorerVariant::MLP:
        ch.w1 = glorot(tape, scorer_hidden, 2 * d_in, rng);
        ch.w2 = glorot(tape, 1, scorer_hidden, rng);
        break;
      case ScorerVariant::GO:
        ch.w1 = glorot(tape, scorer_hidden, d_in, rng);
        ch.w2 = glorot(tape, 2 * scorer_hidden, 1, rng);
        break;
      case ScorerVariant::DP:
        ch.w1 = glorot(tape, scorer_hidden, d_in, rng);
        break;
    }
    layer.scorer.channels.push_back(ch);
  }
  for (int c = 0; c < num_channels; ++c)
    layer.w_feat.push_back(glorot(tape, d_channel, d_in, rng));
  layer.w_agg = glorot(tape, d_out, num_channels * layer.channel_out_dim(), rng);
  return layer;
}

std::vector<Tensor> channel_aggregate(Tape& tape, const DisLayer& layer, const NodeInput& h,
                                      const ChannelWeights& weights, const GraphInputs& gi) {
  const Graph& g = *gi.graph;
  if (static_cast<int>(weights.weights.size()) != layer.channels())
    throw DimensionError("channel_aggregate: weight/channel count mismatch");
  std::vector<Tensor> out;
  out.reserve(static_cast<std::size_t>(layer.channels()));
  for (int c = 0; c < layer.channels(); ++c) {
    Tensor proj = project(tape, h, layer.w_feat[static_cast<std::size_t>(c)], 0, layer.d_in);
    Tensor msgs = op::edge_gather(proj, g.edge_src);
    Tensor agg = op::segment_weighted_sum(weights.weights[static_cast<std::size_t>(c)], msgs,
                                          g.edge_dst, g.n);
    if (layer.backend == Backend::SAGE)
      out.push_back(op::concat_cols(agg, proj));
    else
      out.push_back(agg);
  }
  return out;
}

Tensor fuse_channels(Tape& tape, const DisLayer& layer, const std::vector<Tensor>& per_channel) {
  if (static_cast<int>(per_channel.size()) != layer.channels())
    throw DimensionError("fuse_channels: expected " + std::to_string(layer.channels()) +
                         " channel outputs, got " + std::to_string(per_channel.size()));
  Tensor cat = op::concat_cols(per_channel);
  const int width = layer.channels() * layer.channel_out_dim();
  if (cat.cols() != width)
    throw DimensionError("fuse_channels: concatenated width " + std::to_string(cat.cols()) +
                         " != " + std::to_string(width));
  return op::leaky_relu(op::linear_cols(cat, layer.w_agg, 0, width), layer.slope);
}

LayerOutput layer_forward(Tape& tape, const DisLayer& layer, const NodeInput& h,
                          const GraphInputs& gi) {
  LayerOutput out;
  out.cache = project_nodes(tape, layer.scorer, h);
  std::vector<Tensor> logits = score_edges(out.cache, *gi.graph);
  out.weights = normalize_channels(tape, std::move(logits), gi, layer.backend, layer.kipf_renorm);
  out.per_channel = channel_aggregate(tape, layer, h, out.weights, gi);
  out.fused = fuse_channels(tape, layer, out.per_channel);
  return out;
}

}  // namespace edgedis
