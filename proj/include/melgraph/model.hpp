#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "melgraph/features.hpp"
#include "melgraph/ops.hpp"
#include "melgraph/tensor.hpp"
#include "melgraph/threading.hpp"

namespace melgraph {

// ---------------------------------------------------------------------------
// Configuration

inline std::vector<int> default_k_schedule(int blocks) {
  // monotone 2..8 ramp; for 8 blocks this is [2,2,3,4,5,6,7,8]
  std::vector<int> ks(static_cast<std::size_t>(blocks));
  for (int l = 1; l <= blocks; ++l)
    ks[static_cast<std::size_t>(l - 1)] =
        blocks == 1 ? 2 : static_cast<int>(std::floor(2.0 + 6.0 * (l - 1) / (blocks - 1)));
  return ks;
}

struct ModelConfig {
  int blocks = 8;
  int heads = 8;
  int dim = 96;
  int n_classes = 5;
  std::vector<int> k_schedule = default_k_schedule(8);
  std::vector<int> stem_channels = {12, 24, 48, 96, 96};
  std::vector<int> stem_strides = {2, 2, 2, 2, 1};
  int mlp_ratio = 4;
  int ffn_ratio = 4;
  int head_hidden = 512;
  int input_t = 512;
  int input_f = 128;
  int grid_t = 32;
  int grid_f = 8;
  bool use_encoder = true;
  bool use_gnn = true;
  bool use_ffn = true;

  int nodes() const { return grid_t * grid_f; }
  int head_dim() const { return dim / heads; }

  void validate() const {
    if (dim % heads != 0) throw std::invalid_argument("ModelConfig: dim must be divisible by heads");
    if (static_cast<int>(k_schedule.size()) != blocks)
      throw std::invalid_argument("ModelConfig: k_schedule length must equal blocks");
    for (int k : k_schedule)
      if (k < 1 || k >= nodes())
        throw std::invalid_argument("ModelConfig: every K must be in [1, nodes)");
    if (stem_channels.size() != stem_strides.size() || stem_channels.empty())
      throw std::invalid_argument("ModelConfig: stem layout mismatch");
    if (stem_channels.back() != dim)
      throw std::invalid_argument("ModelConfig: last stem channel must equal dim");
  }

  // desk-scale variant: stem channels follow the dim/8..dim ramp of the
  // full model
  static ModelConfig scaled(int dim, int blocks, int heads, std::vector<int> ks,
                            int n_classes = 4) {
    ModelConfig cfg;
    cfg.dim = dim;
    cfg.blocks = blocks;
    cfg.heads = heads;
    cfg.n_classes = n_classes;
    cfg.k_schedule = std::move(ks);
    cfg.stem_channels = {dim / 8, dim / 4, dim / 2, dim, dim};
    cfg.validate();
    return cfg;
  }
};

// ---------------------------------------------------------------------------
// Mel-graph

// Directed KNN graph over node embeddings: edges run from each neighbor v_j
// to its center v_i.
struct MelGraph {
  Eigen::MatrixXd node_features;          // [N][dim]
  std::vector<std::vector<int>> neighbor_idx;  // [N][K]
  int k = 0;
};

// Exhaustive KNN under the p-norm (p = 2 by default): for each node the K
// smallest distances over j != i, ties broken by smaller index.
template <typename S>
MelGraph knn_graph(const Tensor<S>& x, int k, double p = 2.0);

// Batched neighbor lists for the model forward (distances accumulated in
// double, sequentially, so results are precision-independent).
template <typename S>
NeighborLists knn_batched(const Tensor<S>& x, int k);

// ---------------------------------------------------------------------------
// Parameters

template <typename S>
struct ModelParams {
  ModelConfig config;
  std::vector<Parameter<S>> entries;
  std::unordered_map<std::string, std::size_t> index;

  Tensor<S>& at(const std::string& name) {
    auto it = index.find(name);
    if (it == index.end()) throw std::runtime_error("unknown parameter: " + name);
    return entries[it->second].value;
  }
  const Tensor<S>& at(const std::string& name) const {
    auto it = index.find(name);
    if (it == index.end()) throw std::runtime_error("unknown parameter: " + name);
    return entries[it->second].value;
  }
  bool has(const std::string& name) const { return index.count(name) > 0; }

  void add(const std::string& name, Tensor<S> value, bool trainable) {
    if (index.count(name)) throw std::runtime_error("duplicate parameter: " + name);
    index[name] = entries.size();
    entries.push_back({name, std::move(value), trainable});
  }

  void watch_all(Tape<S>& tape) {
    for (auto& p : entries)
      if (p.trainable) tape.watch(p.value);
  }

  void zero_grads() {
    for (auto& p : entries) p.value.zero_grad();
  }

  std::int64_t trainable_count() const {
    std::int64_t total = 0;
    for (const auto& p : entries)
      if (p.trainable) total += p.value.numel();
    return total;
  }

  static ModelParams init(const ModelConfig& cfg, std::uint64_t seed);

  template <typename T>
  ModelParams<T> cast() const {
    ModelParams<T> out;
    out.config = config;
    for (const auto& p : entries) {
      Tensor<T> t(p.value.shape());
      for (std::int64_t i = 0; i < t.numel(); ++i)
        t.data()[i] = static_cast<T>(p.value.data()[i]);
      out.add(p.name, std::move(t), p.trainable);
    }
    return out;
  }
};

template <typename S>
std::int64_t param_count(const ModelParams<S>& params) {
  return params.trainable_count();
}

// ---------------------------------------------------------------------------
// Forward trace for the interpretability exports

template <typename S>
struct ForwardTrace {
  int attention_block = 0;  // 1-based; 0 disables
  Tensor<S> attention;      // [B*H, N, N] post-softmax scores at that block
  int graph_block = 0;
  NeighborLists graph;
  int graph_k = 0;
  // Graph structure controls. The KNN edge sets are data-dependent and
  // piecewise constant, so finite-difference checks pin them: capture the
  // per-block graphs once, then replay forward with use_graphs set.
  bool capture_graphs = false;
  std::vector<NeighborLists> all_graphs;
  const std::vector<NeighborLists>* use_graphs = nullptr;
};

// ---------------------------------------------------------------------------
// Layers

template <typename S>
Tensor<S> patchify_stem(const Tensor<S>& x, const ModelParams<S>& params, NormMode mode);

template <typename S>
Tensor<S> add_positional(const Tensor<S>& x, const Tensor<S>& pe) {
  return add_broadcast(x, pe);
}

template <typename S>
Tensor<S> to_nodes(const Tensor<S>& x);  // [B,C,T,F] -> [B,N,C], n = t*F + f

template <typename S>
Tensor<S> from_nodes(const Tensor<S>& x, int grid_t, int grid_f);  // inverse

template <typename S>
Tensor<S> encoder_layer(const Tensor<S>& x, const ModelParams<S>& params, int block,
                        Tensor<S>* attention_out = nullptr);

template <typename S>
Tensor<S> mr_graph_conv(const Tensor<S>& x, const NeighborLists& nb, const Tensor<S>& w_update,
                        const Tensor<S>& bias);

template <typename S>
Tensor<S> grapher_block(const Tensor<S>& x, const ModelParams<S>& params, int block, int k,
                        NeighborLists* graph_out = nullptr,
                        const NeighborLists* fixed_graph = nullptr);

template <typename S>
Tensor<S> ffn_block(const Tensor<S>& x, const ModelParams<S>& params, int block);

template <typename S>
Tensor<S> classification_head(const Tensor<S>& x, const ModelParams<S>& params, NormMode mode);

// Full network: stem -> +PE -> L x (encoder -> grapher -> ffn) -> head.
// Input is [B, 1, input_t, input_f]; output logits are [B, n_classes].
template <typename S>
Tensor<S> forward(const Tensor<S>& x, const ModelParams<S>& params, NormMode mode,
                  ForwardTrace<S>* trace = nullptr);

// ---------------------------------------------------------------------------
// Interpretability exports

struct GraphEdge {
  int center_t = 0, center_f = 0;
  int neighbor_t = 0, neighbor_f = 0;
  int block = 0, k = 0;
};

// Post-softmax per-head score matrices (N x N each) for the requested block,
// computed on the first sample of the batch.
std::vector<Eigen::MatrixXd> export_attention(const ModelParams<float>& params,
                                              const Tensor<float>& x, int block);

// Neighbor list of the chosen center node at the requested block, with grid
// coordinates attached.
std::vector<GraphEdge> export_graph(const ModelParams<float>& params, const Tensor<float>& x,
                                    int block, int center_node);

// ---------------------------------------------------------------------------
// Checkpoint: magic GTCK, version, config, feature stats, then per-parameter
// records (name, shape, trainable flag, little-endian f32 data).

struct Checkpoint {
  ModelParams<float> params;
  FeatureStats stats;
};

void save_checkpoint(const std::string& path, const ModelParams<float>& params,
                     const FeatureStats& stats);
Checkpoint load_checkpoint(const std::string& path);

// converts a (normalized) spectrogram to the [1, 1, T, F] network input
Tensor<float> spec_to_tensor(const MelSpectrogram& spec);

// ---------------------------------------------------------------------------
// Template definitions

namespace model_detail {

template <typename S>
void fill_uniform(Tensor<S>& t, std::mt19937_64& rng, double bound) {
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (std::int64_t i = 0; i < t.numel(); ++i) t.data()[i] = static_cast<S>(dist(rng));
}

template <typename S>
void fill_normal(Tensor<S>& t, std::mt19937_64& rng, double stddev) {
  std::normal_distribution<double> dist(0.0, stddev);
  for (std::int64_t i = 0; i < t.numel(); ++i) t.data()[i] = static_cast<S>(dist(rng));
}

inline std::string block_key(int block, const std::string& suffix) {
  return "block" + std::to_string(block) + "." + suffix;
}

}  // namespace model_detail

template <typename S>
ModelParams<S> ModelParams<S>::init(const ModelConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  ModelParams<S> p;
  p.config = cfg;
  std::mt19937_64 rng(seed);

  auto kaiming_linear = [&](const std::string& wname, const std::string& bname, int in, int out) {
    Tensor<S> w({in, out});
    model_detail::fill_uniform(w, rng, std::sqrt(6.0 / in));
    p.add(wname, std::move(w), true);
    p.add(bname, Tensor<S>::zeros({out}), true);
  };
  auto attn_linear = [&](const std::string& wname, const std::string& bname, int in, int out) {
    Tensor<S> w({in, out});
    model_detail::fill_normal(w, rng, 0.02);
    p.add(wname, std::move(w), true);
    p.add(bname, Tensor<S>::zeros({out}), true);
  };
  auto norm_pair = [&](const std::string& prefix, int n) {
    p.add(prefix + ".gamma", Tensor<S>::full({n}, S(1)), true);
    p.add(prefix + ".beta", Tensor<S>::zeros({n}), true);
  };
  auto bn = [&](const std::string& prefix, int n) {
    norm_pair(prefix, n);
    p.add(prefix + ".running_mean", Tensor<S>::zeros({n}), false);
    p.add(prefix + ".running_var", Tensor<S>::full({n}, S(1)), false);
  };

  // stem
  int in_ch = 1;
  for (std::size_t i = 0; i < cfg.stem_channels.size(); ++i) {
    int out_ch = cfg.stem_channels[i];
    std::string conv = "stem.conv" + std::to_string(i + 1);
    Tensor<S> w({out_ch, in_ch, 3, 3});
    model_detail::fill_uniform(w, rng, std::sqrt(6.0 / (in_ch * 9)));
    p.add(conv + ".w", std::move(w), true);
    p.add(conv + ".b", Tensor<S>::zeros({out_ch}), true);
    bn("stem.bn" + std::to_string(i + 1), out_ch);
    in_ch = out_ch;
  }

  // positional embedding over the stem output grid
  {
    Tensor<S> pe({cfg.grid_t, cfg.grid_f});
    model_detail::fill_normal(pe, rng, 0.02);
    p.add("pos_embed", std::move(pe), true);
  }

  const int d = cfg.dim;
  for (int l = 1; l <= cfg.blocks; ++l) {
    auto key = [&](const std::string& s) { return model_detail::block_key(l, s); };
    norm_pair(key("ln1"), d);
    attn_linear(key("attn.wq"), key("attn.bq"), d, d);
    attn_linear(key("attn.wk"), key("attn.bk"), d, d);
    attn_linear(key("attn.wv"), key("attn.bv"), d, d);
    attn_linear(key("attn.wo"), key("attn.bo"), d, d);
    norm_pair(key("ln2"), d);
    kaiming_linear(key("mlp.w1"), key("mlp.b1"), d, d * cfg.mlp_ratio);
    kaiming_linear(key("mlp.w2"), key("mlp.b2"), d * cfg.mlp_ratio, d);
    kaiming_linear(key("gnn.conv_in.w"), key("gnn.conv_in.b"), d, d);
    {
      Tensor<S> w({2 * d, d});
      model_detail::fill_uniform(w, rng, std::sqrt(6.0 / (2 * d)));
      p.add(key("gnn.w_update"), std::move(w), true);
      p.add(key("gnn.b_update"), Tensor<S>::zeros({d}), true);
    }
    kaiming_linear(key("gnn.conv_out.w"), key("gnn.conv_out.b"), d, d);
    kaiming_linear(key("ffn.w1"), key("ffn.b1"), d, d * cfg.ffn_ratio);
    kaiming_linear(key("ffn.w2"), key("ffn.b2"), d * cfg.ffn_ratio, d);
  }

  // head
  {
    Tensor<S> w1({cfg.head_hidden, d, 1, 1});
    model_detail::fill_uniform(w1, rng, std::sqrt(6.0 / d));
    p.add("head.conv1.w", std::move(w1), true);
    p.add("head.conv1.b", Tensor<S>::zeros({cfg.head_hidden}), true);
    bn("head.bn", cfg.head_hidden);
    Tensor<S> w2({cfg.n_classes, cfg.head_hidden, 1, 1});
    model_detail::fill_uniform(w2, rng, std::sqrt(6.0 / cfg.head_hidden));
    p.add("head.conv2.w", std::move(w2), true);
    p.add("head.conv2.b", Tensor<S>::zeros({cfg.n_classes}), true);
  }
  return p;
}

template <typename S>
Tensor<S> patchify_stem(const Tensor<S>& x, const ModelParams<S>& params, NormMode mode) {
  const ModelConfig& cfg = params.config;
  if (x.ndim() != 4 || x.dim(1) != 1 || x.dim(2) != cfg.input_t || x.dim(3) != cfg.input_f)
    throw std::invalid_argument("patchify_stem: input must be [B,1," +
                                std::to_string(cfg.input_t) + "," + std::to_string(cfg.input_f) +
                                "]");
  Tensor<S> h = x;
  auto& mutable_params = const_cast<ModelParams<S>&>(params);
  for (std::size_t i = 0; i < cfg.stem_channels.size(); ++i) {
    std::string conv = "stem.conv" + std::to_string(i + 1);
    std::string bnk = "stem.bn" + std::to_string(i + 1);
    h = conv2d(h, params.at(conv + ".w"), params.at(conv + ".b"), cfg.stem_strides[i], 1);
    h = batchnorm2d(h, params.at(bnk + ".gamma"), params.at(bnk + ".beta"),
                    mutable_params.at(bnk + ".running_mean"),
                    mutable_params.at(bnk + ".running_var"), mode);
    h = relu(h);
  }
  return h;
}

template <typename S>
Tensor<S> to_nodes(const Tensor<S>& x) {
  if (x.ndim() != 4) throw std::invalid_argument("to_nodes: input must be [B,C,T,F]");
  std::int64_t B = x.dim(0), C = x.dim(1), T = x.dim(2), F = x.dim(3);
  return reshape(permute(x, {0, 2, 3, 1}), {B, T * F, C});
}

template <typename S>
Tensor<S> from_nodes(const Tensor<S>& x, int grid_t, int grid_f) {
  if (x.ndim() != 3) throw std::invalid_argument("from_nodes: input must be [B,N,C]");
  std::int64_t B = x.dim(0), C = x.dim(2);
  if (x.dim(1) != static_cast<std::int64_t>(grid_t) * grid_f)
    throw std::invalid_argument("from_nodes: node count does not match the grid");
  return permute(reshape(x, {B, grid_t, grid_f, C}), {0, 3, 1, 2});
}

namespace model_detail {

template <typename S>
Tensor<S> linear(const Tensor<S>& x, const Tensor<S>& w, const Tensor<S>& b) {
  return add_broadcast(matmul(x, w), b);
}

}  // namespace model_detail

template <typename S>
Tensor<S> encoder_layer(const Tensor<S>& x, const ModelParams<S>& params, int block,
                        Tensor<S>* attention_out) {
  const ModelConfig& cfg = params.config;
  auto key = [&](const std::string& s) { return model_detail::block_key(block, s); };
  std::int64_t B = x.dim(0), N = x.dim(1), D = x.dim(2);
  const int H = cfg.heads;
  const std::int64_t dh = D / H;

  auto xn = layernorm(x, params.at(key("ln1.gamma")), params.at(key("ln1.beta")));
  auto q = model_detail::linear(xn, params.at(key("attn.wq")), params.at(key("attn.bq")));
  auto k = model_detail::linear(xn, params.at(key("attn.wk")), params.at(key("attn.bk")));
  auto v = model_detail::linear(xn, params.at(key("attn.wv")), params.at(key("attn.bv")));

  auto split_heads = [&](const Tensor<S>& t) {
    return reshape(permute(reshape(t, {B, N, H, dh}), {0, 2, 1, 3}), {B * H, N, dh});
  };
  auto qh = split_heads(q);
  auto kh = split_heads(k);
  auto vh = split_heads(v);

  auto scores = scale(matmul(qh, permute(kh, {0, 2, 1})),
                      static_cast<S>(1.0 / std::sqrt(static_cast<double>(dh))));
  auto attn = softmax_lastdim(scores);
  if (attention_out) *attention_out = attn;
  auto ctx = matmul(attn, vh);  // [B*H, N, dh]
  auto merged = reshape(permute(reshape(ctx, {B, H, N, dh}), {0, 2, 1, 3}), {B, N, D});
  auto attn_out = model_detail::linear(merged, params.at(key("attn.wo")), params.at(key("attn.bo")));
  auto x1 = add(x, attn_out);

  auto xn2 = layernorm(x1, params.at(key("ln2.gamma")), params.at(key("ln2.beta")));
  auto h = model_detail::linear(xn2, params.at(key("mlp.w1")), params.at(key("mlp.b1")));
  h = gelu(h);
  h = model_detail::linear(h, params.at(key("mlp.w2")), params.at(key("mlp.b2")));
  return add(x1, h);
}

template <typename S>
MelGraph knn_graph(const Tensor<S>& x, int k, double p) {
  if (x.ndim() != 2) throw std::invalid_argument("knn_graph: input must be [N,D]");
  const std::int64_t N = x.dim(0), D = x.dim(1);
  if (k < 1 || k > N - 1) throw std::invalid_argument("knn_graph: K out of range");
  MelGraph g;
  g.k = k;
  g.node_features.resize(N, D);
  for (std::int64_t i = 0; i < N; ++i)
    for (std::int64_t d = 0; d < D; ++d) g.node_features(i, d) = static_cast<double>(x.at({i, d}));
  g.neighbor_idx.assign(static_cast<std::size_t>(N), {});

  std::vector<std::pair<double, int>> dist(static_cast<std::size_t>(N));
  for (std::int64_t i = 0; i < N; ++i) {
    for (std::int64_t j = 0; j < N; ++j) {
      double acc = 0.0;
      for (std::int64_t d = 0; d < D; ++d) {
        double diff = std::fabs(g.node_features(j, d) - g.node_features(i, d));
        acc += p == 2.0 ? diff * diff : std::pow(diff, p);
      }
      dist[static_cast<std::size_t>(j)] = {acc, static_cast<int>(j)};
    }
    dist[static_cast<std::size_t>(i)] = {std::numeric_limits<double>::infinity(),
                                         static_cast<int>(i)};
    std::sort(dist.begin(), dist.end());
    auto& nb = g.neighbor_idx[static_cast<std::size_t>(i)];
    nb.reserve(static_cast<std::size_t>(k));
    for (int j = 0; j < k; ++j) nb.push_back(dist[static_cast<std::size_t>(j)].second);
  }
  return g;
}

template <typename S>
NeighborLists knn_batched(const Tensor<S>& x, int k) {
  if (x.ndim() != 3) throw std::invalid_argument("knn_batched: input must be [B,N,D]");
  const std::int64_t B = x.dim(0), N = x.dim(1), D = x.dim(2);
  if (k < 1 || k > N - 1) throw std::invalid_argument("knn_batched: K out of range");
  NeighborLists nb;
  nb.batch = B;
  nb.nodes = N;
  nb.k = k;
  nb.idx.resize(static_cast<std::size_t>(B * N * k));
  const S* xp = x.data();
  parallel_for(B * N, [&](std::int64_t lo, std::int64_t hi) {
    std::vector<std::pair<double, int>> dist(static_cast<std::size_t>(N));
    for (std::int64_t bi = lo; bi < hi; ++bi) {
      std::int64_t b = bi / N, i = bi % N;
      const S* xi = xp + (b * N + i) * D;
      for (std::int64_t j = 0; j < N; ++j) {
        const S* xj = xp + (b * N + j) * D;
        double acc = 0.0;
        for (std::int64_t d = 0; d < D; ++d) {
          double diff = static_cast<double>(xj[d]) - static_cast<double>(xi[d]);
          acc += diff * diff;
        }
        dist[static_cast<std::size_t>(j)] = {acc, static_cast<int>(j)};
      }
      dist[static_cast<std::size_t>(i)].first = std::numeric_limits<double>::infinity();
      std::partial_sort(dist.begin(), dist.begin() + k, dist.end());
      for (int j = 0; j < k; ++j)
        nb.idx[static_cast<std::size_t>((b * N + i) * k + j)] =
            static_cast<std::int32_t>(dist[static_cast<std::size_t>(j)].second);
    }
  });
  return nb;
}

template <typename S>
Tensor<S> mr_graph_conv(const Tensor<S>& x, const NeighborLists& nb, const Tensor<S>& w_update,
                        const Tensor<S>& bias) {
  auto md = neighbor_max_diff(x, nb);
  auto cat = concat<S>({x, md}, static_cast<int>(x.ndim()) - 1);
  return model_detail::linear(cat, w_update, bias);
}

template <typename S>
Tensor<S> grapher_block(const Tensor<S>& x, const ModelParams<S>& params, int block, int k,
                        NeighborLists* graph_out, const NeighborLists* fixed_graph) {
  auto key = [&](const std::string& s) { return model_detail::block_key(block, s); };
  auto h0 = relu(model_detail::linear(x, params.at(key("gnn.conv_in.w")),
                                      params.at(key("gnn.conv_in.b"))));
  NeighborLists nb = fixed_graph ? *fixed_graph : knn_batched(h0, k);
  if (graph_out) *graph_out = nb;
  auto h1 = mr_graph_conv(h0, nb, params.at(key("gnn.w_update")), params.at(key("gnn.b_update")));
  auto out = model_detail::linear(h1, params.at(key("gnn.conv_out.w")),
                                  params.at(key("gnn.conv_out.b")));
  return add(x, out);
}

template <typename S>
Tensor<S> ffn_block(const Tensor<S>& x, const ModelParams<S>& params, int block) {
  auto key = [&](const std::string& s) { return model_detail::block_key(block, s); };
  auto h = relu(model_detail::linear(x, params.at(key("ffn.w1")), params.at(key("ffn.b1"))));
  h = model_detail::linear(h, params.at(key("ffn.w2")), params.at(key("ffn.b2")));
  return add(x, h);
}

template <typename S>
Tensor<S> classification_head(const Tensor<S>& x, const ModelParams<S>& params, NormMode mode) {
  auto& mutable_params = const_cast<ModelParams<S>&>(params);
  auto pooled = adaptive_avg_pool(x);
  auto h = conv2d(pooled, params.at("head.conv1.w"), params.at("head.conv1.b"), 1, 0);
  h = batchnorm2d(h, params.at("head.bn.gamma"), params.at("head.bn.beta"),
                  mutable_params.at("head.bn.running_mean"),
                  mutable_params.at("head.bn.running_var"), mode);
  h = relu(h);
  auto logits = conv2d(h, params.at("head.conv2.w"), params.at("head.conv2.b"), 1, 0);
  return reshape(logits, {x.dim(0), params.config.n_classes});
}

template <typename S>
Tensor<S> forward(const Tensor<S>& x, const ModelParams<S>& params, NormMode mode,
                  ForwardTrace<S>* trace) {
  const ModelConfig& cfg = params.config;
  auto h = patchify_stem(x, params, mode);
  h = add_positional(h, params.at("pos_embed"));
  auto nodes = to_nodes(h);
  for (int l = 1; l <= cfg.blocks; ++l) {
    if (cfg.use_encoder) {
      Tensor<S>* attn_sink =
          trace && trace->attention_block == l ? &trace->attention : nullptr;
      nodes = encoder_layer(nodes, params, l, attn_sink);
    }
    if (cfg.use_gnn) {
      bool want_block = trace && trace->graph_block == l;
      bool want_all = trace && trace->capture_graphs;
      NeighborLists captured;
      const NeighborLists* fixed = nullptr;
      if (trace && trace->use_graphs &&
          static_cast<std::size_t>(l) <= trace->use_graphs->size())
        fixed = &(*trace->use_graphs)[static_cast<std::size_t>(l - 1)];
      nodes = grapher_block(nodes, params, l, cfg.k_schedule[static_cast<std::size_t>(l - 1)],
                            want_block || want_all ? &captured : nullptr, fixed);
      if (want_block) {
        trace->graph = captured;
        trace->graph_k = cfg.k_schedule[static_cast<std::size_t>(l - 1)];
      }
      if (want_all) trace->all_graphs.push_back(std::move(captured));
    }
    if (cfg.use_ffn) nodes = ffn_block(nodes, params, l);
  }
  auto grid = from_nodes(nodes, cfg.grid_t, cfg.grid_f);
  return classification_head(grid, params, mode);
}

}  // namespace melgraph
