#include "melgraph/model.hpp"

#include <cstring>
#include <fstream>
#include <stdexcept>

namespace melgraph {

namespace {

constexpr std::uint32_t kCheckpointVersion = 1;

void write_i32(std::ostream& f, std::int32_t v) { f.write(reinterpret_cast<char*>(&v), 4); }
void write_u32(std::ostream& f, std::uint32_t v) { f.write(reinterpret_cast<char*>(&v), 4); }
void write_f64(std::ostream& f, double v) { f.write(reinterpret_cast<char*>(&v), 8); }

std::int32_t read_i32(std::istream& f) {
  std::int32_t v;
  f.read(reinterpret_cast<char*>(&v), 4);
  return v;
}
std::uint32_t read_u32(std::istream& f) {
  std::uint32_t v;
  f.read(reinterpret_cast<char*>(&v), 4);
  return v;
}
double read_f64(std::istream& f) {
  double v;
  f.read(reinterpret_cast<char*>(&v), 8);
  return v;
}

void write_int_list(std::ostream& f, const std::vector<int>& v) {
  write_u32(f, static_cast<std::uint32_t>(v.size()));
  for (int x : v) write_i32(f, x);
}

std::vector<int> read_int_list(std::istream& f) {
  std::uint32_t n = read_u32(f);
  std::vector<int> v(n);
  for (auto& x : v) x = read_i32(f);
  return v;
}

void write_config(std::ostream& f, const ModelConfig& cfg) {
  write_i32(f, cfg.blocks);
  write_i32(f, cfg.heads);
  write_i32(f, cfg.dim);
  write_i32(f, cfg.n_classes);
  write_i32(f, cfg.mlp_ratio);
  write_i32(f, cfg.ffn_ratio);
  write_i32(f, cfg.head_hidden);
  write_i32(f, cfg.input_t);
  write_i32(f, cfg.input_f);
  write_i32(f, cfg.grid_t);
  write_i32(f, cfg.grid_f);
  write_i32(f, (cfg.use_encoder ? 1 : 0) | (cfg.use_gnn ? 2 : 0) | (cfg.use_ffn ? 4 : 0));
  write_int_list(f, cfg.k_schedule);
  write_int_list(f, cfg.stem_channels);
  write_int_list(f, cfg.stem_strides);
}

ModelConfig read_config(std::istream& f) {
  ModelConfig cfg;
  cfg.blocks = read_i32(f);
  cfg.heads = read_i32(f);
  cfg.dim = read_i32(f);
  cfg.n_classes = read_i32(f);
  cfg.mlp_ratio = read_i32(f);
  cfg.ffn_ratio = read_i32(f);
  cfg.head_hidden = read_i32(f);
  cfg.input_t = read_i32(f);
  cfg.input_f = read_i32(f);
  cfg.grid_t = read_i32(f);
  cfg.grid_f = read_i32(f);
  int flags = read_i32(f);
  cfg.use_encoder = flags & 1;
  cfg.use_gnn = flags & 2;
  cfg.use_ffn = flags & 4;
  cfg.k_schedule = read_int_list(f);
  cfg.stem_channels = read_int_list(f);
  cfg.stem_strides = read_int_list(f);
  return cfg;
}

}  // namespace

void save_checkpoint(const std::string& path, const ModelParams<float>& params,
                     const FeatureStats& stats) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write checkpoint: " + path);
  f.write("GTCK", 4);
  write_u32(f, kCheckpointVersion);
  write_config(f, params.config);
  write_f64(f, stats.mean);
  write_f64(f, stats.stddev);
  write_u32(f, static_cast<std::uint32_t>(params.entries.size()));
  for (const auto& p : params.entries) {
    write_u32(f, static_cast<std::uint32_t>(p.name.size()));
    f.write(p.name.data(), static_cast<std::streamsize>(p.name.size()));
    write_u32(f, static_cast<std::uint32_t>(p.value.ndim()));
    for (std::int64_t i = 0; i < p.value.ndim(); ++i)
      write_u32(f, static_cast<std::uint32_t>(p.value.dim(i)));
    f.put(p.trainable ? 1 : 0);
    f.write(reinterpret_cast<const char*>(p.value.data()),
            static_cast<std::streamsize>(p.value.numel() * sizeof(float)));
  }
  if (!f) throw std::runtime_error("checkpoint write failed: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open checkpoint: " + path);
  char magic[4];
  f.read(magic, 4);
  if (!f || std::memcmp(magic, "GTCK", 4) != 0)
    throw std::runtime_error("not a checkpoint file: " + path);
  if (read_u32(f) != kCheckpointVersion)
    throw std::runtime_error("unsupported checkpoint version: " + path);

  Checkpoint ck;
  ck.params.config = read_config(f);
  ck.stats.mean = read_f64(f);
  ck.stats.stddev = read_f64(f);
  std::uint32_t n_records = read_u32(f);
  for (std::uint32_t r = 0; r < n_records; ++r) {
    std::uint32_t name_len = read_u32(f);
    std::string name(name_len, '\0');
    f.read(name.data(), name_len);
    std::uint32_t ndim = read_u32(f);
    Shape shape(ndim);
    for (auto& d : shape) d = read_u32(f);
    bool trainable = f.get() == 1;
    Tensor<float> t(shape);
    f.read(reinterpret_cast<char*>(t.data()),
           static_cast<std::streamsize>(t.numel() * sizeof(float)));
    if (!f) throw std::runtime_error("truncated checkpoint: " + path);
    ck.params.add(name, std::move(t), trainable);
  }
  return ck;
}

Tensor<float> spec_to_tensor(const MelSpectrogram& spec) {
  const std::int64_t T = spec.values.rows(), F = spec.values.cols();
  Tensor<float> t({1, 1, T, F});
  for (std::int64_t r = 0; r < T; ++r)
    for (std::int64_t c = 0; c < F; ++c)
      t.data()[r * F + c] = static_cast<float>(spec.values(r, c));
  return t;
}

std::vector<Eigen::MatrixXd> export_attention(const ModelParams<float>& params,
                                              const Tensor<float>& x, int block) {
  const ModelConfig& cfg = params.config;
  if (block < 1 || block > cfg.blocks)
    throw std::invalid_argument("export_attention: block out of range");
  if (!cfg.use_encoder)
    throw std::invalid_argument("export_attention: model has no encoder");
  ForwardTrace<float> trace;
  trace.attention_block = block;
  forward(x, params, NormMode::kEval, &trace);
  if (!trace.attention.defined())
    throw std::runtime_error("export_attention: trace capture failed");

  const std::int64_t N = cfg.nodes();
  std::vector<Eigen::MatrixXd> heads;
  for (int h = 0; h < cfg.heads; ++h) {
    Eigen::MatrixXd m(N, N);
    // first sample of the batch; attention is [B*H, N, N]
    const float* src = trace.attention.data() + static_cast<std::int64_t>(h) * N * N;
    for (std::int64_t i = 0; i < N; ++i)
      for (std::int64_t j = 0; j < N; ++j) m(i, j) = src[i * N + j];
    heads.push_back(std::move(m));
  }
  return heads;
}

std::vector<GraphEdge> export_graph(const ModelParams<float>& params, const Tensor<float>& x,
                                    int block, int center_node) {
  const ModelConfig& cfg = params.config;
  if (block < 1 || block > cfg.blocks)
    throw std::invalid_argument("export_graph: block out of range");
  if (!cfg.use_gnn) throw std::invalid_argument("export_graph: model has no GNN");
  if (center_node < 0 || center_node >= cfg.nodes())
    throw std::invalid_argument("export_graph: center node out of range");
  ForwardTrace<float> trace;
  trace.graph_block = block;
  forward(x, params, NormMode::kEval, &trace);
  if (trace.graph.idx.empty()) throw std::runtime_error("export_graph: trace capture failed");

  std::vector<GraphEdge> edges;
  for (int j = 0; j < trace.graph_k; ++j) {
    int nb = trace.graph.at(0, center_node, j);
    GraphEdge e;
    e.center_t = center_node / cfg.grid_f;
    e.center_f = center_node % cfg.grid_f;
    e.neighbor_t = nb / cfg.grid_f;
    e.neighbor_f = nb % cfg.grid_f;
    e.block = block;
    e.k = trace.graph_k;
    edges.push_back(e);
  }
  return edges;
}

}  // namespace melgraph
