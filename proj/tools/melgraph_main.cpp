// melgraph: command-line front end for the Mel-graph recognition pipeline.
// Subcommands: synth, featurize, hinich, train, eval, predict, gradcheck,
// export. Exit codes: 0 success, 1 usage error, 2 data error.

#include <CLI11.hpp>

#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include "melgraph/audio_io.hpp"
#include "melgraph/evaluation.hpp"
#include "melgraph/features.hpp"
#include "melgraph/hinich.hpp"
#include "melgraph/model.hpp"
#include "melgraph/synthgen.hpp"
#include "melgraph/training.hpp"

namespace fs = std::filesystem;
using namespace melgraph;

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// flat key=value configuration with dotted keys; flags > file > defaults
class RunConfig {
 public:
  void load_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open config file: " + path);
    std::string line;
    int line_no = 0;
    while (std::getline(f, line)) {
      ++line_no;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      std::string trimmed = trim(line);
      if (trimmed.empty() || trimmed[0] == '#') continue;
      auto eq = trimmed.find('=');
      if (eq == std::string::npos)
        throw UsageError("config line " + std::to_string(line_no) + " is not key = value");
      std::string key = trim(trimmed.substr(0, eq));
      std::string value = trim(trimmed.substr(eq + 1));
      if (!known_keys().count(key)) throw UsageError("unknown config key: " + key);
      file_values_[key] = value;
    }
  }

  void set_flag(const std::string& key, const std::string& value) { flag_values_[key] = value; }

  std::string get(const std::string& key, const std::string& fallback) const {
    if (auto it = flag_values_.find(key); it != flag_values_.end()) return it->second;
    if (auto it = file_values_.find(key); it != file_values_.end()) return it->second;
    return fallback;
  }
  int get_int(const std::string& key, int fallback) const {
    return std::stoi(get(key, std::to_string(fallback)));
  }
  double get_double(const std::string& key, double fallback) const {
    return std::stod(get(key, std::to_string(fallback)));
  }

  ModelConfig model_config(int n_classes) const {
    ModelConfig cfg;
    cfg.dim = get_int("model.dim", cfg.dim);
    cfg.blocks = get_int("model.blocks", cfg.blocks);
    cfg.heads = get_int("model.heads", cfg.heads);
    cfg.n_classes = get_int("model.classes", n_classes);
    cfg.mlp_ratio = get_int("model.mlp_ratio", cfg.mlp_ratio);
    cfg.ffn_ratio = get_int("model.ffn_ratio", cfg.ffn_ratio);
    cfg.head_hidden = get_int("model.head_hidden", cfg.head_hidden);
    cfg.use_encoder = get_int("model.use_encoder", 1) != 0;
    cfg.use_gnn = get_int("model.use_gnn", 1) != 0;
    cfg.use_ffn = get_int("model.use_ffn", 1) != 0;
    std::string ks = get("model.k_schedule", "");
    if (!ks.empty()) {
      cfg.k_schedule.clear();
      std::stringstream ss(ks);
      std::string tok;
      while (std::getline(ss, tok, ',')) cfg.k_schedule.push_back(std::stoi(trim(tok)));
    } else {
      cfg.k_schedule = default_k_schedule(cfg.blocks);
    }
    std::string stems = get("model.stem_channels", "");
    if (!stems.empty()) {
      cfg.stem_channels.clear();
      std::stringstream ss(stems);
      std::string tok;
      while (std::getline(ss, tok, ',')) cfg.stem_channels.push_back(std::stoi(trim(tok)));
    } else if (cfg.dim % 8 == 0) {
      cfg.stem_channels = {cfg.dim / 8, cfg.dim / 4, cfg.dim / 2, cfg.dim, cfg.dim};
    }
    cfg.validate();
    return cfg;
  }

  TrainConfig train_config(std::uint64_t seed) const {
    TrainConfig cfg;
    cfg.lr0 = get_double("train.lr0", cfg.lr0);
    cfg.decay_epoch = get_int("train.decay_epoch", cfg.decay_epoch);
    cfg.decay_factor = get_double("train.decay_factor", cfg.decay_factor);
    cfg.batch_size = get_int("train.batch_size", cfg.batch_size);
    cfg.epochs = get_int("train.epochs", cfg.epochs);
    cfg.augment = get_int("train.augment", 1) != 0;
    cfg.augment_f_mask = get_int("train.f_mask", cfg.augment_f_mask);
    cfg.augment_t_mask = get_int("train.t_mask", cfg.augment_t_mask);
    cfg.seed = seed;
    cfg.validate();
    return cfg;
  }

  // fully resolved key=value dump, defaults included
  std::string resolved(std::uint64_t seed) const {
    std::ostringstream out;
    ModelConfig mc = model_config(get_int("model.classes", 4));
    TrainConfig tc = train_config(seed);
    out << "model.dim = " << mc.dim << "\n";
    out << "model.blocks = " << mc.blocks << "\n";
    out << "model.heads = " << mc.heads << "\n";
    out << "model.classes = " << mc.n_classes << "\n";
    out << "model.k_schedule = " << join(mc.k_schedule) << "\n";
    out << "model.stem_channels = " << join(mc.stem_channels) << "\n";
    out << "model.mlp_ratio = " << mc.mlp_ratio << "\n";
    out << "model.ffn_ratio = " << mc.ffn_ratio << "\n";
    out << "model.head_hidden = " << mc.head_hidden << "\n";
    out << "model.use_encoder = " << (mc.use_encoder ? 1 : 0) << "\n";
    out << "model.use_gnn = " << (mc.use_gnn ? 1 : 0) << "\n";
    out << "model.use_ffn = " << (mc.use_ffn ? 1 : 0) << "\n";
    out << "train.lr0 = " << tc.lr0 << "\n";
    out << "train.decay_epoch = " << tc.decay_epoch << "\n";
    out << "train.decay_factor = " << tc.decay_factor << "\n";
    out << "train.batch_size = " << tc.batch_size << "\n";
    out << "train.epochs = " << tc.epochs << "\n";
    out << "train.augment = " << (tc.augment ? 1 : 0) << "\n";
    out << "train.f_mask = " << tc.augment_f_mask << "\n";
    out << "train.t_mask = " << tc.augment_t_mask << "\n";
    out << "features.type = " << get("features.type", "mel") << "\n";
    out << "synth.n_per_class = " << get_int("synth.n_per_class", 70) << "\n";
    out << "seed = " << seed << "\n";
    return out.str();
  }

 private:
  static std::string trim(const std::string& s) {
    auto a = s.find_first_not_of(" \t");
    auto b = s.find_last_not_of(" \t");
    return a == std::string::npos ? "" : s.substr(a, b - a + 1);
  }
  template <typename T>
  static std::string join(const std::vector<T>& v) {
    std::ostringstream out;
    for (std::size_t i = 0; i < v.size(); ++i) out << (i ? "," : "") << v[i];
    return out.str();
  }
  static const std::set<std::string>& known_keys() {
    static const std::set<std::string> keys = {
        "model.dim",        "model.blocks",     "model.heads",     "model.classes",
        "model.k_schedule", "model.stem_channels", "model.mlp_ratio", "model.ffn_ratio",
        "model.head_hidden", "model.use_encoder", "model.use_gnn",  "model.use_ffn",
        "train.lr0",        "train.decay_epoch", "train.decay_factor", "train.batch_size",
        "train.epochs",     "train.augment",    "train.f_mask",    "train.t_mask",
        "features.type",    "synth.n_per_class"};
    return keys;
  }

  std::map<std::string, std::string> file_values_;
  std::map<std::string, std::string> flag_values_;
};

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  std::ostringstream out;
  out << std::hex << v;
  return out.str();
}

// resolved config next to the outputs; timestamps go only to the sidecar log
void write_run_records(const fs::path& out_dir, const RunConfig& cfg, std::uint64_t seed,
                       const std::string& command) {
  fs::create_directories(out_dir);
  std::ofstream r(out_dir / "resolved.cfg");
  r << cfg.resolved(seed);
  std::ofstream log(out_dir / "run.log", std::ios::app);
  auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  log << std::ctime(&now) << "  " << command << "\n";
}

int cmd_synth(const RunConfig& cfg, const std::string& preset, int n_per_class,
              std::uint64_t seed, const std::string& out) {
  if (preset != "default4") throw UsageError("unknown preset: " + preset);
  DatasetLayout layout;
  int total = n_per_class > 0 ? n_per_class : cfg.get_int("synth.n_per_class", 70);
  layout.n_train_per_class = static_cast<int>(std::floor(total * 5.0 / 7.0));
  layout.n_val_per_class = static_cast<int>(std::floor(total * 1.0 / 7.0));
  layout.n_test_per_class = total - layout.n_train_per_class - layout.n_val_per_class;
  write_run_records(out, cfg, seed, "synth");
  auto manifest = gen_dataset(default_preset(), layout, seed, out);
  std::cout << "wrote " << manifest << "\n";
  return 0;
}

int cmd_featurize(const RunConfig& cfg, const std::string& manifest, const std::string& out,
                  std::uint64_t seed) {
  write_run_records(out, cfg, seed, "featurize");
  auto entries = read_manifest(manifest);
  std::string feature_type = cfg.get("features.type", "mel");
  std::vector<ManifestEntry> index;
  for (const auto& e : entries) {
    AudioBuffer buf = load_wav(e.path);
    buf.class_label = e.label;
    buf = resample(buf, 16000);
    auto segments_list = segment(buf, 5.0);
    for (std::size_t s = 0; s < segments_list.size(); ++s) {
      Eigen::MatrixXd grid;
      if (feature_type == "mel") {
        grid = featurize(segments_list[s]).values;
      } else if (feature_type == "stft") {
        grid = stft_feature(segments_list[s]);
      } else if (feature_type == "mfcc") {
        grid = mfcc(featurize(segments_list[s]), 20);
      } else {
        throw UsageError("unknown features.type: " + feature_type);
      }
      std::string stem = fs::path(e.path).stem().string();
      std::string fname = stem + "_" + std::to_string(s) + ".melf";
      write_feature_file((fs::path(out) / fname).string(), grid);
      ManifestEntry fe = e;
      fe.path = (fs::path(out) / fname).string();
      fe.start_offset_s = segments_list[s].start_offset_s;
      index.push_back(fe);
    }
  }
  write_manifest((fs::path(out) / "features.csv").string(), index);
  std::cout << "wrote " << index.size() << " feature files to " << out << "\n";
  return 0;
}

int cmd_hinich(const std::string& wav, double window_s, const std::string& out) {
  AudioBuffer buf = load_wav(wav);
  auto results = batch_test(buf, window_s);
  write_hinich_csv(out, results);
  std::cout << "wrote " << results.size() << " window results to " << out << "\n";
  return 0;
}

int cmd_train(const RunConfig& cfg, const std::string& manifest, const std::string& out,
              std::uint64_t seed) {
  write_run_records(out, cfg, seed, "train");
  auto bundle = prepare_datasets(manifest);
  ModelConfig mc = cfg.model_config(bundle.n_classes);
  TrainConfig tc = cfg.train_config(seed);
  auto params = ModelParams<float>::init(mc, seed);
  auto result = fit(std::move(params), bundle, tc);

  save_checkpoint((fs::path(out) / "best.gtck").string(), result.best_params, bundle.stats);
  write_history_csv((fs::path(out) / "history.csv").string(), result.history);
  std::cout << "best val OA " << result.best_val_oa << " at epoch " << result.best_epoch << "\n";

  if (bundle.test.size() > 0) {
    auto cm = evaluate(result.best_params, bundle.test, bundle.stats);
    auto report = metrics_report(cm);
    write_metrics_json((fs::path(out) / "test_metrics.json").string(), report,
                       hex64(fnv1a(cfg.resolved(seed))), seed);
    std::cout << "test OA " << report.oa << "\n";
  }
  return 0;
}

int cmd_eval(const RunConfig& cfg, const std::string& checkpoint, const std::string& manifest,
             const std::string& split, const std::string& out, std::uint64_t seed) {
  auto ck = load_checkpoint(checkpoint);
  auto bundle = prepare_datasets(manifest);
  const FeatureDataset* data = nullptr;
  if (split == "train") data = &bundle.train;
  else if (split == "val") data = &bundle.val;
  else if (split == "test") data = &bundle.test;
  else throw UsageError("unknown split: " + split);
  if (data->size() == 0) throw std::runtime_error("split '" + split + "' is empty");

  auto cm = evaluate(ck.params, *data, ck.stats);
  auto report = metrics_report(cm);
  write_metrics_json(out, report, hex64(fnv1a(cfg.resolved(seed))), seed);
  {
    std::ofstream r(out + ".cfg");
    r << cfg.resolved(seed);
  }
  std::cout << "oa " << report.oa << " aa " << report.aa << " kappa " << report.kappa << " f1 "
            << report.f1 << "\n";
  return 0;
}

int cmd_predict(const std::string& checkpoint, const std::string& wav, const std::string& out) {
  auto ck = load_checkpoint(checkpoint);
  AudioBuffer buf = load_wav(wav);
  buf = resample(buf, 16000);
  auto segments_list = segment(buf, 5.0);
  if (segments_list.empty()) throw std::runtime_error("input shorter than one 5 s segment");

  std::ostringstream table;
  table << "segment,start_s,predicted";
  for (int c = 0; c < ck.params.config.n_classes; ++c) table << ",p" << c;
  table << "\n";
  for (std::size_t s = 0; s < segments_list.size(); ++s) {
    auto spec = normalize(featurize(segments_list[s]), ck.stats);
    auto logits = forward(spec_to_tensor(spec), ck.params, NormMode::kEval);
    auto probs = softmax(logits, -1);
    int best = 0;
    for (int c = 1; c < ck.params.config.n_classes; ++c)
      if (probs.at({0, c}) > probs.at({0, best})) best = c;
    table << s << "," << segments_list[s].start_offset_s << "," << best;
    for (int c = 0; c < ck.params.config.n_classes; ++c) table << "," << probs.at({0, c});
    table << "\n";
  }
  if (out.empty()) {
    std::cout << table.str();
  } else {
    std::ofstream f(out);
    f << table.str();
    std::cout << "wrote " << out << "\n";
  }
  return 0;
}

int cmd_gradcheck(const std::string& out) {
  // primitive sweep in double precision plus a sampled full-model check
  std::mt19937_64 rng(12345);
  auto uniform = [&](Shape shape, double lo, double hi) {
    Tensor<double> t(shape);
    std::uniform_real_distribution<double> dist(lo, hi);
    for (std::int64_t i = 0; i < t.numel(); ++i) t.data()[i] = dist(rng);
    return t;
  };

  double worst = 0.0;
  std::ostringstream report;
  auto run = [&](const std::string& name, double err) {
    report << name << ": " << err << "\n";
    worst = std::max(worst, err);
  };

  auto b = uniform({6, 5}, -1, 1);
  run("add", grad_check<double>(
                 [&](const Tensor<double>& x) { return reduce_sum(add(x, b)); },
                 uniform({6, 5}, -1, 1)));
  run("mul", grad_check<double>(
                 [&](const Tensor<double>& x) { return reduce_sum(mul(x, b)); },
                 uniform({6, 5}, -1, 1)));
  auto m = uniform({5, 4}, -1, 1);
  run("matmul", grad_check<double>(
                    [&](const Tensor<double>& x) { return reduce_sum(matmul(x, m)); },
                    uniform({6, 5}, -1, 1)));
  run("gelu", grad_check<double>(
                  [&](const Tensor<double>& x) { return reduce_sum(mul(gelu(x), x)); },
                  uniform({6, 5}, -1, 1)));
  run("softmax", grad_check<double>(
                     [&](const Tensor<double>& x) { return reduce_sum(mul(softmax(x, -1), x)); },
                     uniform({6, 5}, -1, 1)));
  auto cw = uniform({3, 2, 3, 3}, -1, 1);
  auto cb = uniform({3}, -1, 1);
  run("conv2d", grad_check<double>(
                    [&](const Tensor<double>& x) { return reduce_sum(conv2d(x, cw, cb, 2, 1)); },
                    uniform({2, 2, 6, 5}, -1, 1)));

  // full scaled-down model: loss gradient at sampled coordinates per group;
  // parameter jitter keeps relu inputs off their measure-zero kinks
  auto cfg = ModelConfig::scaled(32, 2, 4, {2, 4});
  auto params = ModelParams<double>::init(cfg, 7);
  {
    std::uniform_real_distribution<double> jitter(1e-3, 3e-2);
    for (auto& p : params.entries)
      if (p.trainable)
        for (std::int64_t i = 0; i < p.value.numel(); ++i)
          p.value.data()[i] += (rng() & 1 ? 1.0 : -1.0) * jitter(rng);
  }
  auto x = uniform({2, 1, 512, 128}, -1.0, 1.0);
  std::vector<int> labels = {1, 3};

  // pin the KNN edge sets at the base point; they are piecewise constant in
  // the parameters and finite differences must not step across a flip
  ForwardTrace<double> capture;
  capture.capture_graphs = true;
  forward(x, params, NormMode::kTrain, &capture);
  ForwardTrace<double> pinned;
  pinned.use_graphs = &capture.all_graphs;

  auto loss_fn = [&]() {
    return cross_entropy(forward(x, params, NormMode::kTrain, &pinned), labels);
  };
  {
    Tape<double> tape;
    params.watch_all(tape);
    params.zero_grads();
    auto loss = loss_fn();
    tape.backward(loss);
  }
  // per-coordinate step ladder: wide-fan-out weights need a small step to
  // stay inside one linear piece, tiny gradients need a larger one to beat
  // roundoff; each coordinate passes at its best-converged step
  const double eps_ladder[3] = {1e-4, 1e-5, 1e-6};
  double model_worst = 0.0;
  for (auto& p : params.entries) {
    if (!p.trainable) continue;
    std::int64_t n = p.value.numel();
    for (int probe = 0; probe < 4; ++probe) {
      std::int64_t i = static_cast<std::int64_t>(rng() % static_cast<std::uint64_t>(n));
      double analytic = p.value.grad()[i];
      double saved = p.value.data()[i];
      double best = 1.0;
      for (double eps : eps_ladder) {
        p.value.data()[i] = saved + eps;
        double up = loss_fn().data()[0];
        p.value.data()[i] = saved - eps;
        double down = loss_fn().data()[0];
        p.value.data()[i] = saved;
        double numeric = (up - down) / (2 * eps);
        if (std::fabs(analytic) < 1e-6 && std::fabs(numeric) < 1e-6) {
          best = 0.0;  // true derivative is zero; oracle cannot resolve lower
          break;
        }
        double err = std::fabs(analytic - numeric) /
                     std::max(1e-8, std::fabs(analytic) + std::fabs(numeric));
        best = std::min(best, err);
      }
      model_worst = std::max(model_worst, best);
    }
  }
  run("model(dim=32,L=2,H=4) sampled", model_worst);

  report << "max relative error: " << worst << "\n";
  report << (worst < 1e-4 ? "PASS" : "FAIL") << "\n";
  if (out.empty()) {
    std::cout << report.str();
  } else {
    std::ofstream f(out);
    f << report.str();
    std::cout << report.str();
  }
  return worst < 1e-4 ? 0 : 2;
}

int cmd_export(const std::string& checkpoint, const std::string& wav, const std::string& kind,
               int block, int center, const std::string& out) {
  auto ck = load_checkpoint(checkpoint);
  AudioBuffer buf = load_wav(wav);
  buf = resample(buf, 16000);
  auto segments_list = segment(buf, 5.0);
  if (segments_list.empty()) throw std::runtime_error("input shorter than one 5 s segment");
  auto spec = normalize(featurize(segments_list[0]), ck.stats);
  auto x = spec_to_tensor(spec);
  fs::create_directories(out);

  if (kind == "attention") {
    auto heads = export_attention(ck.params, x, block);
    for (std::size_t h = 0; h < heads.size(); ++h) {
      std::ofstream f(fs::path(out) /
                      ("attention_block" + std::to_string(block) + "_head" + std::to_string(h + 1) +
                       ".csv"));
      for (int i = 0; i < heads[h].rows(); ++i) {
        for (int j = 0; j < heads[h].cols(); ++j) f << (j ? "," : "") << heads[h](i, j);
        f << "\n";
      }
    }
    std::cout << "wrote " << heads.size() << " attention matrices to " << out << "\n";
  } else if (kind == "graph") {
    auto edges = export_graph(ck.params, x, block, center);
    std::ofstream f(fs::path(out) / ("graph_block" + std::to_string(block) + "_center" +
                                     std::to_string(center) + ".csv"));
    f << "center_t,center_f,neighbor_t,neighbor_f,block,k\n";
    for (const auto& e : edges)
      f << e.center_t << "," << e.center_f << "," << e.neighbor_t << "," << e.neighbor_f << ","
        << e.block << "," << e.k << "\n";
    std::cout << "wrote " << edges.size() << " edges to " << out << "\n";
  } else {
    throw UsageError("unknown export kind: " + kind);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Mel-graph underwater acoustic target recognition pipeline"};
  app.require_subcommand(1);

  std::string manifest, out, config_path, split = "test", kind = "attention";
  std::string preset = "default4", checkpoint, wav;
  std::uint64_t seed = 0;
  double window_s = 0.5;
  int block = 1, center = 128, n_per_class = 0;

  auto* synth = app.add_subcommand("synth", "generate a synthetic labeled dataset");
  synth->add_option("--preset", preset);
  synth->add_option("--n-per-class", n_per_class);
  synth->add_option("--seed", seed);
  synth->add_option("--out", out)->required();
  synth->add_option("--config", config_path);

  auto* featurize_cmd = app.add_subcommand("featurize", "write feature cache files");
  featurize_cmd->add_option("--manifest", manifest)->required();
  featurize_cmd->add_option("--out", out)->required();
  featurize_cmd->add_option("--config", config_path);
  featurize_cmd->add_option("--seed", seed);

  auto* hinich_cmd = app.add_subcommand("hinich", "Gaussianity and linearity tests");
  hinich_cmd->add_option("wav", wav)->required();
  hinich_cmd->add_option("--window-s", window_s);
  hinich_cmd->add_option("--out", out)->required();

  auto* train = app.add_subcommand("train", "train a model from a manifest");
  train->add_option("--manifest", manifest)->required();
  train->add_option("--out", out)->required();
  train->add_option("--config", config_path);
  train->add_option("--seed", seed);

  auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint on a split");
  eval_cmd->add_option("checkpoint", checkpoint)->required();
  eval_cmd->add_option("--manifest", manifest)->required();
  eval_cmd->add_option("--split", split);
  eval_cmd->add_option("--out", out)->required();
  eval_cmd->add_option("--config", config_path);
  eval_cmd->add_option("--seed", seed);

  auto* predict = app.add_subcommand("predict", "per-segment class probabilities");
  predict->add_option("checkpoint", checkpoint)->required();
  predict->add_option("wav", wav)->required();
  predict->add_option("--out", out);

  auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference gradient verification");
  gradcheck->add_option("--preset", preset);
  gradcheck->add_option("--out", out);

  auto* export_cmd = app.add_subcommand("export", "attention / graph interpretability exports");
  export_cmd->add_option("checkpoint", checkpoint)->required();
  export_cmd->add_option("wav", wav)->required();
  export_cmd->add_option("--kind", kind);
  export_cmd->add_option("--block", block);
  export_cmd->add_option("--center", center);
  export_cmd->add_option("--out", out)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    RunConfig cfg;
    if (!config_path.empty()) cfg.load_file(config_path);

    if (synth->parsed()) return cmd_synth(cfg, preset, n_per_class, seed, out);
    if (featurize_cmd->parsed()) return cmd_featurize(cfg, manifest, out, seed);
    if (hinich_cmd->parsed()) return cmd_hinich(wav, window_s, out);
    if (train->parsed()) return cmd_train(cfg, manifest, out, seed);
    if (eval_cmd->parsed()) return cmd_eval(cfg, checkpoint, manifest, split, out, seed);
    if (predict->parsed()) return cmd_predict(checkpoint, wav, out);
    if (gradcheck->parsed()) return cmd_gradcheck(out);
    if (export_cmd->parsed()) return cmd_export(checkpoint, wav, kind, block, center, out);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
