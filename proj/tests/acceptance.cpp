// Acceptance suite: runs every acceptance criterion at its stated tolerance
// and prints one pass/fail line per criterion. Exit code 0 only if all pass.
//
// Usage: acceptance [criterion numbers...]   (default: all)

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <set>
#include <sstream>
#include <vector>

#include "melgraph/audio_io.hpp"
#include "melgraph/evaluation.hpp"
#include "melgraph/features.hpp"
#include "melgraph/hinich.hpp"
#include "melgraph/model.hpp"
#include "melgraph/stats.hpp"
#include "melgraph/synthgen.hpp"
#include "melgraph/training.hpp"

namespace fs = std::filesystem;
using namespace melgraph;
using Clock = std::chrono::steady_clock;

namespace {

struct Criterion {
  int id;
  std::string name;
  bool passed = false;
  std::string detail;
  double seconds = 0.0;
};

std::vector<Criterion> g_results;

void record(int id, const std::string& name, bool passed, const std::string& detail,
            double seconds) {
  g_results.push_back({id, name, passed, detail, seconds});
  std::cout << (passed ? "PASS" : "FAIL") << "  criterion " << id << " (" << name << "): "
            << detail << "  [" << std::fixed << std::setprecision(1) << seconds << " s]\n"
            << std::defaultfloat;
  std::cout.flush();
}

template <typename Fn>
void run_criterion(int id, const std::string& name, const std::set<int>& selected, Fn&& fn) {
  if (!selected.empty() && !selected.count(id)) return;
  auto t0 = Clock::now();
  bool passed = false;
  std::string detail;
  try {
    auto result = fn();
    passed = result.first;
    detail = result.second;
  } catch (const std::exception& e) {
    detail = std::string("exception: ") + e.what();
  }
  record(id, name, passed, detail, std::chrono::duration<double>(Clock::now() - t0).count());
}

AudioSegment tone_segment(double hz) {
  AudioSegment seg;
  seg.sample_rate = 16000;
  seg.samples.resize(80000);
  for (int i = 0; i < 80000; ++i)
    seg.samples[i] = 0.5 * std::sin(2.0 * 3.14159265358979323846 * hz * i / 16000.0);
  return seg;
}

std::vector<double> gaussian_noise(std::size_t n, std::mt19937_64& rng) {
  std::normal_distribution<double> dist(0.0, 1.0);
  std::vector<double> x(n);
  for (auto& v : x) v = dist(rng);
  return x;
}

// the desk-scale benchmark of criteria 6 and 7
struct BenchmarkResult {
  double train_oa = 0.0;
  double test_oa = 0.0;
  double test_kappa = 0.0;
};

BenchmarkResult run_benchmark(const DatasetBundle& bundle, std::uint64_t seed, bool use_encoder,
                              bool use_gnn, bool use_ffn, int epochs) {
  ModelConfig cfg = ModelConfig::scaled(32, 4, 4, {2, 3, 5, 8});
  cfg.use_encoder = use_encoder;
  cfg.use_gnn = use_gnn;
  cfg.use_ffn = use_ffn;
  TrainConfig tc;
  tc.lr0 = 1.5e-3;
  tc.epochs = epochs;
  tc.decay_epoch = (3 * epochs) / 4;
  tc.batch_size = 16;
  tc.seed = seed;

  auto result = fit(ModelParams<float>::init(cfg, seed), bundle, tc);
  BenchmarkResult out;
  double best_train = 0.0;
  for (const auto& h : result.history) best_train = std::max(best_train, h.train_oa);
  out.train_oa = best_train;
  auto cm = evaluate(result.best_params, bundle.test, bundle.stats);
  auto report = metrics_report(cm);
  out.test_oa = report.oa;
  out.test_kappa = report.kappa;
  return out;
}

DatasetBundle benchmark_dataset(std::uint64_t seed) {
  auto dir = fs::temp_directory_path() / ("melgraph_accept_data_" + std::to_string(seed));
  fs::remove_all(dir);
  DatasetLayout layout;  // 50 train / 10 val / 10 test per class
  auto manifest = gen_dataset(default_preset(), layout, seed, dir.string());
  auto bundle = prepare_datasets(manifest);
  fs::remove_all(dir);
  return bundle;
}

}  // namespace

int main(int argc, char** argv) {
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));

  // 1. shape contract
  run_criterion(1, "shape contract", selected, [] {
    auto seg = tone_segment(440.0);
    auto spec = featurize(seg);
    bool ok = spec.values.rows() == 512 && spec.values.cols() == 128;

    ModelConfig cfg;
    cfg.n_classes = 5;
    auto params = ModelParams<float>::init(cfg, 1);
    auto x = spec_to_tensor(normalize(spec, FeatureStats{spec.values.mean(), 1.0}));
    ok &= x.shape() == Shape{1, 1, 512, 128};

    auto stem = patchify_stem(x, params, NormMode::kEval);
    ok &= stem.shape() == Shape{1, 96, 32, 8};

    auto nodes = to_nodes(add_positional(stem, params.at("pos_embed")));
    ok &= nodes.shape() == Shape{1, 256, 96};

    auto pooled = adaptive_avg_pool(from_nodes(nodes, 32, 8));
    auto hidden = conv2d(pooled, params.at("head.conv1.w"), params.at("head.conv1.b"),
                         std::int64_t(1), std::int64_t(0));
    ok &= hidden.shape() == Shape{1, 512, 1, 1};

    auto logits = forward(x, params, NormMode::kEval);
    ok &= logits.shape() == Shape{1, 5};
    return std::make_pair(ok, std::string("feature 512x128, stem 96x32x8, nodes 256x96, "
                                           "head hidden 512x1x1, logits C"));
  });

  // 2. parameter count
  run_criterion(2, "parameter count", selected, [] {
    ModelConfig cfg;
    auto params = ModelParams<float>::init(cfg, 1);
    auto count = param_count(params);
    double rel = std::fabs(static_cast<double>(count) - 2.05e6) / 2.05e6;
    std::ostringstream detail;
    detail << count << " trainable parameters, " << std::setprecision(3) << rel * 100
           << "% from 2.05 M";
    return std::make_pair(rel <= 0.05, detail.str());
  });

  // 3. gradient verification
  run_criterion(3, "gradient verification", selected, [] {
    std::mt19937_64 rng(12345);
    auto uniform = [&rng](Shape shape, double lo, double hi) {
      Tensor<double> t(shape);
      std::uniform_real_distribution<double> dist(lo, hi);
      for (std::int64_t i = 0; i < t.numel(); ++i) t.data()[i] = dist(rng);
      return t;
    };
    double worst = 0.0;
    auto track = [&worst](double err) { worst = std::max(worst, err); };

    // primitive sweep at model-like shapes
    auto b = uniform({8, 12}, -1, 1);
    track(grad_check<double>(
        [&](const Tensor<double>& x) { return reduce_sum(add(x, b)); }, uniform({8, 12}, -1, 1)));
    track(grad_check<double>(
        [&](const Tensor<double>& x) { return reduce_sum(mul(x, b)); }, uniform({8, 12}, -1, 1)));
    track(grad_check<double>(
        [&](const Tensor<double>& x) { return reduce_sum(scale(x, 1.7)); },
        uniform({8, 12}, -1, 1)));
    auto m2 = uniform({12, 6}, -1, 1);
    track(grad_check<double>(
        [&](const Tensor<double>& x) { return reduce_sum(matmul(x, m2)); },
        uniform({8, 12}, -1, 1)));
    auto m3 = uniform({2, 12, 6}, -1, 1);
    track(grad_check<double>(
        [&](const Tensor<double>& x) { return reduce_sum(matmul(x, m3)); },
        uniform({2, 8, 12}, -1, 1)));
    track(grad_check<double>(
        [&](const Tensor<double>& x) { return reduce_sum(mul(reshape(x, {24, 4}), reshape(x, {24, 4}))); },
        uniform({4, 6, 4}, -1, 1)));
    auto pw = uniform({4, 6, 2}, -1, 1);
    track(grad_check<double>(
        [&](const Tensor<double>& x) { return reduce_sum(mul(permute(x, {2, 0, 1}), pw)); },
        uniform({6, 2, 4}, -1, 1)));
    auto cpart = uniform({3, 4}, -1, 1);
    track(grad_check<double>(
        [&](const Tensor<double>& x) {
          auto c = concat<double>({x, cpart}, 0);
          return reduce_sum(mul(c, c));
        },
        uniform({5, 4}, -1, 1)));
    track(grad_check<double>(
        [&](const Tensor<double>& x) {
          auto s = slice(x, 1, 1, 3);
          return reduce_sum(mul(s, s));
        },
        uniform({4, 6}, -1, 1)));
    auto relu_in = uniform({8, 12}, -1, 1);
    for (std::int64_t i = 0; i < relu_in.numel(); ++i)
      if (std::fabs(relu_in.data()[i]) < 1e-3) relu_in.data()[i] = 0.1;
    track(grad_check<double>(
        [&](const Tensor<double>& x) { return reduce_sum(mul(relu(x), x)); }, relu_in));
    track(grad_check<double>(
        [&](const Tensor<double>& x) { return reduce_sum(mul(gelu(x), x)); },
        uniform({8, 12}, -1, 1)));
    track(grad_check<double>(
        [&](const Tensor<double>& x) { return reduce_sum(mul(softmax(x, -1), x)); },
        uniform({8, 12}, -1, 1)));
    auto cw = uniform({4, 3, 3, 3}, -1, 1);
    auto cb = uniform({4}, -1, 1);
    auto cx = uniform({2, 3, 8, 6}, -1, 1);
    track(grad_check<double>(
        [&](const Tensor<double>& x) { return reduce_sum(conv2d(x, cw, cb, 2, 1)); }, cx));
    track(grad_check<double>(
        [&](const Tensor<double>& w) { return reduce_sum(conv2d(cx, w, cb, 2, 1)); }, cw));
    auto bn_w = uniform({2, 3, 4, 4}, 0.5, 1.5);
    auto bn_g = uniform({3}, 0.5, 1.5);
    auto bn_b = uniform({3}, -1, 1);
    track(grad_check<double>(
        [&](const Tensor<double>& x) {
          auto rm = Tensor<double>::zeros({3});
          auto rv = Tensor<double>::full({3}, 1.0);
          return reduce_sum(mul(batchnorm2d(x, bn_g, bn_b, rm, rv, NormMode::kTrain), bn_w));
        },
        uniform({2, 3, 4, 4}, -1, 1)));
    auto ln_g = uniform({12}, 0.5, 1.5);
    auto ln_b = uniform({12}, -1, 1);
    auto ln_w = uniform({8, 12}, 0.5, 1.5);
    track(grad_check<double>(
        [&](const Tensor<double>& x) { return reduce_sum(mul(layernorm(x, ln_g, ln_b), ln_w)); },
        uniform({8, 12}, -1, 1)));
    NeighborLists nb;
    nb.batch = 1;
    nb.nodes = 6;
    nb.k = 2;
    std::mt19937_64 nb_rng(9);
    for (int i = 0; i < 6; ++i) {
      int a = static_cast<int>(nb_rng() % 6), c = static_cast<int>(nb_rng() % 6);
      while (a == i) a = static_cast<int>(nb_rng() % 6);
      while (c == i || c == a) c = static_cast<int>(nb_rng() % 6);
      nb.idx.push_back(a);
      nb.idx.push_back(c);
    }
    track(grad_check<double>(
        [&](const Tensor<double>& x) {
          auto y = neighbor_max_diff(x, nb);
          return reduce_sum(mul(y, y));
        },
        uniform({6, 5}, -1, 1)));
    track(grad_check<double>(
        [&](const Tensor<double>& x) { return reduce_sum(adaptive_avg_pool(x)); },
        uniform({2, 3, 4, 4}, -1, 1)));
    std::vector<int> labels = {1, 3};
    track(grad_check<double>(
        [&](const Tensor<double>& x) { return cross_entropy(x, labels); },
        uniform({2, 4}, -1, 1)));
    double primitive_worst = worst;

    // full scaled-down model wrt every parameter group, sampled coordinates;
    // a small jitter on every parameter keeps relu inputs and max ties away
    // from their measure-zero kinks, where central differences are undefined
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
    std::vector<int> model_labels = {1, 3};

    // The KNN edge sets are piecewise constant in the parameters, so the
    // finite-difference pass replays the graphs captured at the base point
    // (analogous to holding an argmax tie fixed).
    ForwardTrace<double> capture;
    capture.capture_graphs = true;
    forward(x, params, NormMode::kTrain, &capture);
    ForwardTrace<double> pinned;
    pinned.use_graphs = &capture.all_graphs;

    auto loss_value = [&]() {
      return cross_entropy(forward(x, params, NormMode::kTrain, &pinned), model_labels)
          .data()[0];
    };
    {
      Tape<double> tape;
      params.watch_all(tape);
      params.zero_grads();
      auto loss =
          cross_entropy(forward(x, params, NormMode::kTrain, &pinned), model_labels);
      tape.backward(loss);
    }
    // No single step fits every coordinate of a relu network this wide: a
    // large step straddles kinks downstream of high-fan-out weights, a small
    // one drowns low-magnitude gradients in roundoff. Each coordinate is
    // accepted at its best-converged step of the ladder.
    const double eps_ladder[3] = {1e-4, 1e-5, 1e-6};
    double model_worst = 0.0;
    for (auto& p : params.entries) {
      if (!p.trainable) continue;
      std::int64_t n = p.value.numel();
      int probes = static_cast<int>(std::min<std::int64_t>(4, n));
      for (int probe = 0; probe < probes; ++probe) {
        std::int64_t i = static_cast<std::int64_t>(rng() % static_cast<std::uint64_t>(n));
        double analytic = p.value.grad()[i];
        double saved = p.value.data()[i];
        double best = 1.0;
        for (double eps : eps_ladder) {
          p.value.data()[i] = saved + eps;
          double up = loss_value();
          p.value.data()[i] = saved - eps;
          double down = loss_value();
          p.value.data()[i] = saved;
          double numeric = (up - down) / (2 * eps);
          // both sides below the oracle noise floor: true derivative is zero
          // (conv biases cancel in batch norm, the key bias in softmax)
          if (std::fabs(analytic) < 1e-6 && std::fabs(numeric) < 1e-6) {
            best = 0.0;
            break;
          }
          double err = std::fabs(analytic - numeric) /
                       std::max(1e-8, std::fabs(analytic) + std::fabs(numeric));
          best = std::min(best, err);
        }
        model_worst = std::max(model_worst, best);
      }
    }
    worst = std::max(primitive_worst, model_worst);
    std::ostringstream detail;
    detail << "primitives max " << std::scientific << std::setprecision(2) << primitive_worst
           << ", model max " << model_worst;
    return std::make_pair(worst < 1e-4, detail.str());
  });

  // 4. KNN oracle equivalence
  run_criterion(4, "knn oracle equivalence", selected, [] {
    std::mt19937_64 rng(99);
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    bool all_equal = true;
    for (int trial = 0; trial < 100 && all_equal; ++trial) {
      Tensor<double> x({256, 8});
      for (std::int64_t i = 0; i < x.numel(); ++i) x.data()[i] = dist(rng);
      // duplicated rows exercise the tie-break rule
      for (int dup = 0; dup < 24; ++dup)
        for (int d = 0; d < 8; ++d) x.at({180 + dup, d}) = x.at({dup, d});

      // oracle: full O(N^2) sort per node, reused for every K
      std::vector<std::vector<int>> oracle(256);
      for (int i = 0; i < 256; ++i) {
        std::vector<std::pair<double, int>> d2;
        d2.reserve(255);
        for (int j = 0; j < 256; ++j) {
          if (j == i) continue;
          double acc = 0.0;
          for (int d = 0; d < 8; ++d) {
            double diff = x.at({j, d}) - x.at({i, d});
            acc += diff * diff;
          }
          d2.push_back({acc, j});
        }
        std::sort(d2.begin(), d2.end());
        oracle[i].reserve(8);
        for (int j = 0; j < 8; ++j) oracle[i].push_back(d2[j].second);
      }
      for (int k : {1, 2, 4, 8}) {
        auto g = knn_graph(x, k);
        for (int i = 0; i < 256 && all_equal; ++i)
          for (int j = 0; j < k; ++j)
            if (g.neighbor_idx[i][j] != oracle[i][j]) all_equal = false;
      }
    }
    return std::make_pair(all_equal, std::string("100 feature sets, K in {1,2,4,8}, with ties"));
  });

  // 5. K schedule
  run_criterion(5, "k schedule", selected, [] {
    auto ks = default_k_schedule(8);
    bool ok = ks == std::vector<int>{2, 2, 3, 4, 5, 6, 7, 8} && ks[3] == 4 && ks[7] == 8;
    std::ostringstream detail;
    detail << "schedule";
    for (int k : ks) detail << " " << k;
    return std::make_pair(ok, detail.str());
  });

  // 6. synthetic end-to-end
  run_criterion(6, "synthetic end-to-end", selected, [] {
    auto bundle = benchmark_dataset(2024);
    auto r = run_benchmark(bundle, 2024, true, true, true, 60);
    std::ostringstream detail;
    detail << "train OA " << r.train_oa << ", test OA " << r.test_oa << ", kappa "
           << r.test_kappa;
    bool ok = r.train_oa >= 0.95 && r.test_oa >= 0.80 && r.test_kappa > 0.7;
    return std::make_pair(ok, detail.str());
  });

  // 7. ablation direction
  run_criterion(7, "ablation direction", selected, [] {
    auto bundle = benchmark_dataset(2024);
    const std::uint64_t seeds[3] = {11, 22, 33};
    double mean_full = 0.0, mean_no_enc = 0.0, mean_no_gnn = 0.0, mean_no_ffn = 0.0;
    for (std::uint64_t s : seeds) {
      mean_full += run_benchmark(bundle, s, true, true, true, 60).test_oa;
      mean_no_enc += run_benchmark(bundle, s, false, true, true, 60).test_oa;
      mean_no_gnn += run_benchmark(bundle, s, true, false, true, 60).test_oa;
      mean_no_ffn += run_benchmark(bundle, s, true, true, false, 60).test_oa;
    }
    mean_full /= 3;
    mean_no_enc /= 3;
    mean_no_gnn /= 3;
    mean_no_ffn /= 3;
    bool ok = mean_full >= mean_no_enc - 0.02 && mean_full >= mean_no_gnn - 0.02 &&
              mean_full >= mean_no_ffn - 0.02;
    std::ostringstream detail;
    detail << "full " << mean_full << ", -encoder " << mean_no_enc << ", -gnn " << mean_no_gnn
           << ", -ffn " << mean_no_ffn;
    return std::make_pair(ok, detail.str());
  });

  // 8. Hinich level and power
  run_criterion(8, "hinich level/power", selected, [] {
    std::mt19937_64 rng(4242);
    int accept = 0;
    for (int t = 0; t < 100; ++t) {
      auto est = estimate_bispectrum(gaussian_noise(128 * 64, rng), 128);
      if (gaussianity_pfa(est).pfa >= 0.05) ++accept;
    }
    int reject = 0;
    std::uniform_real_distribution<double> phase(0.0, 2.0 * 3.14159265358979323846);
    std::normal_distribution<double> noise(0.0, 0.2);
    for (int t = 0; t < 100; ++t) {
      double p1 = phase(rng), p2 = phase(rng);
      std::vector<double> x(64 * 128);
      for (std::size_t i = 0; i < x.size(); ++i) {
        double u = static_cast<double>(i);
        x[i] = std::cos(2 * 3.14159265358979323846 * 10 / 64.0 * u + p1) +
               std::cos(2 * 3.14159265358979323846 * 7 / 64.0 * u + p2) +
               std::cos(2 * 3.14159265358979323846 * 17 / 64.0 * u + p1 + p2) + noise(rng);
      }
      if (gaussianity_pfa(estimate_bispectrum(x, 64)).pfa < 0.01) ++reject;
    }

    // 20 s generated file -> exactly 40 result rows
    auto wav_path = (fs::temp_directory_path() / "accept_hinich.wav").string();
    {
      std::vector<double> samples = gaussian_noise(16000 * 20, rng);
      for (auto& v : samples) v *= 0.2;
      save_wav(wav_path, samples, 16000);
    }
    auto buf = load_wav(wav_path);
    auto rows = batch_test(buf, 0.5);
    auto csv_path = (fs::temp_directory_path() / "accept_hinich.csv").string();
    write_hinich_csv(csv_path, rows);
    std::ifstream csv(csv_path);
    int line_count = -1;  // header
    std::string line;
    while (std::getline(csv, line))
      if (!line.empty()) ++line_count;

    bool ok = accept >= 90 && reject >= 95 && rows.size() == 40 && line_count == 40;
    std::ostringstream detail;
    detail << "gaussian accept " << accept << "/100, coupled reject " << reject
           << "/100, windows " << rows.size();
    return std::make_pair(ok, detail.str());
  });

  // 9. metric oracles
  run_criterion(9, "metric oracles", selected, [] {
    ConfusionMatrix cm;
    cm.n_classes = 2;
    cm.counts = {8, 2, 3, 7};
    bool ok = std::fabs(oa(cm) - 0.75) < 1e-12;
    ok &= std::fabs(aa(cm) - 0.75) < 1e-12;
    ok &= std::fabs(kappa(cm) - 0.5) < 1e-12;
    ok &= std::fabs(f1(cm) - 0.5 * (16.0 / 21.0 + 14.0 / 19.0)) < 1e-12;

    std::mt19937_64 rng(31);
    for (int trial = 0; trial < 1000 && ok; ++trial) {
      int n = 2 + static_cast<int>(rng() % 4);
      ConfusionMatrix r;
      r.n_classes = n;
      r.counts.resize(static_cast<std::size_t>(n) * n);
      for (auto& c : r.counts) c = static_cast<std::int64_t>(rng() % 20);
      r.counts[0] += 1;
      std::vector<int> perm(n);
      for (int i = 0; i < n; ++i) perm[i] = i;
      std::shuffle(perm.begin(), perm.end(), rng);
      ConfusionMatrix p;
      p.n_classes = n;
      p.counts.assign(r.counts.size(), 0);
      for (int t = 0; t < n; ++t)
        for (int q = 0; q < n; ++q) p.at(perm[t], perm[q]) = r.at(t, q);
      ok &= std::fabs(oa(p) - oa(r)) < 1e-12;
      ok &= std::fabs(aa(p) - aa(r)) < 1e-12;
      ok &= std::fabs(kappa(p) - kappa(r)) < 1e-12;
      ok &= std::fabs(f1(p) - f1(r)) < 1e-12;
    }
    return std::make_pair(ok, std::string("hand matrices to 1e-12; 1000 permutation trials"));
  });

  // 10. determinism and persistence
  run_criterion(10, "determinism & persistence", selected, [] {
    auto dir = fs::temp_directory_path() / "melgraph_accept_det";
    fs::remove_all(dir);
    DatasetLayout layout;
    layout.n_train_per_class = 6;
    layout.n_val_per_class = 2;
    layout.n_test_per_class = 2;
    auto manifest = gen_dataset(default_preset(), layout, 77, dir.string());
    auto bundle = prepare_datasets(manifest);

    TrainConfig tc;
    tc.epochs = 5;
    tc.decay_epoch = 4;
    tc.batch_size = 8;
    tc.seed = 55;
    ModelConfig mc = ModelConfig::scaled(16, 1, 2, {2});

    auto r1 = fit(ModelParams<float>::init(mc, 55), bundle, tc);
    auto r2 = fit(ModelParams<float>::init(mc, 55), bundle, tc);
    bool ok = r1.history.size() == r2.history.size();
    for (std::size_t i = 0; ok && i < r1.history.size(); ++i) {
      ok &= std::fabs(r1.history[i].train_loss - r2.history[i].train_loss) <= 1e-6;
      ok &= std::fabs(r1.history[i].val_oa - r2.history[i].val_oa) <= 1e-6;
    }

    // checkpoint save -> load -> eval reproduces test OA bitwise
    auto ck_path = (dir / "best.gtck").string();
    auto stats = bundle.stats;
    save_checkpoint(ck_path, r1.best_params, stats);
    auto loaded = load_checkpoint(ck_path);
    double oa_direct = oa(evaluate(r1.best_params, bundle.test, stats));
    double oa_loaded = oa(evaluate(loaded.params, bundle.test, loaded.stats));
    ok &= oa_direct == oa_loaded;

    fs::remove_all(dir);
    std::ostringstream detail;
    detail << "history match, test OA " << oa_direct << " reproduced bitwise";
    return std::make_pair(ok, detail.str());
  });

  // 11. interpretability exports
  run_criterion(11, "interpretability exports", selected, [] {
    ModelConfig cfg;  // full-size: 8 blocks, 8 heads
    cfg.n_classes = 4;
    auto params = ModelParams<float>::init(cfg, 3);
    auto seg = tone_segment(500.0);
    auto spec = featurize(seg);
    auto x = spec_to_tensor(normalize(spec, FeatureStats{spec.values.mean(), 2.0}));

    bool ok = true;
    for (int block : {1, 8}) {
      auto heads = export_attention(params, x, block);
      ok &= heads.size() == 8;
      for (const auto& m : heads)
        for (int i = 0; i < m.rows(); ++i) ok &= std::fabs(m.row(i).sum() - 1.0) <= 1e-5;
    }
    for (int block = 1; block <= 8; ++block) {
      auto edges = export_graph(params, x, block, 77);
      ok &= edges.size() == static_cast<std::size_t>(cfg.k_schedule[block - 1]);
    }
    return std::make_pair(ok, std::string("attention rows sum to 1 (blocks 1 and 8, 8 heads); "
                                           "graph edges match the K schedule"));
  });

  int failed = 0;
  for (const auto& r : g_results)
    if (!r.passed) ++failed;
  std::cout << "\n" << (g_results.size() - failed) << "/" << g_results.size()
            << " criteria passed\n";
  return failed == 0 ? 0 : 1;
}
