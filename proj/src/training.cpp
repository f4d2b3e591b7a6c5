#include "melgraph/training.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include "melgraph/audio_io.hpp"
#include "melgraph/threading.hpp"

namespace melgraph {

void TrainConfig::validate() const {
  if (lr0 <= 0) throw std::invalid_argument("TrainConfig: lr0 must be > 0");
  if (decay_epoch >= epochs) throw std::invalid_argument("TrainConfig: decay_epoch must be < epochs");
  if (batch_size < 1) throw std::invalid_argument("TrainConfig: batch_size must be >= 1");
}

double lr_at(int epoch, const TrainConfig& cfg) {
  if (epoch < 1 || epoch > cfg.epochs) throw std::invalid_argument("lr_at: epoch out of range");
  return epoch <= cfg.decay_epoch ? cfg.lr0 : cfg.lr0 * cfg.decay_factor;
}

AdamState make_adam_state(const ModelParams<float>& params) {
  AdamState st;
  for (const auto& p : params.entries) {
    std::size_t n = p.trainable ? static_cast<std::size_t>(p.value.numel()) : 0;
    st.m.emplace_back(n, 0.0f);
    st.v.emplace_back(n, 0.0f);
  }
  return st;
}

void adam_step(ModelParams<float>& params, AdamState& state, double lr, const TrainConfig& cfg) {
  // validate every gradient before touching any parameter
  for (const auto& p : params.entries) {
    if (!p.trainable) continue;
    if (!p.value.has_grad()) continue;
    for (float g : p.value.grad())
      if (!std::isfinite(g))
        throw std::runtime_error("adam_step: non-finite gradient in parameter '" + p.name + "'");
  }
  state.step += 1;
  const double b1 = cfg.beta1, b2 = cfg.beta2;
  const double bc1 = 1.0 - std::pow(b1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(b2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.entries.size(); ++i) {
    auto& p = params.entries[i];
    if (!p.trainable) continue;
    auto& m = state.m[i];
    auto& v = state.v[i];
    const std::size_t n = static_cast<std::size_t>(p.value.numel());
    const float* g = p.value.has_grad() ? p.value.grad().data() : nullptr;
    float* w = p.value.data();
    for (std::size_t j = 0; j < n; ++j) {
      double gj = g ? static_cast<double>(g[j]) : 0.0;
      m[j] = static_cast<float>(b1 * m[j] + (1.0 - b1) * gj);
      v[j] = static_cast<float>(b2 * v[j] + (1.0 - b2) * gj * gj);
      double mhat = m[j] / bc1;
      double vhat = v[j] / bc2;
      w[j] -= static_cast<float>(lr * mhat / (std::sqrt(vhat) + cfg.adam_eps));
    }
  }
}

DatasetBundle prepare_datasets(const std::string& manifest_path, const FeatureParams& fp) {
  auto entries = read_manifest(manifest_path);
  if (entries.empty()) throw std::runtime_error("prepare_datasets: empty manifest");

  struct Item {
    AudioSegment seg;
    Split split;
    bool split_known = false;
  };
  std::vector<Item> items;
  bool all_presplit = true;
  for (const auto& e : entries) all_presplit &= e.has_split;

  for (const auto& e : entries) {
    AudioBuffer buf = load_wav(e.path);
    buf.class_label = e.label;
    buf = resample(buf, fp.sample_rate);
    for (auto& seg : segment(buf, 5.0)) {
      Item it;
      it.seg = std::move(seg);
      if (e.has_split) {
        it.split = e.split;
        it.split_known = true;
      }
      items.push_back(std::move(it));
    }
  }
  if (items.empty()) throw std::runtime_error("prepare_datasets: no full 5 s segments");

  if (!all_presplit) {
    std::vector<AudioSegment> segs;
    segs.reserve(items.size());
    for (auto& it : items) segs.push_back(it.seg);
    SplitManifest sm = split_by_time(segs);
    for (const auto& se : sm.entries) {
      items[se.segment_index].split = se.split;
      items[se.segment_index].split_known = true;
    }
  }

  // featurize in parallel, order preserved
  std::vector<MelSpectrogram> specs(items.size());
  parallel_for(static_cast<std::int64_t>(items.size()), [&](std::int64_t lo, std::int64_t hi) {
    for (std::int64_t i = lo; i < hi; ++i)
      specs[static_cast<std::size_t>(i)] = featurize(items[static_cast<std::size_t>(i)].seg, fp);
  });

  DatasetBundle bundle;
  for (std::size_t i = 0; i < items.size(); ++i) {
    FeatureDataset* dst = items[i].split == Split::kTrain
                              ? &bundle.train
                              : (items[i].split == Split::kVal ? &bundle.val : &bundle.test);
    dst->specs.push_back(std::move(specs[i]));
    dst->labels.push_back(items[i].seg.class_label);
    bundle.n_classes = std::max(bundle.n_classes, items[i].seg.class_label + 1);
  }
  if (bundle.train.size() == 0) throw std::runtime_error("prepare_datasets: empty training split");
  bundle.stats = compute_stats(bundle.train.specs);
  return bundle;
}

namespace {

Tensor<float> batch_tensor(const std::vector<const MelSpectrogram*>& specs) {
  const std::int64_t B = static_cast<std::int64_t>(specs.size());
  const std::int64_t T = specs[0]->values.rows(), F = specs[0]->values.cols();
  Tensor<float> x({B, 1, T, F});
  for (std::int64_t b = 0; b < B; ++b) {
    const auto& v = specs[static_cast<std::size_t>(b)]->values;
    float* dst = x.data() + b * T * F;
    for (std::int64_t r = 0; r < T; ++r)
      for (std::int64_t c = 0; c < F; ++c) dst[r * F + c] = static_cast<float>(v(r, c));
  }
  return x;
}

std::vector<int> argmax_rows(const Tensor<float>& logits) {
  const std::int64_t B = logits.dim(0), C = logits.dim(1);
  std::vector<int> out(static_cast<std::size_t>(B));
  for (std::int64_t b = 0; b < B; ++b) {
    const float* row = logits.data() + b * C;
    int best = 0;
    for (std::int64_t c = 1; c < C; ++c)
      if (row[c] > row[best]) best = static_cast<int>(c);
    out[static_cast<std::size_t>(b)] = best;
  }
  return out;
}

}  // namespace

EpochStats train_epoch(ModelParams<float>& params, const FeatureDataset& data,
                       const FeatureStats& stats, const TrainConfig& cfg, AdamState& adam,
                       double lr, std::mt19937_64& rng) {
  if (data.size() == 0) throw std::invalid_argument("train_epoch: empty dataset");
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);

  double loss_sum = 0.0;
  std::int64_t correct = 0;
  std::size_t cursor = 0;
  while (cursor < order.size()) {
    std::size_t take = std::min<std::size_t>(cfg.batch_size, order.size() - cursor);
    std::vector<MelSpectrogram> batch_specs;
    std::vector<int> labels;
    batch_specs.reserve(take);
    for (std::size_t i = 0; i < take; ++i) {
      const auto& spec = data.specs[order[cursor + i]];
      MelSpectrogram prepared =
          cfg.augment ? spec_augment(spec, cfg.augment_f_mask, cfg.augment_t_mask, rng) : spec;
      batch_specs.push_back(normalize(prepared, stats));
      labels.push_back(data.labels[order[cursor + i]]);
    }
    std::vector<const MelSpectrogram*> ptrs;
    for (const auto& s : batch_specs) ptrs.push_back(&s);
    Tensor<float> x = batch_tensor(ptrs);

    Tape<float> tape;
    params.zero_grads();
    params.watch_all(tape);
    Tensor<float> logits = forward(x, params, NormMode::kTrain);
    Tensor<float> loss = cross_entropy(logits, labels);
    tape.backward(loss);
    adam_step(params, adam, lr, cfg);

    loss_sum += static_cast<double>(loss.data()[0]) * static_cast<double>(take);
    auto preds = argmax_rows(logits);
    for (std::size_t i = 0; i < take; ++i)
      if (preds[i] == labels[i]) ++correct;
    cursor += take;
  }
  EpochStats st;
  st.loss = loss_sum / static_cast<double>(data.size());
  st.train_oa = static_cast<double>(correct) / static_cast<double>(data.size());
  return st;
}

ConfusionMatrix evaluate(const ModelParams<float>& params, const FeatureDataset& data,
                         const FeatureStats& stats, int batch_size) {
  std::vector<int> y_true, y_pred;
  std::size_t cursor = 0;
  while (cursor < data.size()) {
    std::size_t take = std::min<std::size_t>(batch_size, data.size() - cursor);
    std::vector<MelSpectrogram> batch_specs;
    for (std::size_t i = 0; i < take; ++i)
      batch_specs.push_back(normalize(data.specs[cursor + i], stats));
    std::vector<const MelSpectrogram*> ptrs;
    for (const auto& s : batch_specs) ptrs.push_back(&s);
    Tensor<float> logits = forward(batch_tensor(ptrs), params, NormMode::kEval);
    auto preds = argmax_rows(logits);
    for (std::size_t i = 0; i < take; ++i) {
      y_true.push_back(data.labels[cursor + i]);
      y_pred.push_back(preds[i]);
    }
    cursor += take;
  }
  return confusion(y_true, y_pred, params.config.n_classes);
}

FitResult fit(ModelParams<float> params, const DatasetBundle& data, const TrainConfig& cfg) {
  cfg.validate();
  std::mt19937_64 rng(cfg.seed);
  AdamState adam = make_adam_state(params);

  FitResult result;
  result.best_val_oa = -1.0;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    double lr = lr_at(epoch, cfg);
    EpochStats st = train_epoch(params, data.train, data.stats, cfg, adam, lr, rng);
    double val_oa = data.val.size() > 0 ? oa(evaluate(params, data.val, data.stats)) : st.train_oa;
    result.history.push_back({epoch, lr, st.loss, st.train_oa, val_oa});
    if (val_oa > result.best_val_oa) {
      result.best_val_oa = val_oa;
      result.best_epoch = epoch;
      // deep copy of the current parameters
      result.best_params = ModelParams<float>();
      result.best_params.config = params.config;
      for (const auto& p : params.entries)
        result.best_params.add(p.name, p.value.clone(), p.trainable);
    }
  }
  return result;
}

void write_history_csv(const std::string& path, const std::vector<HistoryRow>& history) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write history: " + path);
  f << "epoch,lr,train_loss,train_oa,val_oa\n";
  for (const auto& h : history)
    f << h.epoch << "," << h.lr << "," << h.train_loss << "," << h.train_oa << "," << h.val_oa
      << "\n";
}

}  // namespace melgraph
