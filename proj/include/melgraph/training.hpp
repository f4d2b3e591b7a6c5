#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "melgraph/evaluation.hpp"
#include "melgraph/features.hpp"
#include "melgraph/model.hpp"

namespace melgraph {

struct TrainConfig {
  double lr0 = 1.5e-3;
  int decay_epoch = 90;
  double decay_factor = 0.5;
  int batch_size = 16;
  int epochs = 130;
  std::uint64_t seed = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  int augment_f_mask = 24;
  int augment_t_mask = 96;
  bool augment = true;

  void validate() const;
};

// piecewise-constant schedule with a single drop after decay_epoch
double lr_at(int epoch, const TrainConfig& cfg);

struct AdamState {
  std::vector<std::vector<float>> m;
  std::vector<std::vector<float>> v;
  std::int64_t step = 0;
};

AdamState make_adam_state(const ModelParams<float>& params);

// Standard bias-corrected Adam over all trainable parameters. Throws (and
// leaves parameters untouched) when any gradient is non-finite, naming the
// offending parameter.
void adam_step(ModelParams<float>& params, AdamState& state, double lr, const TrainConfig& cfg);

struct FeatureDataset {
  std::vector<MelSpectrogram> specs;  // unnormalized padded log-mel
  std::vector<int> labels;

  std::size_t size() const { return specs.size(); }
};

struct DatasetBundle {
  FeatureDataset train, val, test;
  FeatureStats stats;  // computed over the training split
  int n_classes = 0;
};

// Loads a manifest, resamples/segments every recording, splits by time when
// the manifest carries no split column, and featurizes everything.
DatasetBundle prepare_datasets(const std::string& manifest_path, const FeatureParams& fp = {});

struct EpochStats {
  double loss = 0.0;
  double train_oa = 0.0;
};

// One pass over shuffled mini-batches: SpecAugment (when enabled), normalize,
// forward in training mode, cross-entropy, backward, Adam.
EpochStats train_epoch(ModelParams<float>& params, const FeatureDataset& data,
                       const FeatureStats& stats, const TrainConfig& cfg, AdamState& adam,
                       double lr, std::mt19937_64& rng);

// Inference pass; never mutates parameters or batch-norm buffers.
ConfusionMatrix evaluate(const ModelParams<float>& params, const FeatureDataset& data,
                         const FeatureStats& stats, int batch_size = 16);

struct HistoryRow {
  int epoch = 0;
  double lr = 0.0;
  double train_loss = 0.0;
  double train_oa = 0.0;
  double val_oa = 0.0;
};

struct FitResult {
  std::vector<HistoryRow> history;
  ModelParams<float> best_params;
  int best_epoch = 0;
  double best_val_oa = 0.0;
};

// Full training loop; keeps the parameters of the epoch with the best
// validation overall accuracy.
FitResult fit(ModelParams<float> params, const DatasetBundle& data, const TrainConfig& cfg);

void write_history_csv(const std::string& path, const std::vector<HistoryRow>& history);

}  // namespace melgraph
