#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace melgraph {

struct ConfusionMatrix {
  int n_classes = 0;
  std::vector<std::int64_t> counts;  // [true][pred], row-major

  std::int64_t& at(int t, int p) { return counts[static_cast<std::size_t>(t * n_classes + p)]; }
  std::int64_t at(int t, int p) const {
    return counts[static_cast<std::size_t>(t * n_classes + p)];
  }
  std::int64_t total() const;
  std::int64_t trace() const;
};

struct PerClassMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

struct MetricsReport {
  double oa = 0.0;
  double aa = 0.0;
  double kappa = 0.0;
  double f1 = 0.0;
  std::vector<PerClassMetrics> per_class;
  std::int64_t n_samples = 0;
  bool warning_empty_class = false;   // some class absent from y_true
  bool warning_degenerate_pe = false;  // kappa chance agreement == 1
};

struct TTestResult {
  double t = 0.0;
  double p = 1.0;
  int dof = 0;
  bool degenerate = false;  // zero-variance differences
};

ConfusionMatrix confusion(const std::vector<int>& y_true, const std::vector<int>& y_pred,
                          int n_classes);

// overall accuracy: trace / total
double oa(const ConfusionMatrix& cm);

// macro-averaged per-class recall; classes absent from y_true are excluded
double aa(const ConfusionMatrix& cm);

// literal reading of the printed average-accuracy formula (one-vs-rest
// binary accuracies, mean over classes); kept for audit only
double aa_literal(const ConfusionMatrix& cm);

// Cohen's kappa: (P0 - Pe) / (1 - Pe); defined as 0 when Pe == 1
double kappa(const ConfusionMatrix& cm);

// macro-averaged F1 with 2TP/(2TP+FP+FN) per class; undefined classes excluded
double f1(const ConfusionMatrix& cm);

MetricsReport metrics_report(const ConfusionMatrix& cm);

// Paired-sample two-sided t-test on differences a - b, dof = n - 1.
TTestResult paired_t_test(const std::vector<double>& a, const std::vector<double>& b);

// JSON metrics file with keys oa, aa, kappa, f1, per_class, n, config_hash, seed.
void write_metrics_json(const std::string& path, const MetricsReport& report,
                        const std::string& config_hash, std::uint64_t seed);

}  // namespace melgraph
