#include "melgraph/evaluation.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>

#include "melgraph/stats.hpp"

namespace melgraph {

std::int64_t ConfusionMatrix::total() const {
  std::int64_t s = 0;
  for (auto c : counts) s += c;
  return s;
}

std::int64_t ConfusionMatrix::trace() const {
  std::int64_t s = 0;
  for (int i = 0; i < n_classes; ++i) s += at(i, i);
  return s;
}

ConfusionMatrix confusion(const std::vector<int>& y_true, const std::vector<int>& y_pred,
                          int n_classes) {
  if (y_true.size() != y_pred.size())
    throw std::invalid_argument("confusion: label vectors differ in length");
  ConfusionMatrix cm;
  cm.n_classes = n_classes;
  cm.counts.assign(static_cast<std::size_t>(n_classes) * n_classes, 0);
  for (std::size_t i = 0; i < y_true.size(); ++i) {
    int t = y_true[i], p = y_pred[i];
    if (t < 0 || t >= n_classes || p < 0 || p >= n_classes)
      throw std::invalid_argument("confusion: label out of range");
    ++cm.at(t, p);
  }
  return cm;
}

double oa(const ConfusionMatrix& cm) {
  std::int64_t total = cm.total();
  if (total == 0) throw std::invalid_argument("oa: empty confusion matrix");
  return static_cast<double>(cm.trace()) / static_cast<double>(total);
}

double aa(const ConfusionMatrix& cm) {
  double sum = 0.0;
  int used = 0;
  for (int i = 0; i < cm.n_classes; ++i) {
    std::int64_t row = 0;
    for (int j = 0; j < cm.n_classes; ++j) row += cm.at(i, j);
    if (row == 0) continue;  // class absent from y_true
    sum += static_cast<double>(cm.at(i, i)) / static_cast<double>(row);
    ++used;
  }
  if (used == 0) throw std::invalid_argument("aa: empty confusion matrix");
  return sum / used;
}

double aa_literal(const ConfusionMatrix& cm) {
  std::int64_t total = cm.total();
  if (total == 0) throw std::invalid_argument("aa_literal: empty confusion matrix");
  double sum = 0.0;
  for (int i = 0; i < cm.n_classes; ++i) {
    std::int64_t tp = cm.at(i, i);
    std::int64_t row = 0, col = 0;
    for (int j = 0; j < cm.n_classes; ++j) {
      row += cm.at(i, j);
      col += cm.at(j, i);
    }
    std::int64_t fn = row - tp;
    std::int64_t fp = col - tp;
    std::int64_t tn = total - tp - fn - fp;
    sum += static_cast<double>(tp + tn) / static_cast<double>(total);
  }
  return sum / cm.n_classes;
}

double kappa(const ConfusionMatrix& cm) {
  std::int64_t total = cm.total();
  if (total == 0) throw std::invalid_argument("kappa: empty confusion matrix");
  double p0 = oa(cm);
  double pe = 0.0;
  for (int i = 0; i < cm.n_classes; ++i) {
    std::int64_t row = 0, col = 0;
    for (int j = 0; j < cm.n_classes; ++j) {
      row += cm.at(i, j);
      col += cm.at(j, i);
    }
    pe += static_cast<double>(row) * static_cast<double>(col);
  }
  pe /= static_cast<double>(total) * static_cast<double>(total);
  if (pe >= 1.0) return 0.0;  // single-class degenerate
  return (p0 - pe) / (1.0 - pe);
}

double f1(const ConfusionMatrix& cm) {
  double sum = 0.0;
  int used = 0;
  for (int i = 0; i < cm.n_classes; ++i) {
    std::int64_t tp = cm.at(i, i);
    std::int64_t row = 0, col = 0;
    for (int j = 0; j < cm.n_classes; ++j) {
      row += cm.at(i, j);
      col += cm.at(j, i);
    }
    std::int64_t fn = row - tp;
    std::int64_t fp = col - tp;
    if (2 * tp + fp + fn == 0) continue;
    sum += 2.0 * static_cast<double>(tp) / static_cast<double>(2 * tp + fp + fn);
    ++used;
  }
  if (used == 0) throw std::invalid_argument("f1: empty confusion matrix");
  return sum / used;
}

MetricsReport metrics_report(const ConfusionMatrix& cm) {
  MetricsReport r;
  r.n_samples = cm.total();
  r.oa = oa(cm);
  r.aa = aa(cm);
  r.kappa = kappa(cm);
  r.f1 = f1(cm);
  double pe = 0.0;
  for (int i = 0; i < cm.n_classes; ++i) {
    std::int64_t tp = cm.at(i, i);
    std::int64_t row = 0, col = 0;
    for (int j = 0; j < cm.n_classes; ++j) {
      row += cm.at(i, j);
      col += cm.at(j, i);
    }
    if (row == 0) r.warning_empty_class = true;
    PerClassMetrics m;
    m.recall = row > 0 ? static_cast<double>(tp) / static_cast<double>(row) : 0.0;
    m.precision = col > 0 ? static_cast<double>(tp) / static_cast<double>(col) : 0.0;
    m.f1 = 2 * tp + (row - tp) + (col - tp) > 0
               ? 2.0 * static_cast<double>(tp) / static_cast<double>(row + col)
               : 0.0;
    r.per_class.push_back(m);
    pe += static_cast<double>(row) * static_cast<double>(col);
  }
  pe /= static_cast<double>(r.n_samples) * static_cast<double>(r.n_samples);
  r.warning_degenerate_pe = pe >= 1.0;
  return r;
}

TTestResult paired_t_test(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size() || a.size() < 2)
    throw std::invalid_argument("paired_t_test: need equal lengths >= 2");
  const std::size_t n = a.size();
  std::vector<double> d(n);
  for (std::size_t i = 0; i < n; ++i) d[i] = a[i] - b[i];
  double mean = 0.0;
  for (double v : d) mean += v;
  mean /= static_cast<double>(n);
  double ss = 0.0;
  for (double v : d) ss += (v - mean) * (v - mean);
  TTestResult r;
  r.dof = static_cast<int>(n) - 1;
  if (ss == 0.0) {
    r.degenerate = true;
    return r;
  }
  double sd = std::sqrt(ss / static_cast<double>(n - 1));
  r.t = mean / (sd / std::sqrt(static_cast<double>(n)));
  r.p = 2.0 * (1.0 - student_t_cdf(std::fabs(r.t), static_cast<double>(r.dof)));
  return r;
}

void write_metrics_json(const std::string& path, const MetricsReport& report,
                        const std::string& config_hash, std::uint64_t seed) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write metrics file: " + path);
  f << std::setprecision(17);
  f << "{\n";
  f << "  \"oa\": " << report.oa << ",\n";
  f << "  \"aa\": " << report.aa << ",\n";
  f << "  \"kappa\": " << report.kappa << ",\n";
  f << "  \"f1\": " << report.f1 << ",\n";
  f << "  \"per_class\": [\n";
  for (std::size_t i = 0; i < report.per_class.size(); ++i) {
    const auto& m = report.per_class[i];
    f << "    {\"precision\": " << m.precision << ", \"recall\": " << m.recall
      << ", \"f1\": " << m.f1 << "}" << (i + 1 < report.per_class.size() ? "," : "") << "\n";
  }
  f << "  ],\n";
  f << "  \"n\": " << report.n_samples << ",\n";
  f << "  \"config_hash\": \"" << config_hash << "\",\n";
  f << "  \"seed\": " << seed << "\n";
  f << "}\n";
}

}  // namespace melgraph
