#include "melgraph/hinich.hpp"

#include <unsupported/Eigen/FFT>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include "melgraph/stats.hpp"
#include "melgraph/threading.hpp"

namespace melgraph {

CumulantSet sample_cumulants(const std::vector<double>& x, int order) {
  if (x.size() < 16) throw std::invalid_argument("sample_cumulants: need at least 16 samples");
  if (order < 2 || order > 4) throw std::invalid_argument("sample_cumulants: order must be 2..4");
  CumulantSet cs;
  const double n = static_cast<double>(x.size());
  for (double v : x) {
    double p = v;
    for (int k = 1; k <= order; ++k) {
      cs.m[k] += p;
      p *= v;
    }
  }
  for (int k = 1; k <= order; ++k) cs.m[k] /= n;

  const double m1 = cs.m[1], m2 = cs.m[2], m3 = cs.m[3], m4 = cs.m[4];
  cs.c[1] = m1;
  cs.c[2] = m2 - m1 * m1;
  if (order >= 3) cs.c[3] = m3 - 3.0 * m1 * m2 + 2.0 * m1 * m1 * m1;
  if (order >= 4)
    cs.c[4] = m4 - 4.0 * m1 * m3 - 3.0 * m2 * m2 + 12.0 * m1 * m1 * m2 - 6.0 * m1 * m1 * m1 * m1;
  cs.degenerate = cs.c[2] <= 0.0;
  return cs;
}

BispectrumEstimate estimate_bispectrum(const std::vector<double>& x, int record_len, int overlap) {
  if (overlap != 0) throw std::invalid_argument("estimate_bispectrum: only overlap 0 is supported");
  if (record_len < 8 || record_len % 2 != 0)
    throw std::invalid_argument("estimate_bispectrum: record_len must be even and >= 8");
  const int M = static_cast<int>(x.size()) / record_len;
  if (M < 8) throw std::invalid_argument("estimate_bispectrum: too few records (need >= 8)");
  bool all_zero = true;
  for (double v : x)
    if (v != 0.0) {
      all_zero = false;
      break;
    }
  if (all_zero) throw std::invalid_argument("estimate_bispectrum: degenerate input");

  const int half = record_len / 2;
  BispectrumEstimate est;
  est.record_len = record_len;
  est.n_records = M;
  for (int k = 1; k <= half; ++k)
    for (int j = k; j + k <= half; ++j) est.grid.emplace_back(j, k);
  est.values.assign(est.grid.size(), {0.0, 0.0});
  est.power.assign(static_cast<std::size_t>(half) + 1, 0.0);

  Eigen::FFT<double> fft;
  std::vector<double> seg(static_cast<std::size_t>(record_len));
  std::vector<std::complex<double>> spectrum(static_cast<std::size_t>(record_len));
  for (int r = 0; r < M; ++r) {
    double mean = 0.0;
    for (int i = 0; i < record_len; ++i) mean += x[static_cast<std::size_t>(r * record_len + i)];
    mean /= record_len;
    for (int i = 0; i < record_len; ++i)
      seg[static_cast<std::size_t>(i)] = x[static_cast<std::size_t>(r * record_len + i)] - mean;
    fft.fwd(spectrum, seg);
    for (int f = 0; f <= half; ++f)
      est.power[static_cast<std::size_t>(f)] += std::norm(spectrum[static_cast<std::size_t>(f)]);
    for (std::size_t g = 0; g < est.grid.size(); ++g) {
      auto [j, k] = est.grid[g];
      est.values[g] += spectrum[static_cast<std::size_t>(j)] *
                       spectrum[static_cast<std::size_t>(k)] *
                       std::conj(spectrum[static_cast<std::size_t>(j + k)]);
    }
  }
  for (auto& v : est.values) v /= static_cast<double>(M);
  for (auto& p : est.power) p /= static_cast<double>(M);
  return est;
}

namespace {

// 2*s(j,k) values; points with a zero power bin are skipped.
std::vector<double> scaled_bicoherence(const BispectrumEstimate& b) {
  std::vector<double> out;
  out.reserve(b.grid.size());
  for (std::size_t g = 0; g < b.grid.size(); ++g) {
    auto [j, k] = b.grid[g];
    double den = b.power[static_cast<std::size_t>(j)] * b.power[static_cast<std::size_t>(k)] *
                 b.power[static_cast<std::size_t>(j + k)];
    if (den <= 0.0) continue;
    double s = b.n_records * std::norm(b.values[g]) / den;
    if (j == k) s *= 0.5;  // |X(j)^2| has twice the variance of a cross term
    out.push_back(2.0 * s);
  }
  return out;
}

double sample_quantile(std::vector<double> v, double q) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  double pos = q * (static_cast<double>(v.size()) - 1.0);
  auto lo = static_cast<std::size_t>(pos);
  auto hi = std::min(lo + 1, v.size() - 1);
  double frac = pos - static_cast<double>(lo);
  return v[lo] * (1.0 - frac) + v[hi] * frac;
}

}  // namespace

HinichResult gaussianity_pfa(const BispectrumEstimate& b) {
  auto vals = scaled_bicoherence(b);
  HinichResult r;
  r.dof = 2 * static_cast<int>(vals.size());
  for (double v : vals) r.statistic += v;
  r.pfa = 1.0 - chi2_cdf(r.statistic, static_cast<double>(r.dof));
  r.gaussian_h0_accepted = r.pfa >= 0.05;
  return r;
}

HinichResult linearity_iqr(const BispectrumEstimate& b) {
  auto vals = scaled_bicoherence(b);
  if (vals.empty()) throw std::runtime_error("linearity_iqr: no usable grid points");
  double mean = 0.0;
  for (double v : vals) mean += v;
  mean /= static_cast<double>(vals.size());
  double lambda = std::max(0.0, mean - 2.0);

  HinichResult r;
  r.dof = 2 * static_cast<int>(vals.size());
  r.theo_iqr = noncentral_chi2_quantile(0.75, 2.0, lambda) -
               noncentral_chi2_quantile(0.25, 2.0, lambda);
  r.est_iqr = sample_quantile(vals, 0.75) - sample_quantile(vals, 0.25);
  r.iqr_ratio = r.est_iqr / r.theo_iqr;
  return r;
}

std::vector<HinichResult> batch_test(const AudioBuffer& buf, double window_s, int record_len) {
  const std::int64_t window =
      static_cast<std::int64_t>(std::llround(window_s * buf.sample_rate));
  if (window <= 0) throw std::invalid_argument("batch_test: window too small");
  const std::int64_t n_windows = static_cast<std::int64_t>(buf.samples.size()) / window;
  std::vector<HinichResult> results(static_cast<std::size_t>(n_windows));
  parallel_for(n_windows, [&](std::int64_t lo, std::int64_t hi) {
    for (std::int64_t w = lo; w < hi; ++w) {
      std::vector<double> chunk(buf.samples.begin() + w * window,
                                buf.samples.begin() + (w + 1) * window);
      auto est = estimate_bispectrum(chunk, record_len);
      HinichResult g = gaussianity_pfa(est);
      HinichResult l = linearity_iqr(est);
      g.est_iqr = l.est_iqr;
      g.theo_iqr = l.theo_iqr;
      g.iqr_ratio = l.iqr_ratio;
      results[static_cast<std::size_t>(w)] = g;
    }
  });
  return results;
}

void write_hinich_csv(const std::string& path, const std::vector<HinichResult>& results,
                      double linear_band) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write: " + path);
  f << "window_index,pfa,statistic,dof,est_iqr,theo_iqr,gaussian_decision,linear_decision\n";
  for (std::size_t i = 0; i < results.size(); ++i) {
    const auto& r = results[i];
    double dev = std::fabs(r.est_iqr - r.theo_iqr) / r.theo_iqr;
    f << i << "," << r.pfa << "," << r.statistic << "," << r.dof << "," << r.est_iqr << ","
      << r.theo_iqr << "," << (r.gaussian_h0_accepted ? "accept_H0" : "accept_H1") << ","
      << (dev < linear_band ? "linear" : "nonlinear") << "\n";
  }
}

}  // namespace melgraph
