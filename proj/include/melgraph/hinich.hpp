#pragma once

#include <complex>
#include <cstdint>
#include <string>
#include <vector>

#include "melgraph/audio_io.hpp"

namespace melgraph {

struct CumulantSet {
  double m[5] = {0, 0, 0, 0, 0};  // m[k] = mean(x^k), k = 1..4
  double c[5] = {0, 0, 0, 0, 0};  // cumulants via moment identities
  bool degenerate = false;        // c2 == 0 (constant input)
};

// Direct bispectrum estimate over the principal domain
// {(j,k): 1 <= k <= j, j + k <= record_len/2}.
struct BispectrumEstimate {
  int record_len = 128;
  int n_records = 0;
  std::vector<std::pair<int, int>> grid;     // (j, k) principal-domain points
  std::vector<std::complex<double>> values;  // averaged X(j) X(k) conj(X(j+k))
  std::vector<double> power;                 // averaged |X(f)|^2, f = 0..record_len/2
};

struct HinichResult {
  double pfa = 1.0;
  double statistic = 0.0;
  int dof = 0;
  double est_iqr = 0.0;
  double theo_iqr = 0.0;
  double iqr_ratio = 1.0;
  bool gaussian_h0_accepted = true;  // pfa >= 0.05
};

// Sample moments m_k = mean(x^k) and cumulants c_k up to order 4. Constant
// input is flagged degenerate (c2 == 0).
CumulantSet sample_cumulants(const std::vector<double>& x, int order = 4);

// Per record: demean, FFT, accumulate X(j) X(k) conj(X(j+k)); both the
// bispectrum and the power spectrum are averaged over records. Requires at
// least 8 full records; an all-zero signal is rejected as degenerate.
BispectrumEstimate estimate_bispectrum(const std::vector<double>& x, int record_len = 128,
                                       int overlap = 0);

// Gaussianity test: S = sum of 2*s(j,k) over the principal domain with
// s = n_records |B|^2 / (P(j) P(k) P(j+k)), halved on the diagonal j == k
// where the estimator variance doubles. Under H0, S ~ chi2(2P);
// pfa = 1 - CDF(S). H0 is accepted when pfa >= 0.05.
HinichResult gaussianity_pfa(const BispectrumEstimate& b);

// Linearity test: noncentrality lambda from the mean of the 2s values;
// theo_iqr is the IQR of noncentral chi2(2, lambda), est_iqr the sample IQR
// of the 2s values. The result reports both plus est/theo; thresholding is
// left to the caller.
HinichResult linearity_iqr(const BispectrumEstimate& b);

// Consecutive non-overlapping windows of `window_s` seconds, each tested for
// Gaussianity and linearity (fields of both tests merged per window).
std::vector<HinichResult> batch_test(const AudioBuffer& buf, double window_s = 0.5,
                                     int record_len = 128);

// CSV with columns window_index,pfa,statistic,dof,est_iqr,theo_iqr,
// gaussian_decision,linear_decision. The linear decision uses the given
// relative deviation band.
void write_hinich_csv(const std::string& path, const std::vector<HinichResult>& results,
                      double linear_band = 0.5);

}  // namespace melgraph
