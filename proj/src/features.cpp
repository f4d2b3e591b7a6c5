#include "melgraph/features.hpp"

#include <unsupported/Eigen/FFT>

#include <cmath>
#include <complex>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace melgraph {

namespace {
constexpr double kPi = 3.14159265358979323846;
}

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }

double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

std::vector<double> preemphasis(const std::vector<double>& x, double alpha) {
  if (x.empty()) throw std::invalid_argument("preemphasis: empty input");
  std::vector<double> y(x.size());
  y[0] = x[0];
  for (std::size_t n = 1; n < x.size(); ++n) y[n] = x[n] - alpha * x[n - 1];
  return y;
}

Eigen::MatrixXd frame_and_window(const std::vector<double>& y, int frame, int hop) {
  const std::int64_t len = static_cast<std::int64_t>(y.size());
  if (len < frame) throw std::invalid_argument("frame_and_window: signal shorter than one frame");
  const std::int64_t n_frames = 1 + (len - frame) / hop;

  std::vector<double> window(static_cast<std::size_t>(frame));
  for (int n = 0; n < frame; ++n)
    window[static_cast<std::size_t>(n)] = 0.5 * (1.0 - std::cos(2.0 * kPi * n / frame));

  Eigen::MatrixXd frames(n_frames, frame);
  for (std::int64_t t = 0; t < n_frames; ++t)
    for (int n = 0; n < frame; ++n)
      frames(t, n) = y[static_cast<std::size_t>(t * hop + n)] * window[static_cast<std::size_t>(n)];
  return frames;
}

Eigen::MatrixXd power_spectrum(const Eigen::MatrixXd& frames, int n_fft) {
  const std::int64_t n_frames = frames.rows();
  const int frame = static_cast<int>(frames.cols());
  if (frame > n_fft) throw std::invalid_argument("power_spectrum: frame longer than n_fft");
  const int bins = n_fft / 2 + 1;

  Eigen::FFT<double> fft;
  std::vector<double> buf(static_cast<std::size_t>(n_fft));
  std::vector<std::complex<double>> spec(static_cast<std::size_t>(n_fft));
  Eigen::MatrixXd power(n_frames, bins);
  for (std::int64_t t = 0; t < n_frames; ++t) {
    std::fill(buf.begin(), buf.end(), 0.0);
    for (int n = 0; n < frame; ++n) buf[static_cast<std::size_t>(n)] = frames(t, n);
    fft.fwd(spec, buf);
    for (int k = 0; k < bins; ++k) power(t, k) = std::norm(spec[static_cast<std::size_t>(k)]);
  }
  return power;
}

MelFilterbank build_mel_filterbank(int n_mels, int n_fft, int sample_rate) {
  if (n_mels < 1) throw std::invalid_argument("build_mel_filterbank: n_mels must be >= 1");
  const int bins = n_fft / 2 + 1;
  const double mel_max = hz_to_mel(sample_rate / 2.0);

  // equally mel-spaced points mapped to FFT bins; where the mel spacing is
  // finer than one bin, consecutive points are pushed up to keep the centers
  // strictly increasing so every triangle keeps its unit peak
  std::vector<int> pts(static_cast<std::size_t>(n_mels) + 2);
  for (int i = 0; i < n_mels + 2; ++i) {
    double hz = mel_to_hz(mel_max * i / (n_mels + 1));
    pts[static_cast<std::size_t>(i)] =
        static_cast<int>(std::floor((n_fft + 1) * hz / sample_rate));
  }
  for (int i = 1; i < n_mels + 2; ++i)
    pts[static_cast<std::size_t>(i)] =
        std::max(pts[static_cast<std::size_t>(i)], pts[static_cast<std::size_t>(i - 1)] + 1);
  if (pts.back() >= bins)
    throw std::invalid_argument("build_mel_filterbank: n_mels too large for n_fft (adjacent centers collide)");

  MelFilterbank fb;
  fb.n_fft = n_fft;
  fb.sample_rate = sample_rate;
  fb.bin_points = pts;
  fb.weights = Eigen::MatrixXd::Zero(n_mels, bins);
  for (int m = 1; m <= n_mels; ++m) {
    int lo = pts[static_cast<std::size_t>(m - 1)];
    int center = pts[static_cast<std::size_t>(m)];
    int hi = pts[static_cast<std::size_t>(m + 1)];
    for (int k = lo; k < center; ++k)
      fb.weights(m - 1, k) = static_cast<double>(k - lo) / (center - lo);
    for (int k = center; k < hi; ++k)
      fb.weights(m - 1, k) = static_cast<double>(hi - k) / (hi - center);
  }
  return fb;
}

MelSpectrogram log_mel(const Eigen::MatrixXd& power, const MelFilterbank& fb) {
  if (power.cols() != fb.weights.cols())
    throw std::invalid_argument("log_mel: grid width does not match filterbank");
  MelSpectrogram spec;
  spec.n_mels = static_cast<int>(fb.weights.rows());
  spec.values = (power * fb.weights.transpose()).cwiseMax(kLogFloor).array().log().matrix();
  return spec;
}

MelSpectrogram pad_time(const MelSpectrogram& spec, int target) {
  if (spec.values.rows() > target)
    throw std::invalid_argument("pad_time: spectrogram longer than target");
  MelSpectrogram out = spec;
  const std::int64_t rows = spec.values.rows();
  out.values.conservativeResize(target, Eigen::NoChange);
  out.values.bottomRows(target - rows).setConstant(std::log(kLogFloor));
  return out;
}

FeatureStats compute_stats(const std::vector<MelSpectrogram>& specs) {
  if (specs.empty()) throw std::invalid_argument("compute_stats: no spectrograms");
  double sum = 0.0, sum_sq = 0.0;
  std::int64_t n = 0;
  for (const auto& s : specs) {
    sum += s.values.sum();
    sum_sq += s.values.array().square().sum();
    n += s.values.size();
  }
  FeatureStats stats;
  stats.mean = sum / static_cast<double>(n);
  double var = sum_sq / static_cast<double>(n) - stats.mean * stats.mean;
  stats.stddev = std::sqrt(std::max(var, 0.0));
  if (stats.stddev <= 0.0) throw std::runtime_error("compute_stats: zero variance");
  return stats;
}

MelSpectrogram normalize(const MelSpectrogram& spec, const FeatureStats& stats) {
  if (stats.stddev == 0.0) throw std::invalid_argument("normalize: std must be > 0");
  MelSpectrogram out = spec;
  out.values = (spec.values.array() - stats.mean) / stats.stddev;
  return out;
}

MelSpectrogram spec_augment(const MelSpectrogram& spec, int f_mask, int t_mask,
                            std::mt19937_64& rng) {
  const int T = static_cast<int>(spec.values.rows());
  const int F = static_cast<int>(spec.values.cols());
  MelSpectrogram out = spec;
  const double fill = spec.values.mean();

  std::uniform_int_distribution<int> f_width_dist(0, std::min(f_mask, F));
  const int f_width = f_width_dist(rng);
  std::uniform_int_distribution<int> f_pos_dist(0, F - f_width);
  const int f0 = f_pos_dist(rng);

  std::uniform_int_distribution<int> t_width_dist(0, std::min(t_mask, T));
  const int t_width = t_width_dist(rng);
  std::uniform_int_distribution<int> t_pos_dist(0, T - t_width);
  const int t0 = t_pos_dist(rng);

  if (f_width > 0) out.values.middleCols(f0, f_width).setConstant(fill);
  if (t_width > 0) out.values.middleRows(t0, t_width).setConstant(fill);
  return out;
}

Eigen::MatrixXd mfcc(const MelSpectrogram& spec, int n_coeff) {
  const int N = static_cast<int>(spec.values.cols());
  if (n_coeff > N) throw std::invalid_argument("mfcc: n_coeff exceeds mel band count");
  Eigen::MatrixXd dct(n_coeff, N);
  for (int k = 0; k < n_coeff; ++k) {
    double s = k == 0 ? std::sqrt(1.0 / N) : std::sqrt(2.0 / N);
    for (int n = 0; n < N; ++n) dct(k, n) = s * std::cos(kPi * (2 * n + 1) * k / (2.0 * N));
  }
  return spec.values * dct.transpose();
}

MelSpectrogram featurize(const AudioSegment& seg, const FeatureParams& params) {
  auto emphasized = preemphasis(seg.samples, params.preemphasis);
  auto frames = frame_and_window(emphasized, params.frame_length, params.hop);
  auto power = power_spectrum(frames, params.n_fft);
  static thread_local MelFilterbank fb;  // rebuilt only when the config changes
  if (fb.weights.rows() != params.n_mels || fb.n_fft != params.n_fft ||
      fb.sample_rate != params.sample_rate)
    fb = build_mel_filterbank(params.n_mels, params.n_fft, params.sample_rate);
  auto spec = log_mel(power, fb);
  spec.frame_length = params.frame_length;
  spec.hop = params.hop;
  return pad_time(spec, params.target_frames);
}

Eigen::MatrixXd stft_feature(const AudioSegment& seg, const FeatureParams& params) {
  auto emphasized = preemphasis(seg.samples, params.preemphasis);
  auto frames = frame_and_window(emphasized, params.frame_length, params.hop);
  Eigen::MatrixXd power = power_spectrum(frames, params.n_fft);
  Eigen::MatrixXd logp = power.cwiseMax(kLogFloor).array().log().matrix();
  const std::int64_t rows = logp.rows();
  if (rows > params.target_frames)
    throw std::invalid_argument("stft_feature: spectrogram longer than target");
  logp.conservativeResize(params.target_frames, Eigen::NoChange);
  logp.bottomRows(params.target_frames - rows).setConstant(std::log(kLogFloor));
  return logp;
}

void write_feature_file(const std::string& path, const Eigen::MatrixXd& grid) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write feature file: " + path);
  f.write("MELF", 4);
  std::uint16_t version = 1;
  f.write(reinterpret_cast<const char*>(&version), 2);
  std::uint32_t dims[2] = {static_cast<std::uint32_t>(grid.rows()),
                           static_cast<std::uint32_t>(grid.cols())};
  f.write(reinterpret_cast<const char*>(dims), 8);
  std::uint8_t dtype = 0;  // f32
  f.write(reinterpret_cast<const char*>(&dtype), 1);
  for (std::int64_t r = 0; r < grid.rows(); ++r)
    for (std::int64_t c = 0; c < grid.cols(); ++c) {
      float v = static_cast<float>(grid(r, c));
      f.write(reinterpret_cast<const char*>(&v), 4);
    }
  if (!f) throw std::runtime_error("write failed: " + path);
}

Eigen::MatrixXd read_feature_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open feature file: " + path);
  char magic[4];
  f.read(magic, 4);
  if (!f || std::memcmp(magic, "MELF", 4) != 0)
    throw std::runtime_error("not a feature file: " + path);
  std::uint16_t version = 0;
  f.read(reinterpret_cast<char*>(&version), 2);
  if (version != 1) throw std::runtime_error("unsupported feature file version: " + path);
  std::uint32_t dims[2];
  f.read(reinterpret_cast<char*>(dims), 8);
  std::uint8_t dtype = 0xff;
  f.read(reinterpret_cast<char*>(&dtype), 1);
  if (dtype != 0) throw std::runtime_error("unsupported feature dtype: " + path);
  Eigen::MatrixXd grid(dims[0], dims[1]);
  for (std::uint32_t r = 0; r < dims[0]; ++r)
    for (std::uint32_t c = 0; c < dims[1]; ++c) {
      float v;
      f.read(reinterpret_cast<char*>(&v), 4);
      grid(r, c) = v;
    }
  if (!f) throw std::runtime_error("truncated feature file: " + path);
  return grid;
}

}  // namespace melgraph
