#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <random>

#include "melgraph/features.hpp"

using namespace melgraph;

namespace {

constexpr double kPi = 3.14159265358979323846;

AudioSegment tone_segment(double hz, double seconds = 5.0, int rate = 16000) {
  AudioSegment seg;
  seg.sample_rate = rate;
  std::int64_t n = static_cast<std::int64_t>(seconds * rate);
  seg.samples.resize(n);
  for (std::int64_t i = 0; i < n; ++i) seg.samples[i] = 0.5 * std::sin(2.0 * kPi * hz * i / rate);
  return seg;
}

MelSpectrogram random_spec(int t, int f, unsigned seed) {
  MelSpectrogram s;
  s.values.resize(t, f);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(-5.0, 1.0);
  for (int r = 0; r < t; ++r)
    for (int c = 0; c < f; ++c) s.values(r, c) = dist(rng);
  return s;
}

}  // namespace

TEST_CASE("preemphasis examples") {
  auto y = preemphasis({1.0, 1.0, 1.0}, 0.97);
  CHECK(y[0] == doctest::Approx(1.0));
  CHECK(y[1] == doctest::Approx(0.03));
  CHECK(y[2] == doctest::Approx(0.03));

  auto same = preemphasis({0.3, -0.2, 0.9}, 0.0);
  CHECK(same[0] == doctest::Approx(0.3));
  CHECK(same[1] == doctest::Approx(-0.2));
  CHECK(same[2] == doctest::Approx(0.9));

  auto imp = preemphasis({1.0, 0.0, 0.0}, 0.97);
  CHECK(imp[0] == doctest::Approx(1.0));
  CHECK(imp[1] == doctest::Approx(-0.97));
  CHECK(imp[2] == doctest::Approx(0.0));
}

TEST_CASE("frame_and_window frame count and content") {
  std::vector<double> x(80000, 1.0);
  auto frames = frame_and_window(x, 400, 160);
  CHECK(frames.rows() == 498);  // 1 + floor((80000-400)/160)
  // constant input: every frame equals the periodic Hann window
  for (int n = 0; n < 400; ++n) {
    double w = 0.5 * (1.0 - std::cos(2.0 * kPi * n / 400));
    CHECK(frames(0, n) == doctest::Approx(w));
    CHECK(frames(497, n) == doctest::Approx(w));
  }

  std::vector<double> exact(400, 0.5);
  CHECK(frame_and_window(exact, 400, 160).rows() == 1);
  std::vector<double> tooshort(399, 0.5);
  CHECK_THROWS(frame_and_window(tooshort, 400, 160));
}

TEST_CASE("power_spectrum zero, impulse, and Parseval") {
  Eigen::MatrixXd frames = Eigen::MatrixXd::Zero(2, 400);
  frames(1, 0) = 1.0;  // unit impulse in the second frame
  auto power = power_spectrum(frames, 512);
  REQUIRE(power.cols() == 257);
  for (int k = 0; k < 257; ++k) {
    CHECK(power(0, k) == 0.0);
    CHECK(power(1, k) == doctest::Approx(1.0));
  }

  // Parseval with symmetry weights: |X0|^2 + |X256|^2 + 2 sum_{1..255}|Xk|^2
  // equals 512 * sum |x|^2
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  Eigen::MatrixXd rand_frame(1, 400);
  for (int n = 0; n < 400; ++n) rand_frame(0, n) = dist(rng);
  auto p = power_spectrum(rand_frame, 512);
  double freq_energy = p(0, 0) + p(0, 256);
  for (int k = 1; k < 256; ++k) freq_energy += 2.0 * p(0, k);
  double time_energy = 512.0 * rand_frame.row(0).squaredNorm();
  CHECK(freq_energy == doctest::Approx(time_energy).epsilon(1e-9));
}

TEST_CASE("mel filterbank satisfies the triangular form") {
  auto fb = build_mel_filterbank(128, 512, 16000);
  REQUIRE(fb.bin_points.size() == 130);
  for (int m = 1; m <= 128; ++m) {
    int lo = fb.bin_points[m - 1], center = fb.bin_points[m], hi = fb.bin_points[m + 1];
    CHECK(fb.weights(m - 1, center) == doctest::Approx(1.0));  // unit peak
    for (int k = 0; k < 257; ++k) {
      double w = fb.weights(m - 1, k);
      if (k < lo || k >= hi) {
        CHECK(w == 0.0);
      } else if (k < center) {
        CHECK(w == doctest::Approx(static_cast<double>(k - lo) / (center - lo)));
      } else {
        CHECK(w == doctest::Approx(static_cast<double>(hi - k) / (hi - center)));
      }
      CHECK(w >= 0.0);
    }
  }
}

TEST_CASE("mel filterbank centers are mel-spaced within bin quantization") {
  auto fb = build_mel_filterbank(128, 512, 16000);
  const double ideal = hz_to_mel(8000.0) / 129.0;
  for (int m = 0; m < 129; ++m) {
    double hz_a = fb.bin_points[m] * 16000.0 / 513.0;
    double hz_b = fb.bin_points[m + 1] * 16000.0 / 513.0;
    double spacing = hz_to_mel(hz_b) - hz_to_mel(hz_a);
    // one-bin mel widths at both ends bound the quantization error
    double slack = (hz_to_mel(hz_a + 16000.0 / 513.0) - hz_to_mel(hz_a)) +
                   (hz_to_mel(hz_b + 16000.0 / 513.0) - hz_to_mel(hz_b));
    CHECK(std::fabs(spacing - ideal) <= slack + 1e-9);
  }
  for (std::size_t i = 1; i < fb.bin_points.size(); ++i)
    CHECK(fb.bin_points[i] > fb.bin_points[i - 1]);
  CHECK_THROWS(build_mel_filterbank(300, 512, 16000));
}

TEST_CASE("log_mel floor, log-linearity, and tone localization") {
  auto fb = build_mel_filterbank(128, 512, 16000);
  Eigen::MatrixXd zero = Eigen::MatrixXd::Zero(3, 257);
  auto spec = log_mel(zero, fb);
  for (int t = 0; t < 3; ++t)
    for (int m = 0; m < 128; ++m) CHECK(spec.values(t, m) == doctest::Approx(std::log(1e-10)));

  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> dist(0.1, 2.0);
  Eigen::MatrixXd power(2, 257);
  for (int t = 0; t < 2; ++t)
    for (int k = 0; k < 257; ++k) power(t, k) = dist(rng);
  auto a = log_mel(power, fb);
  auto b = log_mel(2.0 * power, fb);
  for (int t = 0; t < 2; ++t)
    for (int m = 0; m < 128; ++m)
      CHECK(b.values(t, m) - a.values(t, m) == doctest::Approx(std::log(2.0)).epsilon(1e-9));

  // pure 1 kHz tone: argmax mel band has the center nearest 1 kHz
  auto seg = tone_segment(1000.0);
  auto emph = preemphasis(seg.samples);
  auto frames = frame_and_window(emph);
  auto p = power_spectrum(frames);
  auto mel = log_mel(p, fb);
  int argmax = 0;
  for (int m = 1; m < 128; ++m)
    if (mel.values(100, m) > mel.values(100, argmax)) argmax = m;
  int nearest = 0;
  double best = 1e18;
  for (int m = 1; m <= 128; ++m) {
    double center_hz = fb.bin_points[m] * 16000.0 / 513.0;
    if (std::fabs(center_hz - 1000.0) < best) {
      best = std::fabs(center_hz - 1000.0);
      nearest = m - 1;
    }
  }
  CHECK(argmax == nearest);
}

TEST_CASE("log_mel is monotone in the power bins") {
  auto fb = build_mel_filterbank(128, 512, 16000);
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> dist(0.0, 1.0);
  Eigen::MatrixXd power(1, 257);
  for (int k = 0; k < 257; ++k) power(0, k) = dist(rng);
  auto before = log_mel(power, fb);
  power(0, 40) += 3.0;
  auto after = log_mel(power, fb);
  for (int m = 0; m < 128; ++m) CHECK(after.values(0, m) >= before.values(0, m) - 1e-12);
}

TEST_CASE("pad_time") {
  MelSpectrogram spec = random_spec(498, 128, 3);
  auto padded = pad_time(spec, 512);
  REQUIRE(padded.values.rows() == 512);
  for (int t = 498; t < 512; ++t)
    for (int m = 0; m < 128; ++m) CHECK(padded.values(t, m) == doctest::Approx(std::log(1e-10)));
  for (int t = 0; t < 498; ++t)
    for (int m = 0; m < 128; ++m) CHECK(padded.values(t, m) == spec.values(t, m));

  auto full = random_spec(512, 128, 4);
  auto same = pad_time(full, 512);
  CHECK(same.values == full.values);

  auto too_long = random_spec(513, 128, 5);
  CHECK_THROWS(pad_time(too_long, 512));
}

TEST_CASE("normalize") {
  MelSpectrogram spec = random_spec(64, 32, 9);
  FeatureStats stats{2.5, 1.0};
  spec.values.setConstant(2.5);
  auto zeroed = normalize(spec, stats);
  CHECK(zeroed.values.cwiseAbs().maxCoeff() == doctest::Approx(0.0));

  MelSpectrogram r = random_spec(64, 32, 10);
  auto own = compute_stats({r});
  auto n = normalize(r, own);
  CHECK(std::fabs(n.values.mean()) < 1e-9);
  double var = n.values.array().square().mean() - n.values.mean() * n.values.mean();
  CHECK(var == doctest::Approx(1.0).epsilon(1e-6));

  FeatureStats bad{0.0, 0.0};
  CHECK_THROWS(normalize(r, bad));
}

TEST_CASE("spec_augment determinism, identity, and masked-cell accounting") {
  MelSpectrogram spec = random_spec(512, 128, 13);

  // zero mask budgets force identity
  std::mt19937_64 rng0(0);
  auto same = spec_augment(spec, 0, 0, rng0);
  CHECK(same.values == spec.values);

  std::mt19937_64 rng1(42), rng2(42);
  auto a = spec_augment(spec, 24, 96, rng1);
  auto b = spec_augment(spec, 24, 96, rng2);
  CHECK(a.values == b.values);

  // replicate the draws to recover widths and positions
  std::mt19937_64 probe(42);
  int f_width = std::uniform_int_distribution<int>(0, 24)(probe);
  int f0 = std::uniform_int_distribution<int>(0, 128 - f_width)(probe);
  int t_width = std::uniform_int_distribution<int>(0, 96)(probe);
  int t0 = std::uniform_int_distribution<int>(0, 512 - t_width)(probe);

  std::int64_t changed = 0;
  for (int t = 0; t < 512; ++t)
    for (int f = 0; f < 128; ++f) {
      bool in_f = f >= f0 && f < f0 + f_width;
      bool in_t = t >= t0 && t < t0 + t_width;
      if (a.values(t, f) != spec.values(t, f)) {
        ++changed;
        CHECK((in_f || in_t));  // never altered outside the two bands
      }
    }
  CHECK(changed == static_cast<std::int64_t>(f_width) * 512 + static_cast<std::int64_t>(t_width) * 128 -
                       static_cast<std::int64_t>(f_width) * t_width);
}

TEST_CASE("mfcc dct properties") {
  MelSpectrogram spec = random_spec(4, 128, 17);
  spec.values.row(0).setConstant(0.7);
  auto coeffs = mfcc(spec, 20);
  REQUIRE(coeffs.rows() == 4);
  REQUIRE(coeffs.cols() == 20);
  CHECK(coeffs(0, 0) == doctest::Approx(0.7 * std::sqrt(128.0)));
  for (int k = 1; k < 20; ++k) CHECK(std::fabs(coeffs(0, k)) < 1e-9);

  // full DCT is orthonormal: inverse transform reproduces the row
  auto full = mfcc(spec, 128);
  Eigen::MatrixXd dct(128, 128);
  for (int k = 0; k < 128; ++k) {
    double s = k == 0 ? std::sqrt(1.0 / 128.0) : std::sqrt(2.0 / 128.0);
    for (int n = 0; n < 128; ++n) dct(k, n) = s * std::cos(kPi * (2 * n + 1) * k / 256.0);
  }
  Eigen::MatrixXd back = full * dct;  // inverse of an orthonormal transform
  for (int n = 0; n < 128; ++n) CHECK(back(1, n) == doctest::Approx(spec.values(1, n)).epsilon(1e-9));

  CHECK_THROWS(mfcc(spec, 129));
}

TEST_CASE("full pipeline shape contract and stft variant") {
  auto seg = tone_segment(440.0);
  auto spec = featurize(seg);
  CHECK(spec.values.rows() == 512);
  CHECK(spec.values.cols() == 128);
  CHECK(spec.values.allFinite());

  auto stft = stft_feature(seg);
  CHECK(stft.rows() == 512);
  CHECK(stft.cols() == 257);
}

TEST_CASE("feature cache file roundtrip") {
  auto path = (std::filesystem::temp_directory_path() / "feat_test.melf").string();
  MelSpectrogram spec = random_spec(16, 8, 21);
  write_feature_file(path, spec.values);
  auto grid = read_feature_file(path);
  REQUIRE(grid.rows() == 16);
  REQUIRE(grid.cols() == 8);
  for (int r = 0; r < 16; ++r)
    for (int c = 0; c < 8; ++c)
      CHECK(grid(r, c) == doctest::Approx(static_cast<float>(spec.values(r, c))));
}
