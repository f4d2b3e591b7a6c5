#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "melgraph/audio_io.hpp"

namespace melgraph {

// natural-log floor applied before taking logs of band energies
constexpr double kLogFloor = 1e-10;

struct FeatureParams {
  int frame_length = 400;  // 25 ms at 16 kHz
  int hop = 160;           // 10 ms
  int n_fft = 512;
  int n_mels = 128;
  int sample_rate = 16000;
  int target_frames = 512;
  double preemphasis = 0.97;
};

// time x mel grid of natural-log band energies
struct MelSpectrogram {
  Eigen::MatrixXd values;  // [time][mel]
  int frame_length = 400;
  int hop = 160;
  int n_mels = 128;
};

struct MelFilterbank {
  Eigen::MatrixXd weights;      // [mel][n_fft/2 + 1]
  std::vector<int> bin_points;  // n_mels + 2 strictly increasing FFT bins;
                                // centers are bin_points[1..n_mels]
  int n_fft = 512;
  int sample_rate = 16000;
};

struct FeatureStats {
  double mean = 0.0;
  double stddev = 1.0;
};

double hz_to_mel(double hz);
double mel_to_hz(double mel);

std::vector<double> preemphasis(const std::vector<double>& x, double alpha = 0.97);

// Frames of length `frame` every `hop` samples, each multiplied by a periodic
// Hann window. Throws if the signal is shorter than one frame.
Eigen::MatrixXd frame_and_window(const std::vector<double>& y, int frame = 400, int hop = 160);

// |FFT(frame, n_fft)|^2 for the non-negative frequencies; frames are
// zero-padded up to n_fft.
Eigen::MatrixXd power_spectrum(const Eigen::MatrixXd& frames, int n_fft = 512);

MelFilterbank build_mel_filterbank(int n_mels = 128, int n_fft = 512, int sample_rate = 16000);

MelSpectrogram log_mel(const Eigen::MatrixXd& power, const MelFilterbank& fb);

// Appends rows holding ln(kLogFloor) until the time axis reaches `target`.
MelSpectrogram pad_time(const MelSpectrogram& spec, int target = 512);

FeatureStats compute_stats(const std::vector<MelSpectrogram>& specs);

MelSpectrogram normalize(const MelSpectrogram& spec, const FeatureStats& stats);

// One frequency band of width uniform[0, f_mask] and one time band of width
// uniform[0, t_mask], both filled with the spectrogram's mean value.
MelSpectrogram spec_augment(const MelSpectrogram& spec, int f_mask, int t_mask,
                            std::mt19937_64& rng);

// Orthonormal DCT-II over the mel axis, first n_coeff coefficients kept.
Eigen::MatrixXd mfcc(const MelSpectrogram& spec, int n_coeff = 20);

// Full pipeline: 5 s / 16 kHz segment -> (512, 128) unnormalized log-mel.
MelSpectrogram featurize(const AudioSegment& seg, const FeatureParams& params = {});

// log power spectrogram variant, time-padded identically: (512, n_fft/2+1)
Eigen::MatrixXd stft_feature(const AudioSegment& seg, const FeatureParams& params = {});

// Feature cache file: magic MELF, version u16, dims u32 x2, dtype tag u8,
// then row-major little-endian f32 values.
void write_feature_file(const std::string& path, const Eigen::MatrixXd& grid);
Eigen::MatrixXd read_feature_file(const std::string& path);

}  // namespace melgraph
