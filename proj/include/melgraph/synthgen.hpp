#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "melgraph/audio_io.hpp"

namespace melgraph {

struct ClassSpec {
  std::string name;
  std::vector<double> tonal_hz;
  std::vector<double> tonal_amp;
  double mod_rate_hz = 0.0;
  double mod_depth = 0.0;  // [0, 1]
  double ar_pole_radius = 0.0;
  double ar_pole_angle = 0.0;  // radians
  double snr_db = 10.0;        // tonal power over broadband power
};

// Tonals with seeded random phases plus AR(2)-filtered Gaussian broadband
// noise, amplitude-modulated by (1 + depth sin(2 pi rate t)) and peak-
// normalized. Deterministic per seed.
AudioSegment gen_sample(const ClassSpec& spec, double seconds, int sample_rate,
                        std::uint64_t seed);

// Four tonal/modulation/broadband signatures; values are arbitrary but fixed,
// chosen so classes separate at desk scale.
std::vector<ClassSpec> default_preset();

struct DatasetLayout {
  int n_train_per_class = 50;
  int n_val_per_class = 10;
  int n_test_per_class = 10;
  double seconds = 5.0;
  int sample_rate = 16000;
};

// Writes WAV files plus a manifest.csv with split assignments derived from
// per-class sample order (train, then val, then test). Returns the manifest
// path. Per-sample seeds are derived from the master seed.
std::string gen_dataset(const std::vector<ClassSpec>& specs, const DatasetLayout& layout,
                        std::uint64_t seed, const std::string& out_dir);

}  // namespace melgraph
