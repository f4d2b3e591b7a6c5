#include "melgraph/synthgen.hpp"

#include <cmath>
#include <filesystem>
#include <random>
#include <stdexcept>

namespace melgraph {

namespace {

constexpr double kPi = 3.14159265358979323846;

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

AudioSegment gen_sample(const ClassSpec& spec, double seconds, int sample_rate,
                        std::uint64_t seed) {
  if (spec.mod_depth < 0.0 || spec.mod_depth > 1.0)
    throw std::invalid_argument("gen_sample: mod_depth must be in [0,1]");
  for (double f : spec.tonal_hz)
    if (f >= sample_rate / 2.0)
      throw std::invalid_argument("gen_sample: tonal frequency above Nyquist");
  if (spec.tonal_amp.size() != spec.tonal_hz.size())
    throw std::invalid_argument("gen_sample: tonal_amp size mismatch");

  const std::int64_t n = static_cast<std::int64_t>(std::llround(seconds * sample_rate));
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> phase_dist(0.0, 2.0 * kPi);
  std::normal_distribution<double> gauss(0.0, 1.0);

  std::vector<double> tonal(static_cast<std::size_t>(n), 0.0);
  double tonal_power = 0.0;
  for (std::size_t i = 0; i < spec.tonal_hz.size(); ++i) {
    double phi = phase_dist(rng);
    double w = 2.0 * kPi * spec.tonal_hz[i] / sample_rate;
    double a = spec.tonal_amp[i];
    for (std::int64_t t = 0; t < n; ++t)
      tonal[static_cast<std::size_t>(t)] += a * std::cos(w * t + phi);
    tonal_power += 0.5 * a * a;
  }

  // AR(2) shaped broadband: y[t] = g[t] + a1 y[t-1] + a2 y[t-2]
  std::vector<double> noise(static_cast<std::size_t>(n), 0.0);
  double a1 = 2.0 * spec.ar_pole_radius * std::cos(spec.ar_pole_angle);
  double a2 = -spec.ar_pole_radius * spec.ar_pole_radius;
  double y1 = 0.0, y2 = 0.0;
  for (std::int64_t t = 0; t < n; ++t) {
    double y = gauss(rng) + a1 * y1 + a2 * y2;
    noise[static_cast<std::size_t>(t)] = y;
    y2 = y1;
    y1 = y;
  }
  double noise_power = 0.0;
  for (double v : noise) noise_power += v * v;
  noise_power /= static_cast<double>(n);

  // scale broadband so tonal power over broadband power hits snr_db
  double noise_gain = 1.0;
  if (noise_power > 0.0 && tonal_power > 0.0)
    noise_gain = std::sqrt(tonal_power / (noise_power * std::pow(10.0, spec.snr_db / 10.0)));
  else if (tonal_power == 0.0 && noise_power > 0.0)
    noise_gain = 1.0 / std::sqrt(noise_power);

  AudioSegment seg;
  seg.sample_rate = sample_rate;
  seg.samples.resize(static_cast<std::size_t>(n));
  double peak = 0.0;
  for (std::int64_t t = 0; t < n; ++t) {
    double env = 1.0 + spec.mod_depth * std::sin(2.0 * kPi * spec.mod_rate_hz * t / sample_rate);
    double v = (tonal[static_cast<std::size_t>(t)] +
                noise_gain * noise[static_cast<std::size_t>(t)]) *
               env;
    seg.samples[static_cast<std::size_t>(t)] = v;
    peak = std::max(peak, std::fabs(v));
  }
  if (peak > 0.0) {
    double scale = 0.95 / peak;
    for (auto& v : seg.samples) v *= scale;
  }
  return seg;
}

std::vector<ClassSpec> default_preset() {
  std::vector<ClassSpec> specs(4);
  specs[0] = {"class_a", {60, 120, 180}, {1.0, 0.7, 0.5}, 4.0, 0.5, 0.85, 0.30, 10.0};
  specs[1] = {"class_b", {100, 300}, {1.0, 0.8}, 7.0, 0.6, 0.90, 0.90, 10.0};
  specs[2] = {"class_c", {250, 500, 750}, {1.0, 0.6, 0.4}, 10.0, 0.4, 0.80, 1.60, 10.0};
  specs[3] = {"class_d", {400}, {1.0}, 13.0, 0.7, 0.92, 2.30, 10.0};
  return specs;
}

std::string gen_dataset(const std::vector<ClassSpec>& specs, const DatasetLayout& layout,
                        std::uint64_t seed, const std::string& out_dir) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);
  const int per_class =
      layout.n_train_per_class + layout.n_val_per_class + layout.n_test_per_class;

  std::vector<ManifestEntry> entries;
  for (std::size_t c = 0; c < specs.size(); ++c) {
    for (int i = 0; i < per_class; ++i) {
      std::uint64_t sample_seed = splitmix64(seed ^ (static_cast<std::uint64_t>(c) << 32 ^
                                                     static_cast<std::uint64_t>(i)));
      AudioSegment seg = gen_sample(specs[c], layout.seconds, layout.sample_rate, sample_seed);
      std::string name = specs[c].name + "_" + std::to_string(i) + ".wav";
      std::string path = (fs::path(out_dir) / name).string();
      save_wav(path, seg.samples, layout.sample_rate);

      ManifestEntry e;
      e.path = path;
      e.label = static_cast<int>(c);
      e.class_name = specs[c].name;
      e.has_split = true;
      e.split = i < layout.n_train_per_class
                    ? Split::kTrain
                    : (i < layout.n_train_per_class + layout.n_val_per_class ? Split::kVal
                                                                             : Split::kTest);
      e.start_offset_s = 0.0;
      entries.push_back(std::move(e));
    }
  }
  std::string manifest_path = (fs::path(out_dir) / "manifest.csv").string();
  write_manifest(manifest_path, entries);
  return manifest_path;
}

}  // namespace melgraph
