#include "melgraph/audio_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace melgraph {

namespace {

constexpr double kPi = 3.14159265358979323846;

std::uint32_t read_u32(std::istream& f) {
  unsigned char b[4];
  f.read(reinterpret_cast<char*>(b), 4);
  return b[0] | (b[1] << 8) | (b[2] << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

std::uint16_t read_u16(std::istream& f) {
  unsigned char b[2];
  f.read(reinterpret_cast<char*>(b), 2);
  return static_cast<std::uint16_t>(b[0] | (b[1] << 8));
}

void write_u32(std::ostream& f, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
  f.write(reinterpret_cast<char*>(b), 4);
}

void write_u16(std::ostream& f, std::uint16_t v) {
  unsigned char b[2] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8)};
  f.write(reinterpret_cast<char*>(b), 2);
}

// Modified Bessel I0, series expansion (converges fast for beta <= 10).
double bessel_i0(double x) {
  double sum = 1.0, term = 1.0;
  double half = 0.5 * x;
  for (int k = 1; k < 64; ++k) {
    term *= (half / k) * (half / k);
    sum += term;
    if (term < 1e-16 * sum) break;
  }
  return sum;
}

std::string base_name(const std::string& path) {
  auto pos = path.find_last_of("/\\");
  return pos == std::string::npos ? path : path.substr(pos + 1);
}

}  // namespace

const char* split_name(Split s) {
  switch (s) {
    case Split::kTrain: return "train";
    case Split::kVal: return "val";
    default: return "test";
  }
}

Split split_from_name(const std::string& name) {
  if (name == "train") return Split::kTrain;
  if (name == "val") return Split::kVal;
  if (name == "test") return Split::kTest;
  throw std::runtime_error("unknown split name: " + name);
}

AudioBuffer load_wav(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open file: " + path);

  char tag[4];
  f.read(tag, 4);
  if (!f || std::memcmp(tag, "RIFF", 4) != 0)
    throw std::runtime_error("unsupported encoding: " + path);
  read_u32(f);  // riff size
  f.read(tag, 4);
  if (!f || std::memcmp(tag, "WAVE", 4) != 0)
    throw std::runtime_error("unsupported encoding: " + path);

  int channels = 0, sample_rate = 0, bits = 0, format = 0;
  std::vector<char> payload;
  while (f.read(tag, 4)) {
    std::uint32_t size = read_u32(f);
    if (!f) break;
    if (std::memcmp(tag, "fmt ", 4) == 0) {
      if (size < 16) throw std::runtime_error("unsupported encoding: " + path);
      format = read_u16(f);
      channels = read_u16(f);
      sample_rate = static_cast<int>(read_u32(f));
      read_u32(f);  // byte rate
      read_u16(f);  // block align
      bits = read_u16(f);
      if (size > 16) f.seekg(size - 16, std::ios::cur);
    } else if (std::memcmp(tag, "data", 4) == 0) {
      payload.resize(size);
      f.read(payload.data(), size);
      if (static_cast<std::uint32_t>(f.gcount()) != size)
        throw std::runtime_error("unsupported encoding: " + path);
      break;
    } else {
      f.seekg(size + (size & 1), std::ios::cur);
    }
  }
  if (channels <= 0 || sample_rate <= 0)
    throw std::runtime_error("unsupported encoding: " + path);
  bool pcm16 = format == 1 && bits == 16;
  bool float32 = format == 3 && bits == 32;
  if (!pcm16 && !float32) throw std::runtime_error("unsupported encoding: " + path);
  std::size_t bytes_per_sample = pcm16 ? 2 : 4;
  std::size_t frame_bytes = bytes_per_sample * static_cast<std::size_t>(channels);
  std::size_t n_frames = payload.size() / frame_bytes;
  if (n_frames == 0) throw std::runtime_error("zero-length payload: " + path);

  AudioBuffer buf;
  buf.sample_rate = sample_rate;
  buf.source_id = base_name(path);
  buf.samples.resize(n_frames);
  const unsigned char* p = reinterpret_cast<const unsigned char*>(payload.data());
  for (std::size_t i = 0; i < n_frames; ++i) {
    double acc = 0.0;
    for (int c = 0; c < channels; ++c) {
      const unsigned char* s = p + (i * channels + c) * bytes_per_sample;
      if (pcm16) {
        std::int16_t v = static_cast<std::int16_t>(s[0] | (s[1] << 8));
        acc += v / 32768.0;
      } else {
        float v;
        std::memcpy(&v, s, 4);
        acc += v;
      }
    }
    buf.samples[i] = acc / channels;
  }
  for (double v : buf.samples)
    if (!std::isfinite(v)) throw std::runtime_error("non-finite sample in: " + path);
  return buf;
}

void save_wav(const std::string& path, const std::vector<double>& samples, int sample_rate) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write file: " + path);
  std::uint32_t data_bytes = static_cast<std::uint32_t>(samples.size() * 4);
  f.write("RIFF", 4);
  write_u32(f, 36 + data_bytes);
  f.write("WAVE", 4);
  f.write("fmt ", 4);
  write_u32(f, 16);
  write_u16(f, 3);  // IEEE float
  write_u16(f, 1);
  write_u32(f, static_cast<std::uint32_t>(sample_rate));
  write_u32(f, static_cast<std::uint32_t>(sample_rate) * 4);
  write_u16(f, 4);
  write_u16(f, 32);
  f.write("data", 4);
  write_u32(f, data_bytes);
  for (double v : samples) {
    float fv = static_cast<float>(v);
    f.write(reinterpret_cast<const char*>(&fv), 4);
  }
  if (!f) throw std::runtime_error("write failed: " + path);
}

AudioBuffer resample(const AudioBuffer& buf, int target_rate) {
  if (target_rate <= 0) throw std::invalid_argument("resample: target_rate must be > 0");
  if (buf.samples.empty()) throw std::invalid_argument("resample: empty buffer");
  if (buf.sample_rate == target_rate) return buf;

  const std::int64_t src = buf.sample_rate;
  const std::int64_t dst = target_rate;
  const std::int64_t g = std::gcd(src, dst);
  const std::int64_t up = dst / g;    // interpolation factor L
  const std::int64_t down = src / g;  // decimation factor M

  const int taps_per_phase = 64;
  const int half = taps_per_phase / 2;
  const double beta = 8.6;
  const double i0_beta = bessel_i0(beta);
  // cutoff slightly below the narrower Nyquist to contain the transition band
  const double cutoff = 0.97 * std::min(1.0, static_cast<double>(up) / down);

  auto kernel = [&](double t) {
    // t in input-sample units, |t| < half
    double u = t / half;
    double w = bessel_i0(beta * std::sqrt(std::max(0.0, 1.0 - u * u))) / i0_beta;
    double x = kPi * t * cutoff;
    double s = std::fabs(x) < 1e-12 ? 1.0 : std::sin(x) / x;
    return cutoff * s * w;
  };

  const std::int64_t in_len = static_cast<std::int64_t>(buf.samples.size());
  const std::int64_t out_len =
      static_cast<std::int64_t>(std::llround(static_cast<double>(in_len) * dst / src));

  // phase table: up phases x taps (built on the fly for very large up)
  std::vector<double> table;
  const bool tabulate = up <= 65536;
  if (tabulate) {
    table.resize(static_cast<std::size_t>(up) * taps_per_phase);
    for (std::int64_t ph = 0; ph < up; ++ph) {
      double frac = static_cast<double>(ph) / up;
      for (int k = 0; k < taps_per_phase; ++k) {
        double t = k - half + 1 - frac;
        table[static_cast<std::size_t>(ph * taps_per_phase + k)] = kernel(t);
      }
    }
  }

  AudioBuffer out;
  out.sample_rate = target_rate;
  out.source_id = buf.source_id;
  out.class_label = buf.class_label;
  out.samples.resize(static_cast<std::size_t>(out_len));
  for (std::int64_t n = 0; n < out_len; ++n) {
    // exact input-time position of output sample n: n * down / up
    std::int64_t num = n * down;
    std::int64_t base = num / up;
    std::int64_t ph = num % up;
    double acc = 0.0;
    if (tabulate) {
      const double* h = table.data() + ph * taps_per_phase;
      for (int k = 0; k < taps_per_phase; ++k) {
        std::int64_t idx = base - (half - 1) + k;
        if (idx < 0 || idx >= in_len) continue;
        acc += buf.samples[static_cast<std::size_t>(idx)] * h[k];
      }
    } else {
      double frac = static_cast<double>(ph) / up;
      for (int k = 0; k < taps_per_phase; ++k) {
        std::int64_t idx = base - (half - 1) + k;
        if (idx < 0 || idx >= in_len) continue;
        acc += buf.samples[static_cast<std::size_t>(idx)] * kernel(k - half + 1 - frac);
      }
    }
    out.samples[static_cast<std::size_t>(n)] = acc;
  }
  return out;
}

std::vector<AudioSegment> segment(const AudioBuffer& buf, double seconds) {
  if (seconds <= 0) throw std::invalid_argument("segment: seconds must be > 0");
  const std::int64_t seg_len = static_cast<std::int64_t>(std::llround(seconds * buf.sample_rate));
  const std::int64_t n = static_cast<std::int64_t>(buf.samples.size());
  std::vector<AudioSegment> out;
  for (std::int64_t start = 0; start + seg_len <= n; start += seg_len) {
    AudioSegment seg;
    seg.sample_rate = buf.sample_rate;
    seg.source_id = buf.source_id;
    seg.class_label = buf.class_label;
    seg.start_offset_s = static_cast<double>(start) / buf.sample_rate;
    seg.samples.assign(buf.samples.begin() + start, buf.samples.begin() + start + seg_len);
    out.push_back(std::move(seg));
  }
  return out;
}

SplitManifest split_by_time(const std::vector<AudioSegment>& segments) {
  std::map<std::string, std::vector<std::size_t>> by_source;
  for (std::size_t i = 0; i < segments.size(); ++i)
    by_source[segments[i].source_id].push_back(i);

  SplitManifest manifest;
  manifest.entries.resize(segments.size());
  for (auto& [source, idx] : by_source) {
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
      return segments[a].start_offset_s < segments[b].start_offset_s;
    });
    const std::size_t n = idx.size();
    if (n < 3) {
      for (std::size_t i : idx) manifest.entries[i] = {i, Split::kTrain};
      manifest.warnings.push_back("source '" + source +
                                  "' has fewer than 3 segments; all assigned to train");
      continue;
    }
    std::size_t n_train = static_cast<std::size_t>(0.70 * static_cast<double>(n));
    std::size_t n_val = static_cast<std::size_t>(0.15 * static_cast<double>(n));
    for (std::size_t p = 0; p < n; ++p) {
      Split s = p < n_train ? Split::kTrain : (p < n_train + n_val ? Split::kVal : Split::kTest);
      manifest.entries[idx[p]] = {idx[p], s};
    }
  }
  return manifest;
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::stringstream ss(line);
  while (std::getline(ss, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.push_back("");
  return out;
}

}  // namespace

std::vector<ManifestEntry> read_manifest(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open manifest: " + path);
  std::string line;
  if (!std::getline(f, line)) throw std::runtime_error("empty manifest: " + path);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  auto header = split_csv_line(line);
  if (header.size() < 3 || header[0] != "path" || header[1] != "label" ||
      header[2] != "class_name")
    throw std::runtime_error("manifest header must start with path,label,class_name: " + path);
  bool has_split = header.size() >= 5 && header[3] == "split" && header[4] == "start_offset_s";

  std::vector<ManifestEntry> entries;
  while (std::getline(f, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto fields = split_csv_line(line);
    if (fields.size() < 3) throw std::runtime_error("malformed manifest row: " + line);
    ManifestEntry e;
    e.path = fields[0];
    e.label = std::stoi(fields[1]);
    e.class_name = fields[2];
    if (has_split && fields.size() >= 5) {
      e.has_split = true;
      e.split = split_from_name(fields[3]);
      e.start_offset_s = std::stod(fields[4]);
    }
    entries.push_back(std::move(e));
  }
  return entries;
}

void write_manifest(const std::string& path, const std::vector<ManifestEntry>& entries) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write manifest: " + path);
  bool any_split = false;
  for (const auto& e : entries) any_split |= e.has_split;
  f << "path,label,class_name";
  if (any_split) f << ",split,start_offset_s";
  f << "\n";
  for (const auto& e : entries) {
    f << e.path << "," << e.label << "," << e.class_name;
    if (any_split) f << "," << split_name(e.split) << "," << e.start_offset_s;
    f << "\n";
  }
}

}  // namespace melgraph
