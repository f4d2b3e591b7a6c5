#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace melgraph {

struct AudioBuffer {
  std::vector<double> samples;  // mono, [-1, 1]
  int sample_rate = 0;
  std::string source_id;
  int class_label = -1;
};

struct AudioSegment {
  std::vector<double> samples;
  int sample_rate = 16000;
  std::string source_id;
  double start_offset_s = 0.0;
  int class_label = -1;
};

enum class Split { kTrain, kVal, kTest };

const char* split_name(Split s);
Split split_from_name(const std::string& name);

struct ManifestEntry {
  std::string path;
  int label = -1;
  std::string class_name;
  bool has_split = false;
  Split split = Split::kTrain;
  double start_offset_s = 0.0;
};

struct SplitEntry {
  // index into the segment list handed to split_by_time
  std::size_t segment_index;
  Split split;
};

struct SplitManifest {
  std::vector<SplitEntry> entries;
  std::vector<std::string> warnings;  // sources too short to split
};

// RIFF/WAVE reader: PCM-16 LE or IEEE float-32, mono or multichannel
// (channels averaged). Throws std::runtime_error on unreadable files and
// unsupported encodings.
AudioBuffer load_wav(const std::string& path);

// float-32 WAVE writer (mono); used by the synthetic data generator.
void save_wav(const std::string& path, const std::vector<double>& samples, int sample_rate);

// Polyphase windowed-sinc resampler (Kaiser window, 64 taps per phase).
// Output length is round(len * target / source); identity when rates match.
AudioBuffer resample(const AudioBuffer& buf, int target_rate = 16000);

// Consecutive non-overlapping segments; a trailing remainder shorter than
// `seconds` is dropped. A buffer shorter than one segment yields an empty
// list.
std::vector<AudioSegment> segment(const AudioBuffer& buf, double seconds = 5.0);

// Per source recording, the first 70% of segments (by start time) go to
// train, the next 15% to val, the remainder to test. Sources with fewer than
// 3 segments go entirely to train and produce a warning record.
SplitManifest split_by_time(const std::vector<AudioSegment>& segments);

// Manifest CSV: header `path,label,class_name`, optionally extended with
// `split,start_offset_s` columns.
std::vector<ManifestEntry> read_manifest(const std::string& path);
void write_manifest(const std::string& path, const std::vector<ManifestEntry>& entries);

}  // namespace melgraph
