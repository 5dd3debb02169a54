#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace pesqlab {

inline constexpr int kDefaultSampleRate = 16000;

// Mono sample sequence. Immutable once constructed; the constructor enforces
// non-empty, all-finite samples and a supported rate (8 or 16 kHz).
class Waveform {
 public:
  explicit Waveform(std::vector<double> samples, int sample_rate_hz = kDefaultSampleRate);

  std::span<const double> samples() const { return samples_; }
  const std::vector<double>& vector() const { return samples_; }
  double operator[](std::size_t i) const { return samples_[i]; }
  std::size_t size() const { return samples_.size(); }
  int sample_rate_hz() const { return sample_rate_hz_; }
  double duration_seconds() const {
    return static_cast<double>(samples_.size()) / sample_rate_hz_;
  }

  // Copy with a new sample vector at the same rate.
  Waveform with_samples(std::vector<double> samples) const {
    return Waveform(std::move(samples), sample_rate_hz_);
  }

  friend bool operator==(const Waveform&, const Waveform&) = default;

 private:
  std::vector<double> samples_;
  int sample_rate_hz_;
};

struct UtterancePair {
  Waveform reference;
  Waveform degraded;
  std::string id;
  std::vector<std::string> warnings;
};

struct ManifestEntry {
  std::string id;
  std::filesystem::path reference_path;
  std::filesystem::path degraded_path;
};

struct Manifest {
  std::vector<ManifestEntry> entries;
};

enum class SampleEncoding { pcm16, float32 };

// RIFF/WAVE, mono, PCM-16 or IEEE float-32. PCM-16 is normalized by 32768.
Waveform load_waveform(const std::filesystem::path& path);

// pcm16 clamps to [-1, 1 - 2^-15] before quantization.
void save_waveform(const Waveform& w, const std::filesystem::path& path,
                   SampleEncoding encoding = SampleEncoding::float32);

// Byte-level codec, exposed for tests and in-memory use.
Waveform decode_wav(std::span<const unsigned char> bytes);
std::vector<unsigned char> encode_wav(const Waveform& w, SampleEncoding encoding);

// CSV with header `id,reference,degraded`; `#` lines are comments. Relative
// paths resolve against the manifest's directory.
Manifest load_manifest(const std::filesystem::path& path);
Manifest parse_manifest(const std::string& text, const std::filesystem::path& base_dir);

// Length tolerance for make_pair, as a fraction of the longer signal.
inline constexpr double kPairLengthTolerance = 0.005;

UtterancePair make_pair(const Waveform& ref, const Waveform& deg, std::string id);

UtterancePair load_pair(const ManifestEntry& entry);

}  // namespace pesqlab
