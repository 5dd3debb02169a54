#pragma once

#include <cstdint>
#include <vector>

#include "pesqlab/audio_io.hpp"

namespace pesqlab {

// Speech-like test material: bandlimited Gaussian noise (200-3800 Hz) shaped
// by a syllabic envelope with short pauses. Deterministic for a given seed.
struct SpeechProxyConfig {
  double seconds = 2.0;
  int sample_rate_hz = kDefaultSampleRate;
  double rms = 0.05;
  double syllable_hz = 4.0;
};

Waveform synth_speech_proxy(const SpeechProxyConfig& cfg, std::uint64_t seed);

// Reference proxy plus white noise scaled to the requested SNR in dB.
UtterancePair synth_noisy_pair(const SpeechProxyConfig& cfg, double snr_db, std::uint64_t seed,
                               std::string id = "synthetic");

// `count` pairs with SNRs evenly spread over [snr_lo, snr_hi].
std::vector<UtterancePair> synth_noisy_corpus(std::size_t count, const SpeechProxyConfig& cfg,
                                              double snr_lo, double snr_hi, std::uint64_t seed);

// Mixed degradations for calibration against an external scorer: additive
// white noise (-5..30 dB SNR), hard clipping, and band limiting plus noise,
// cycling through the three kinds.
std::vector<UtterancePair> synth_degradation_suite(std::size_t count, double seconds,
                                                   std::uint64_t seed);

// Independent Gaussian reference and degraded signals of the given length,
// used by the gradient checks.
UtterancePair synth_random_pair(double seconds, std::uint64_t seed, double stddev = 0.1,
                                int sample_rate_hz = kDefaultSampleRate);

}  // namespace pesqlab
