#include "pesqlab/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "pesqlab/errors.hpp"
#include "pesqlab/signal_ops.hpp"

namespace pesqlab {

namespace {

double rms_of(const std::vector<double>& x) {
  double acc = 0.0;
  for (double v : x) acc += v * v;
  return std::sqrt(acc / static_cast<double>(x.size()));
}

}  // namespace

Waveform synth_speech_proxy(const SpeechProxyConfig& cfg, std::uint64_t seed) {
  if (!(cfg.seconds > 0.0)) throw ArgumentError("speech proxy duration must be positive");
  if (!(cfg.rms > 0.0)) throw ArgumentError("speech proxy rms must be positive");
  const auto n = static_cast<std::size_t>(std::lround(cfg.seconds * cfg.sample_rate_hz));
  if (n == 0) throw ArgumentError("speech proxy would be empty");

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  std::vector<double> noise(n);
  for (double& v : noise) v = gauss(rng);
  const double hi = std::min(3800.0, 0.45 * cfg.sample_rate_hz);
  auto carrier = biquad_filter(std::span<const double>(noise),
                               butterworth_bandpass(2, 200.0, hi, cfg.sample_rate_hz));

  // Syllables: raised-cosine bursts of jittered length, every few of which is
  // followed by a pause.
  std::vector<double> env(n, 0.0);
  const double fs = cfg.sample_rate_hz;
  std::size_t pos = static_cast<std::size_t>(0.05 * fs);
  int syllable = 0;
  while (pos < n) {
    const double len_s = (0.6 + 0.8 * unit(rng)) / cfg.syllable_hz;
    const auto len = static_cast<std::size_t>(len_s * fs);
    const double amp = 0.5 + unit(rng);
    for (std::size_t i = 0; i < len && pos + i < n; ++i) {
      const double ph = static_cast<double>(i) / static_cast<double>(len);
      env[pos + i] = amp * std::sin(std::numbers::pi * ph);
    }
    pos += len;
    if (++syllable % 4 == 0) pos += static_cast<std::size_t>((0.1 + 0.2 * unit(rng)) * fs);
  }

  std::vector<double> x(n);
  for (std::size_t i = 0; i < n; ++i) x[i] = carrier[i] * env[i];
  const double r = rms_of(x);
  if (r == 0.0) throw NumericError("synth", "speech proxy came out silent");
  for (double& v : x) v *= cfg.rms / r;
  return Waveform(std::move(x), cfg.sample_rate_hz);
}

UtterancePair synth_noisy_pair(const SpeechProxyConfig& cfg, double snr_db, std::uint64_t seed,
                               std::string id) {
  auto clean = synth_speech_proxy(cfg, seed);
  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<double> noise(clean.size());
  for (double& v : noise) v = gauss(rng);
  const double scale = rms_of(clean.vector()) / (rms_of(noise) * std::pow(10.0, snr_db / 20.0));
  std::vector<double> noisy = clean.vector();
  for (std::size_t i = 0; i < noisy.size(); ++i) noisy[i] += scale * noise[i];
  return UtterancePair{clean, clean.with_samples(std::move(noisy)), std::move(id), {}};
}

std::vector<UtterancePair> synth_noisy_corpus(std::size_t count, const SpeechProxyConfig& cfg,
                                              double snr_lo, double snr_hi, std::uint64_t seed) {
  std::vector<UtterancePair> out;
  out.reserve(count);
  for (std::size_t k = 0; k < count; ++k) {
    const double t = count > 1 ? static_cast<double>(k) / static_cast<double>(count - 1) : 0.0;
    const double snr = snr_lo + t * (snr_hi - snr_lo);
    out.push_back(synth_noisy_pair(cfg, snr, seed * 1000003ULL + k, "syn" + std::to_string(k)));
  }
  return out;
}

std::vector<UtterancePair> synth_degradation_suite(std::size_t count, double seconds,
                                                   std::uint64_t seed) {
  SpeechProxyConfig sc;
  sc.seconds = seconds;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<UtterancePair> out;
  out.reserve(count);
  for (std::size_t k = 0; k < count; ++k) {
    const std::uint64_t s = seed * 7919ULL + k;
    const std::string id = "deg" + std::to_string(k);
    const double u = unit(rng);
    switch (k % 3) {
      case 0:
        out.push_back(synth_noisy_pair(sc, -5.0 + 35.0 * u, s, id));
        break;
      case 1: {
        auto clean = synth_speech_proxy(sc, s);
        double peak = 0.0;
        for (double v : clean.samples()) peak = std::max(peak, std::abs(v));
        const double lvl = peak * (0.02 + 0.5 * u);
        std::vector<double> d = clean.vector();
        for (double& v : d) v = std::clamp(v, -lvl, lvl);
        out.push_back(UtterancePair{clean, clean.with_samples(std::move(d)), id, {}});
        break;
      }
      default: {
        auto noisy = synth_noisy_pair(sc, 10.0 + 20.0 * unit(rng), s, id);
        const double fc = 300.0 + 2500.0 * u;
        auto d = biquad_filter(noisy.degraded.samples(),
                               butterworth_bandpass(2, 50.0, fc, sc.sample_rate_hz));
        out.push_back(UtterancePair{noisy.reference, noisy.reference.with_samples(std::move(d)), id, {}});
        break;
      }
    }
  }
  return out;
}

UtterancePair synth_random_pair(double seconds, std::uint64_t seed, double stddev,
                                int sample_rate_hz) {
  const auto n = static_cast<std::size_t>(std::lround(seconds * sample_rate_hz));
  if (n == 0) throw ArgumentError("random pair would be empty");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, stddev);
  std::vector<double> s(n), x(n);
  for (double& v : s) v = gauss(rng);
  for (double& v : x) v = gauss(rng);
  return UtterancePair{Waveform(std::move(s), sample_rate_hz), Waveform(std::move(x), sample_rate_hz),
                       "random" + std::to_string(seed), {}};
}

}  // namespace pesqlab
