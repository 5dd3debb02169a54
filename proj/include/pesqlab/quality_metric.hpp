#pragma once

#include <span>
#include <string>
#include <vector>

#include "pesqlab/audio_io.hpp"
#include "pesqlab/signal_ops.hpp"

namespace pesqlab {

enum class LevelEstimator { sum_of_squares, percentile85 };
enum class MosMapping { raw, lqo_logistic };

// hard: exact max/min everywhere (evaluation). smooth: masking, asymmetry
// clipping and the degraded-side audibility gates use softplus/sigmoid
// surrogates of the given sharpness so the score has usable gradients.
enum class ClipMode { hard, smooth };

struct MetricConfig {
  LevelEstimator level_estimator = LevelEstimator::sum_of_squares;
  double target_level = 1e7;
  int bark_bands = 49;
  int sample_rate_hz = kDefaultSampleRate;
  MosMapping mos_mapping = MosMapping::lqo_logistic;
  ClipMode clip_mode = ClipMode::hard;
  double sharpness = 100.0;

  void validate() const;
  MetricConfig smooth() const {
    MetricConfig c = *this;
    c.clip_mode = ClipMode::smooth;
    return c;
  }
  MetricConfig hard() const {
    MetricConfig c = *this;
    c.clip_mode = ClipMode::hard;
    return c;
  }
};

struct MosScore {
  double value = 0;  // in the configured mapping
  double raw = 0;    // 4.5 - 0.1 D_sym - 0.0309 D_asym
  double d_symmetric = 0;
  double d_asymmetric = 0;
  bool support = false;  // reference has >= 3.2 s of active speech
  std::vector<std::string> warnings;
};

std::string to_string(LevelEstimator e);
std::string to_string(MosMapping m);
LevelEstimator parse_level_estimator(const std::string& s);  // sos|sum_of_squares|p85|percentile85
MosMapping parse_mos_mapping(const std::string& s);          // raw|lqo|lqo_logistic

double map_raw_mos(double raw, MosMapping mapping);
// Score at zero disturbance: 4.5 for raw, lqo(4.5) ~ 4.644 for the logistic.
double max_mapping_value(MosMapping mapping);

// Mean-equivalent power of the bandpassed signal: mean of squares, or the
// nearest-rank 85th percentile of the squares. An empty cascade bypasses the
// filter. Throws DegenerateLevelError when the estimate is zero.
double estimate_level(std::span<const double> x, LevelEstimator estimator,
                      const BiquadCascade& bandpass);
inline double estimate_level(const Waveform& x, LevelEstimator estimator,
                             const BiquadCascade& bandpass) {
  return estimate_level(x.samples(), estimator, bandpass);
}

// Scales each waveform by sqrt(target / level). No time alignment.
UtterancePair align_levels(const UtterancePair& pair, const MetricConfig& cfg);

// Pools power bins (0..fft/2) into Bark bands with density correction. Bin 0
// and the Nyquist bin are excluded.
Matrix bark_band_powers(const Matrix& power_frames);

// Zwicker loudness per band: S (P0/0.5)^g [(0.5 + 0.5 P/P0)^g - 1] for
// P > P0, else 0.
double band_loudness(double power, std::size_t band);
Matrix loudness_from_band_powers(const Matrix& band_powers);
Matrix bark_loudness(const Matrix& power_frames, const MetricConfig& cfg);

struct EqualizedBands {
  Matrix reference;  // band powers after per-band transfer compensation
  Matrix degraded;   // band powers after per-frame gain compensation
};

// Partial compensation of linear filtering (per band, from the reference)
// and gain variation (per frame, on the degraded), as in P.862.
EqualizedBands equalize_band_powers(const Matrix& ref_bands, const Matrix& deg_bands,
                                    const MetricConfig& cfg);

struct FrameDisturbance {
  double symmetric = 0;
  double asymmetric = 0;
};

// Per-frame disturbance from band powers and loudness of one frame pair.
// Masked difference: sign(d) max(|d| - 0.25 min(L_ref, L_deg), 0). Symmetric
// is the Bark-width weighted L2 norm, asymmetric the weighted L1 norm after
// scaling by ((P_deg+50)/(P_ref+50))^1.2 (zero below 3, capped at 12). Both
// are divided by a loudness-dependent frame weight and capped at 45.
FrameDisturbance frame_disturbance(std::span<const double> ref_loudness,
                                   std::span<const double> deg_loudness,
                                   std::span<const double> ref_power,
                                   std::span<const double> deg_power, const MetricConfig& cfg);

// L6 over 320 ms windows, L2 over windows, then the MOS mapping. Support is
// reported from the reference's active speech duration.
MosScore aggregate_mos(std::span<const double> symmetric, std::span<const double> asymmetric,
                       const MetricConfig& cfg, double reference_active_seconds);

MosScore compute_metric(const UtterancePair& pair, const MetricConfig& cfg);

struct MetricGradient {
  MosScore score;
  std::vector<double> grad_degraded;  // d score.value / d degraded sample
};

// Exact reverse-mode derivative of compute_metric with respect to the
// degraded samples. score is bit-identical to compute_metric(pair, cfg).
MetricGradient compute_metric_with_gradient(const UtterancePair& pair, const MetricConfig& cfg);

}  // namespace pesqlab
