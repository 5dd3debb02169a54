#include "pesqlab/quality_metric.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "metric_detail.hpp"
#include "pesqlab/errors.hpp"
#include "pesqlab/metric_constants.hpp"

namespace pesqlab {

namespace c = constants;

void MetricConfig::validate() const {
  if (sample_rate_hz != 16000) {
    throw ConfigError("the quality metric operates at 16000 Hz only, got " +
                      std::to_string(sample_rate_hz));
  }
  if (bark_bands != static_cast<int>(c::kBarkBands)) {
    throw ConfigError("bark_bands must be 49 at 16 kHz, got " + std::to_string(bark_bands));
  }
  if (!(target_level > 0.0) || !std::isfinite(target_level)) {
    throw ConfigError("target_level must be positive and finite");
  }
  if (!(sharpness > 0.0)) throw ConfigError("smoothing sharpness must be positive");
}

std::string to_string(LevelEstimator e) {
  return e == LevelEstimator::sum_of_squares ? "sum_of_squares" : "percentile85";
}

std::string to_string(MosMapping m) { return m == MosMapping::raw ? "raw" : "lqo_logistic"; }

LevelEstimator parse_level_estimator(const std::string& s) {
  if (s == "sos" || s == "sum_of_squares") return LevelEstimator::sum_of_squares;
  if (s == "p85" || s == "percentile85") return LevelEstimator::percentile85;
  throw ArgumentError("unknown level estimator '" + s + "' (expected sos or p85)");
}

MosMapping parse_mos_mapping(const std::string& s) {
  if (s == "raw") return MosMapping::raw;
  if (s == "lqo" || s == "lqo_logistic") return MosMapping::lqo_logistic;
  throw ArgumentError("unknown MOS mapping '" + s + "' (expected raw or lqo)");
}

double map_raw_mos(double raw, MosMapping mapping) {
  if (mapping == MosMapping::raw) return raw;
  return c::kLqoFloor +
         (c::kLqoCeiling - c::kLqoFloor) / (1.0 + std::exp(-c::kLqoSlope * raw + c::kLqoOffset));
}

double max_mapping_value(MosMapping mapping) { return map_raw_mos(c::kRawMosOffset, mapping); }

double estimate_level(std::span<const double> x, LevelEstimator estimator,
                      const BiquadCascade& bandpass) {
  if (x.empty()) throw ArgumentError("level of an empty signal");
  const auto y = biquad_filter(x, bandpass);
  double level = 0.0;
  if (estimator == LevelEstimator::sum_of_squares) {
    level = std::inner_product(y.begin(), y.end(), y.begin(), 0.0) / static_cast<double>(y.size());
  } else {
    level = percentile_of_squares(y, c::kPercentileFraction);
  }
  if (!(level > 0.0)) {
    throw DegenerateLevelError("signal level estimate is zero (" + to_string(estimator) +
                               "); cannot normalize");
  }
  if (!std::isfinite(level)) throw NumericError("level", "level estimate is not finite");
  return level;
}

UtterancePair align_levels(const UtterancePair& pair, const MetricConfig& cfg) {
  cfg.validate();
  const auto bandpass = level_alignment_bandpass(pair.reference.sample_rate_hz());
  auto scale = [&](const Waveform& w) {
    const double gain = std::sqrt(cfg.target_level / estimate_level(w, cfg.level_estimator, bandpass));
    std::vector<double> out(w.samples().begin(), w.samples().end());
    for (double& v : out) v *= gain;
    return w.with_samples(std::move(out));
  };
  return UtterancePair{scale(pair.reference), scale(pair.degraded), pair.id, pair.warnings};
}

// ---------------------------------------------------------------------------
// Bark transform and loudness

Matrix bark_band_powers(const Matrix& power_frames) {
  if (power_frames.cols != c::kFrameSize / 2 + 1) {
    throw ArgumentError("bark pooling expects " + std::to_string(c::kFrameSize / 2 + 1) +
                        " bins per frame, got " + std::to_string(power_frames.cols));
  }
  Matrix out(power_frames.rows, c::kBarkBands);
  for (std::size_t t = 0; t < power_frames.rows; ++t) {
    std::size_t bin = 0;
    for (std::size_t b = 0; b < c::kBarkBands; ++b) {
      double sum = 0.0;
      for (int i = 0; i < c::kBinsPerBand[b]; ++i, ++bin) {
        if (bin == 0) continue;
        const double p = power_frames(t, bin);
        if (p < 0.0) throw NumericError("bark", "negative power in bin " + std::to_string(bin));
        sum += p;
      }
      out(t, b) = sum * c::kPowerDensityCorrection[b] * c::kPowerScale;
    }
  }
  return out;
}

double band_loudness(double power, std::size_t band) {
  if (power < 0.0) throw NumericError("loudness", "negative band power");
  const double th = c::kAbsThresholdPower[band];
  if (power <= th) return 0.0;
  const double g = c::kZwickerPower;
  return c::kLoudnessScale * std::pow(th / 0.5, g) * (std::pow(0.5 + 0.5 * power / th, g) - 1.0);
}

Matrix loudness_from_band_powers(const Matrix& band_powers) {
  Matrix out(band_powers.rows, band_powers.cols);
  for (std::size_t t = 0; t < band_powers.rows; ++t) {
    for (std::size_t b = 0; b < band_powers.cols; ++b) {
      out(t, b) = band_loudness(band_powers(t, b), b);
    }
  }
  return out;
}

Matrix bark_loudness(const Matrix& power_frames, const MetricConfig& cfg) {
  cfg.validate();
  return loudness_from_band_powers(bark_band_powers(power_frames));
}

namespace detail {

double band_loudness_d(double power, std::size_t band) {
  const double th = c::kAbsThresholdPower[band];
  if (power <= th) return 0.0;
  const double g = c::kZwickerPower;
  return c::kLoudnessScale * std::pow(th / 0.5, g) * g *
         std::pow(0.5 + 0.5 * power / th, g - 1.0) * 0.5 / th;
}

double audible_power(std::span<const double> bands, double factor, const Clip& clip) {
  double sum = 0.0;
  for (std::size_t b = 0; b < bands.size(); ++b) {
    const double th = c::kAbsThresholdPower[b] * factor;
    sum += bands[b] * clip.step(bands[b] / th - 1.0);
  }
  return sum;
}

double audible_power_d(double power, std::size_t band, double factor, const Clip& clip) {
  const double th = c::kAbsThresholdPower[band] * factor;
  const double z = power / th - 1.0;
  return clip.step(z) + power * clip.step_d(z) / th;
}

// ---------------------------------------------------------------------------
// Equalization

EqualizedBands equalize_forward(const Matrix& ref, const Matrix& deg, const MetricConfig& cfg,
                                EqualizeTrace* trace) {
  if (ref.rows != deg.rows || ref.cols != deg.cols || ref.cols != c::kBarkBands) {
    throw ArgumentError("equalization needs matching frame-by-49-band matrices");
  }
  const Clip clip = clip_for(cfg);
  const Clip hard{};
  const std::size_t frames = ref.rows;
  const std::size_t bands = ref.cols;
  EqualizeTrace local;
  EqualizeTrace& tr = trace ? *trace : local;

  // Frames whose reference is (nearly) inaudible do not contribute to the
  // per-band averages. Depends on the reference only.
  tr.silent.assign(frames, 0);
  for (std::size_t t = 0; t < frames; ++t) {
    tr.silent[t] = audible_power(ref.row(t), c::kSilentFrameThresholdFactor, hard) <
                   c::kSilentFramePower;
  }

  tr.mean_ref.assign(bands, 0.0);
  tr.mean_deg.assign(bands, 0.0);
  for (std::size_t t = 0; t < frames; ++t) {
    if (tr.silent[t]) continue;
    for (std::size_t b = 0; b < bands; ++b) {
      const double th = c::kAbsThresholdPower[b] * c::kBandAverageThresholdFactor;
      tr.mean_ref[b] += ref(t, b) * hard.step(ref(t, b) / th - 1.0);
      tr.mean_deg[b] += deg(t, b) * clip.step(deg(t, b) / th - 1.0);
    }
  }
  tr.band_ratio_raw.assign(bands, 0.0);
  tr.band_ratio.assign(bands, 0.0);
  for (std::size_t b = 0; b < bands; ++b) {
    tr.mean_ref[b] /= static_cast<double>(frames);
    tr.mean_deg[b] /= static_cast<double>(frames);
    tr.band_ratio_raw[b] =
        (tr.mean_deg[b] + c::kBandRatioOffset) / (tr.mean_ref[b] + c::kBandRatioOffset);
    tr.band_ratio[b] = std::clamp(tr.band_ratio_raw[b], c::kBandRatioMin, c::kBandRatioMax);
  }

  EqualizedBands out{Matrix(frames, bands), Matrix(frames, bands)};
  for (std::size_t t = 0; t < frames; ++t) {
    for (std::size_t b = 0; b < bands; ++b) out.reference(t, b) = tr.band_ratio[b] * ref(t, b);
  }

  tr.audible_ref.assign(frames, 0.0);
  tr.audible_deg.assign(frames, 0.0);
  tr.frame_ratio_raw.assign(frames, 0.0);
  tr.frame_ratio_smoothed.assign(frames, 0.0);
  tr.frame_ratio.assign(frames, 0.0);
  for (std::size_t t = 0; t < frames; ++t) {
    tr.audible_ref[t] = audible_power(out.reference.row(t), 1.0, clip);
    tr.audible_deg[t] = audible_power(deg.row(t), 1.0, clip);
    tr.frame_ratio_raw[t] =
        (tr.audible_ref[t] + c::kFrameRatioOffset) / (tr.audible_deg[t] + c::kFrameRatioOffset);
  }
  const double w_prev = c::kFrameRatioSmoothing;
  for (std::size_t t = 0; t < frames; ++t) {
    tr.frame_ratio_smoothed[t] =
        t == 0 ? tr.frame_ratio_raw[0]
               : (1.0 - w_prev) * tr.frame_ratio_raw[t] + w_prev * tr.frame_ratio_raw[t - 1];
    tr.frame_ratio[t] =
        std::clamp(tr.frame_ratio_smoothed[t], c::kFrameRatioMin, c::kFrameRatioMax);
    for (std::size_t b = 0; b < bands; ++b) out.degraded(t, b) = tr.frame_ratio[t] * deg(t, b);
  }
  return out;
}

Matrix equalize_backward(const Matrix& ref, const Matrix& deg, const EqualizeTrace& tr,
                         const MetricConfig& cfg, const Matrix& g_eq_ref, const Matrix& g_eq_deg) {
  const Clip clip = clip_for(cfg);
  const std::size_t frames = ref.rows;
  const std::size_t bands = ref.cols;
  Matrix g_deg(frames, bands);

  // eq_deg = frame_ratio[t] * deg
  std::vector<double> g_ratio(frames, 0.0);
  for (std::size_t t = 0; t < frames; ++t) {
    for (std::size_t b = 0; b < bands; ++b) {
      g_ratio[t] += g_eq_deg(t, b) * deg(t, b);
      g_deg(t, b) += g_eq_deg(t, b) * tr.frame_ratio[t];
    }
  }
  // clamp, then the one-frame smoothing, then the ratio of audible powers.
  std::vector<double> g_raw(frames, 0.0);
  const double w_prev = c::kFrameRatioSmoothing;
  for (std::size_t t = 0; t < frames; ++t) {
    const double s = tr.frame_ratio_smoothed[t];
    if (s < c::kFrameRatioMin || s > c::kFrameRatioMax) continue;
    if (t == 0) {
      g_raw[0] += g_ratio[0];
    } else {
      g_raw[t] += (1.0 - w_prev) * g_ratio[t];
      g_raw[t - 1] += w_prev * g_ratio[t];
    }
  }
  Matrix g_eq_ref_total = g_eq_ref;
  for (std::size_t t = 0; t < frames; ++t) {
    const double denom = tr.audible_deg[t] + c::kFrameRatioOffset;
    const double g_aud_ref = g_raw[t] / denom;
    const double g_aud_deg = -g_raw[t] * tr.frame_ratio_raw[t] / denom;
    for (std::size_t b = 0; b < bands; ++b) {
      if (g_aud_ref != 0.0) {
        const double eq_ref = tr.band_ratio[b] * ref(t, b);
        g_eq_ref_total(t, b) += g_aud_ref * audible_power_d(eq_ref, b, 1.0, clip);
      }
      if (g_aud_deg != 0.0) g_deg(t, b) += g_aud_deg * audible_power_d(deg(t, b), b, 1.0, clip);
    }
  }
  // eq_ref = band_ratio[b] * ref; band_ratio depends on the degraded mean.
  for (std::size_t b = 0; b < bands; ++b) {
    const double r = tr.band_ratio_raw[b];
    if (r < c::kBandRatioMin || r > c::kBandRatioMax) continue;
    double g_band = 0.0;
    for (std::size_t t = 0; t < frames; ++t) g_band += g_eq_ref_total(t, b) * ref(t, b);
    const double g_mean_deg = g_band / (tr.mean_ref[b] + c::kBandRatioOffset);
    if (g_mean_deg == 0.0) continue;
    const double scale = g_mean_deg / static_cast<double>(frames);
    for (std::size_t t = 0; t < frames; ++t) {
      if (tr.silent[t]) continue;
      g_deg(t, b) +=
          scale * audible_power_d(deg(t, b), b, c::kBandAverageThresholdFactor, clip);
    }
  }
  return g_deg;
}

}  // namespace detail

EqualizedBands equalize_band_powers(const Matrix& ref_bands, const Matrix& deg_bands,
                                    const MetricConfig& cfg) {
  return detail::equalize_forward(ref_bands, deg_bands, cfg, nullptr);
}

// ---------------------------------------------------------------------------
// Disturbance

namespace {

double total_width() {
  double w = 0.0;
  for (std::size_t b = 1; b < c::kBarkBands; ++b) w += c::kBandWidthBark[b];
  return w;
}

void check_frame_sizes(std::span<const double> a, std::span<const double> b,
                       std::span<const double> p, std::span<const double> q) {
  if (a.size() != c::kBarkBands || b.size() != a.size() || p.size() != a.size() ||
      q.size() != a.size()) {
    throw ArgumentError("frame disturbance needs four 49-band vectors");
  }
}

// Forward quantities of one band that the backward pass reuses.
struct BandTerms {
  double diff, dz, masked, ratio, asym0, asym1, asym2;
};

BandTerms band_terms(double lr, double ld, double pr, double pd, const detail::Clip& clip) {
  BandTerms t{};
  t.diff = ld - lr;
  const double mn = ld - clip.relu(ld - lr);
  t.dz = c::kDeadzoneFraction * mn;
  t.masked = clip.relu(t.diff - t.dz) - clip.relu(-t.diff - t.dz);
  t.ratio = (pd + c::kAsymmetryOffset) / (pr + c::kAsymmetryOffset);
  t.asym0 = std::pow(t.ratio, c::kAsymmetryExponent);
  t.asym1 = t.asym0 * clip.step(t.asym0 - c::kAsymmetryFloor);
  t.asym2 = t.asym1 - clip.relu(t.asym1 - c::kAsymmetryCap);
  return t;
}

struct FrameTerms {
  double sum_sq = 0;  // sum_b (w_b m_b)^2
  double sym_norm = 0;
  double asym_norm = 0;
  double audible_ref = 0;
  double weight = 1;
};

FrameTerms frame_terms(std::span<const double> lr, std::span<const double> ld,
                       std::span<const double> pr, std::span<const double> pd,
                       const detail::Clip& clip) {
  FrameTerms f;
  for (std::size_t b = 1; b < c::kBarkBands; ++b) {
    const auto t = band_terms(lr[b], ld[b], pr[b], pd[b], clip);
    const double w = c::kBandWidthBark[b];
    f.sum_sq += (w * t.masked) * (w * t.masked);
    f.asym_norm += w * std::abs(t.masked * t.asym2);
  }
  f.sym_norm = std::sqrt(total_width()) * std::sqrt(f.sum_sq);
  f.audible_ref = detail::audible_power(pr, 1.0, clip);
  f.weight = std::pow((f.audible_ref + c::kFrameWeightOffset) / c::kFrameWeightScale,
                      c::kFrameWeightExponent);
  return f;
}

}  // namespace

FrameDisturbance frame_disturbance(std::span<const double> ref_loudness,
                                   std::span<const double> deg_loudness,
                                   std::span<const double> ref_power,
                                   std::span<const double> deg_power, const MetricConfig& cfg) {
  check_frame_sizes(ref_loudness, deg_loudness, ref_power, deg_power);
  const auto f = frame_terms(ref_loudness, deg_loudness, ref_power, deg_power,
                             detail::clip_for(cfg));
  return {std::min(f.sym_norm / f.weight, c::kFrameDisturbanceCap),
          std::min(f.asym_norm / f.weight, c::kFrameDisturbanceCap)};
}

namespace detail {

void frame_disturbance_backward(std::span<const double> lr, std::span<const double> ld,
                                std::span<const double> pr, std::span<const double> pd,
                                const MetricConfig& cfg, double g_sym, double g_asym,
                                FrameGrad& out) {
  const Clip clip = clip_for(cfg);
  const std::size_t nb = c::kBarkBands;
  out.ref_loudness.assign(nb, 0.0);
  out.deg_loudness.assign(nb, 0.0);
  out.ref_power.assign(nb, 0.0);
  out.deg_power.assign(nb, 0.0);

  const auto f = frame_terms(lr, ld, pr, pd, clip);
  double g_sym_norm = 0.0, g_asym_norm = 0.0, g_weight = 0.0;
  if (f.sym_norm / f.weight < c::kFrameDisturbanceCap) {
    g_sym_norm = g_sym / f.weight;
    g_weight -= g_sym * f.sym_norm / (f.weight * f.weight);
  }
  if (f.asym_norm / f.weight < c::kFrameDisturbanceCap) {
    g_asym_norm = g_asym / f.weight;
    g_weight -= g_asym * f.asym_norm / (f.weight * f.weight);
  }
  const double g_audible_ref =
      g_weight * c::kFrameWeightExponent * f.weight / (f.audible_ref + c::kFrameWeightOffset);
  if (g_audible_ref != 0.0) {
    for (std::size_t b = 0; b < nb; ++b) {
      out.ref_power[b] += g_audible_ref * audible_power_d(pr[b], b, 1.0, clip);
    }
  }

  const double sqrt_w = std::sqrt(total_width());
  const double norm = std::sqrt(f.sum_sq);
  for (std::size_t b = 1; b < nb; ++b) {
    const auto t = band_terms(lr[b], ld[b], pr[b], pd[b], clip);
    const double w = c::kBandWidthBark[b];
    const double prod = t.masked * t.asym2;
    const double sgn = prod > 0.0 ? 1.0 : (prod < 0.0 ? -1.0 : 0.0);

    double g_m = g_asym_norm * w * sgn * t.asym2;
    if (norm > 0.0) g_m += g_sym_norm * sqrt_w * w * w * t.masked / norm;
    const double g_a2 = g_asym_norm * w * sgn * t.masked;

    // Asymmetry factor chain: cap, floor gate, power law, ratio.
    const double g_a1 = g_a2 * (1.0 - clip.relu_d(t.asym1 - c::kAsymmetryCap));
    const double z = t.asym0 - c::kAsymmetryFloor;
    const double g_a0 = g_a1 * (clip.step(z) + t.asym0 * clip.step_d(z));
    const double g_ratio = g_a0 * c::kAsymmetryExponent * t.asym0 / t.ratio;
    out.deg_power[b] += g_ratio / (pr[b] + c::kAsymmetryOffset);
    out.ref_power[b] -= g_ratio * t.ratio / (pr[b] + c::kAsymmetryOffset);

    // Masked difference chain.
    const double up = clip.relu_d(t.diff - t.dz);
    const double dn = clip.relu_d(-t.diff - t.dz);
    const double g_diff = g_m * (up + dn);
    const double g_dz = g_m * (dn - up);
    const double g_min = c::kDeadzoneFraction * g_dz;
    const double sel = clip.relu_d(ld[b] - lr[b]);
    out.deg_loudness[b] += g_diff + g_min * (1.0 - sel);
    out.ref_loudness[b] += -g_diff + g_min * sel;
  }
}

// ---------------------------------------------------------------------------
// Aggregation

double aggregate_series(std::span<const double> v, std::vector<double>* grad) {
  const std::size_t n = v.size();
  if (n == 0) throw ArgumentError("aggregation over zero frames");
  const std::size_t len = std::min(n, c::kSyllableFrames);
  const std::size_t windows = n >= c::kSyllableFrames
                                  ? (n - c::kSyllableFrames) / c::kSyllableStride + 1
                                  : 1;
  const double p = c::kSyllableNorm;

  std::vector<double> floored(n);
  for (std::size_t i = 0; i < n; ++i) floored[i] = std::max(v[i], c::kDisturbanceFloor);

  std::vector<double> window_norm(windows);
  double sum_sq = 0.0;
  for (std::size_t j = 0; j < windows; ++j) {
    const std::size_t start = j * c::kSyllableStride;
    double acc = 0.0;
    for (std::size_t i = start; i < start + len; ++i) acc += std::pow(floored[i], p);
    window_norm[j] = std::pow(acc / static_cast<double>(len), 1.0 / p);
    sum_sq += window_norm[j] * window_norm[j];
  }
  const double total = std::sqrt(sum_sq / static_cast<double>(windows));

  if (grad) {
    grad->assign(n, 0.0);
    for (std::size_t j = 0; j < windows; ++j) {
      const double g_win = window_norm[j] / (static_cast<double>(windows) * total);
      const double inv = 1.0 / window_norm[j];
      const std::size_t start = j * c::kSyllableStride;
      for (std::size_t i = start; i < start + len; ++i) {
        if (v[i] < c::kDisturbanceFloor) continue;
        // d/dv_i (mean v^6)^(1/6) = (v_i / norm)^5 / len
        (*grad)[i] += g_win * std::pow(floored[i] * inv, p - 1.0) / static_cast<double>(len);
      }
    }
  }
  return total;
}

double lqo_derivative(double raw) {
  const double e = std::exp(-c::kLqoSlope * raw + c::kLqoOffset);
  return (c::kLqoCeiling - c::kLqoFloor) * c::kLqoSlope * e / ((1.0 + e) * (1.0 + e));
}

}  // namespace detail

MosScore aggregate_mos(std::span<const double> symmetric, std::span<const double> asymmetric,
                       const MetricConfig& cfg, double reference_active_seconds) {
  if (symmetric.size() != asymmetric.size()) {
    throw ArgumentError("symmetric and asymmetric series differ in frame count");
  }
  if (symmetric.empty()) throw ArgumentError("cannot aggregate zero frames");
  MosScore s;
  s.d_symmetric = detail::aggregate_series(symmetric, nullptr);
  s.d_asymmetric = detail::aggregate_series(asymmetric, nullptr);
  s.raw = c::kRawMosOffset - c::kSymmetricWeight * s.d_symmetric -
          c::kAsymmetricWeight * s.d_asymmetric;
  s.value = map_raw_mos(s.raw, cfg.mos_mapping);
  s.support = reference_active_seconds >= c::kMinActiveSpeechSeconds;
  if (!s.support) {
    char buf[160];
    std::snprintf(buf, sizeof buf,
                  "reference has %.2f s of active speech; at least %.1f s is recommended",
                  reference_active_seconds, c::kMinActiveSpeechSeconds);
    s.warnings.emplace_back(buf);
  }
  return s;
}

}  // namespace pesqlab
