#include <cmath>
#include <numeric>

#include "metric_detail.hpp"
#include "pesqlab/errors.hpp"
#include "pesqlab/metric_constants.hpp"
#include "pesqlab/quality_metric.hpp"

namespace pesqlab {

namespace c = constants;

namespace {

using Spectra = std::vector<std::vector<std::complex<double>>>;

const Stft& metric_stft() {
  static const Stft stft(StftConfig{c::kFrameSize, c::kFrameHop, WindowKind::hann_zero_endpoint,
                                    false});
  return stft;
}

void check_finite(const Matrix& m, const char* stage) {
  for (double v : m.data) {
    if (!std::isfinite(v)) throw NumericError(stage, "matrix entry is not finite");
  }
}

void check_finite(double v, const char* stage) {
  if (!std::isfinite(v)) throw NumericError(stage, "value is not finite");
}

// Level alignment of one signal with what the adjoint needs.
struct AlignedSignal {
  std::vector<double> filtered;
  double level = 0;
  std::size_t level_index = 0;  // selected sample for the percentile estimator
  double gain = 0;
  std::vector<double> aligned;
};

AlignedSignal align_one(std::span<const double> x, const MetricConfig& cfg,
                        const BiquadCascade& bandpass, const char* which) {
  AlignedSignal s;
  s.filtered = biquad_filter(x, bandpass);
  if (cfg.level_estimator == LevelEstimator::sum_of_squares) {
    s.level = std::inner_product(s.filtered.begin(), s.filtered.end(), s.filtered.begin(), 0.0) /
              static_cast<double>(s.filtered.size());
  } else {
    const auto os = percentile_of_squares_at(s.filtered, c::kPercentileFraction);
    s.level = os.value;
    s.level_index = os.index;
  }
  if (!(s.level > 0.0)) {
    throw DegenerateLevelError(std::string(which) + " signal level estimate is zero (" +
                               to_string(cfg.level_estimator) + "); cannot normalize");
  }
  check_finite(s.level, "level");
  s.gain = std::sqrt(cfg.target_level / s.level);
  s.aligned.assign(x.begin(), x.end());
  for (double& v : s.aligned) v *= s.gain;
  return s;
}

// Every intermediate of one metric evaluation.
struct Tape {
  AlignedSignal ref, deg;
  Spectra ref_spectra, deg_spectra;
  Matrix ref_bands, deg_bands;
  detail::EqualizeTrace eq_trace;
  EqualizedBands eq;
  Matrix ref_loud, deg_loud;
  std::vector<double> sym, asym;
  MosScore score;
};

Tape run_forward(const UtterancePair& pair, const MetricConfig& cfg) {
  cfg.validate();
  if (pair.reference.sample_rate_hz() != cfg.sample_rate_hz ||
      pair.degraded.sample_rate_hz() != cfg.sample_rate_hz) {
    throw ConfigError("pair sample rate does not match the metric configuration");
  }
  if (pair.reference.size() != pair.degraded.size()) {
    throw ValidationError("pair '" + pair.id + "' has unequal lengths");
  }
  const auto bandpass = level_alignment_bandpass(cfg.sample_rate_hz);
  const Stft& stft = metric_stft();

  Tape tp;
  tp.ref = align_one(pair.reference.samples(), cfg, bandpass, "reference");
  tp.deg = align_one(pair.degraded.samples(), cfg, bandpass, "degraded");

  tp.ref_spectra = stft.analyze(tp.ref.aligned);
  tp.deg_spectra = stft.analyze(tp.deg.aligned);
  tp.ref_bands = bark_band_powers(Stft::power(tp.ref_spectra));
  tp.deg_bands = bark_band_powers(Stft::power(tp.deg_spectra));
  check_finite(tp.deg_bands, "bark");

  tp.eq = detail::equalize_forward(tp.ref_bands, tp.deg_bands, cfg, &tp.eq_trace);
  tp.ref_loud = loudness_from_band_powers(tp.eq.reference);
  tp.deg_loud = loudness_from_band_powers(tp.eq.degraded);
  check_finite(tp.deg_loud, "loudness");

  const std::size_t frames = tp.ref_bands.rows;
  tp.sym.resize(frames);
  tp.asym.resize(frames);
  for (std::size_t t = 0; t < frames; ++t) {
    const auto d = frame_disturbance(tp.ref_loud.row(t), tp.deg_loud.row(t),
                                     tp.eq.reference.row(t), tp.eq.degraded.row(t), cfg);
    tp.sym[t] = d.symmetric;
    tp.asym[t] = d.asymmetric;
  }
  tp.score = aggregate_mos(tp.sym, tp.asym, cfg, active_speech_seconds(pair.reference));
  check_finite(tp.score.value, "mos");
  return tp;
}

}  // namespace

MosScore compute_metric(const UtterancePair& pair, const MetricConfig& cfg) {
  return run_forward(pair, cfg).score;
}

MetricGradient compute_metric_with_gradient(const UtterancePair& pair, const MetricConfig& cfg) {
  Tape tp = run_forward(pair, cfg);
  const std::size_t frames = tp.ref_bands.rows;
  const std::size_t bands = c::kBarkBands;

  // MOS mapping and time aggregation.
  const double g_raw =
      cfg.mos_mapping == MosMapping::raw ? 1.0 : detail::lqo_derivative(tp.score.raw);
  std::vector<double> g_sym_series, g_asym_series;
  detail::aggregate_series(tp.sym, &g_sym_series);
  detail::aggregate_series(tp.asym, &g_asym_series);
  const double g_d_sym = -c::kSymmetricWeight * g_raw;
  const double g_d_asym = -c::kAsymmetricWeight * g_raw;

  // Per-frame disturbance back to loudness and equalized powers.
  Matrix g_eq_ref(frames, bands), g_eq_deg(frames, bands);
  detail::FrameGrad fg;
  for (std::size_t t = 0; t < frames; ++t) {
    const double gs = g_d_sym * g_sym_series[t];
    const double ga = g_d_asym * g_asym_series[t];
    if (gs == 0.0 && ga == 0.0) continue;
    detail::frame_disturbance_backward(tp.ref_loud.row(t), tp.deg_loud.row(t),
                                       tp.eq.reference.row(t), tp.eq.degraded.row(t), cfg, gs,
                                       ga, fg);
    for (std::size_t b = 0; b < bands; ++b) {
      g_eq_ref(t, b) = fg.ref_power[b] +
                       fg.ref_loudness[b] * detail::band_loudness_d(tp.eq.reference(t, b), b);
      g_eq_deg(t, b) = fg.deg_power[b] +
                       fg.deg_loudness[b] * detail::band_loudness_d(tp.eq.degraded(t, b), b);
    }
  }

  // Equalization back to degraded band powers, then Bark pooling back to bins.
  const Matrix g_deg_bands =
      detail::equalize_backward(tp.ref_bands, tp.deg_bands, tp.eq_trace, cfg, g_eq_ref, g_eq_deg);
  Matrix g_power(frames, c::kFrameSize / 2 + 1);
  for (std::size_t t = 0; t < frames; ++t) {
    std::size_t bin = 0;
    for (std::size_t b = 0; b < bands; ++b) {
      const double scale = c::kPowerDensityCorrection[b] * c::kPowerScale;
      for (int i = 0; i < c::kBinsPerBand[b]; ++i, ++bin) {
        if (bin != 0) g_power(t, bin) = g_deg_bands(t, b) * scale;
      }
    }
  }

  // STFT power, then level alignment (gain depends on the signal itself),
  // then the bandpass inside the level estimate.
  const auto g_aligned =
      metric_stft().power_adjoint(tp.deg_spectra, g_power, pair.degraded.size());
  const auto x = pair.degraded.samples();
  const std::size_t n = x.size();
  std::vector<double> grad(n);
  double g_gain = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    grad[i] = tp.deg.gain * g_aligned[i];
    g_gain += g_aligned[i] * x[i];
  }
  const double g_level = -g_gain * tp.deg.gain / (2.0 * tp.deg.level);
  std::vector<double> g_filtered(n, 0.0);
  if (cfg.level_estimator == LevelEstimator::sum_of_squares) {
    for (std::size_t i = 0; i < n; ++i) {
      g_filtered[i] = g_level * 2.0 * tp.deg.filtered[i] / static_cast<double>(n);
    }
  } else {
    g_filtered[tp.deg.level_index] = g_level * 2.0 * tp.deg.filtered[tp.deg.level_index];
  }
  const auto g_x = biquad_filter_adjoint(g_filtered, level_alignment_bandpass(cfg.sample_rate_hz));
  for (std::size_t i = 0; i < n; ++i) {
    grad[i] += g_x[i];
    if (!std::isfinite(grad[i])) {
      throw NumericError("gradient", "non-finite derivative at sample " + std::to_string(i));
    }
  }
  return MetricGradient{std::move(tp.score), std::move(grad)};
}

}  // namespace pesqlab
