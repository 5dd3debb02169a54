#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

#include "pesqlab/audio_io.hpp"

namespace pesqlab {

// Dense row-major matrix; rows are frames, columns are bins or bands.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}

  double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
  std::span<double> row(std::size_t r) { return {data.data() + r * cols, cols}; }
  std::span<const double> row(std::size_t r) const { return {data.data() + r * cols, cols}; }

  friend bool operator==(const Matrix&, const Matrix&) = default;
};

// ---------------------------------------------------------------------------
// Windows and short-time transform

// Zero-endpoint ("periodic") Hann: w[k] = 0.5 - 0.5 cos(2 pi k / n), w[0] == 0.
std::vector<double> hann_window(std::size_t n);

enum class WindowKind { hann_zero_endpoint };

struct StftConfig {
  std::size_t fft_size = 512;
  std::size_t hop = 256;
  WindowKind window = WindowKind::hann_zero_endpoint;
  // Pads fft_size/2 zeros on both sides before framing.
  bool center_padding = false;

  void validate() const;
};

// Number of full frames; partial tail frames are dropped.
std::size_t stft_frame_count(std::size_t signal_length, const StftConfig& cfg);

// Frame-by-bin power |DFT(w * frame)|^2 for bins 0..fft_size/2.
Matrix stft_power(std::span<const double> x, const StftConfig& cfg);
inline Matrix stft_power(const Waveform& x, const StftConfig& cfg) {
  return stft_power(x.samples(), cfg);
}

// Short-time analyzer with cached window and FFT plans. Also provides the
// adjoint of the power map and weighted overlap-add synthesis.
class Stft {
 public:
  explicit Stft(StftConfig cfg);

  const StftConfig& config() const { return cfg_; }
  const std::vector<double>& window() const { return window_; }
  std::size_t bins() const { return cfg_.fft_size / 2 + 1; }
  std::size_t frames(std::size_t signal_length) const;

  // Complex spectra, one row of bins() values per frame.
  std::vector<std::vector<std::complex<double>>> analyze(std::span<const double> x) const;

  static Matrix power(const std::vector<std::vector<std::complex<double>>>& spectra);

  // Given the spectra of x and dLoss/dPower, returns dLoss/dx.
  std::vector<double> power_adjoint(const std::vector<std::vector<std::complex<double>>>& spectra,
                                    const Matrix& grad_power, std::size_t signal_length) const;

  // Weighted overlap-add: sum_t w * ifft(X_t) / sum_t w^2. Samples with zero
  // window coverage are set to 0.
  std::vector<double> synthesize(const std::vector<std::vector<std::complex<double>>>& spectra,
                                 std::size_t signal_length) const;

 private:
  StftConfig cfg_;
  std::vector<double> window_;
};

// ---------------------------------------------------------------------------
// IIR filtering

struct BiquadSection {
  double b0 = 1, b1 = 0, b2 = 0, a1 = 0, a2 = 0;
  bool stable() const;
};

struct BiquadCascade {
  std::vector<BiquadSection> sections;

  // Empty cascade is the identity.
  bool is_identity() const { return sections.empty(); }
  void validate() const;
};

// Direct-form transposed-II, zero initial state, output length == input length.
std::vector<double> biquad_filter(std::span<const double> x, const BiquadCascade& f);
Waveform biquad_filter(const Waveform& x, const BiquadCascade& f);

// Transpose of the (finite-length) filter operator: reverse, filter, reverse.
std::vector<double> biquad_filter_adjoint(std::span<const double> g, const BiquadCascade& f);

// Complex frequency response at `freq_hz`.
std::complex<double> frequency_response(const BiquadCascade& f, double freq_hz, double fs_hz);

// Digital Butterworth bandpass from an analog prototype of `prototype_order`
// poles (filter order 2 * prototype_order), bilinear transform with
// pre-warped edges. One biquad per conjugate pole pair.
BiquadCascade butterworth_bandpass(int prototype_order, double low_hz, double high_hz,
                                   double fs_hz);

// 4th-order Butterworth bandpass, 325-3250 Hz: the level-alignment filter.
BiquadCascade level_alignment_bandpass(int fs_hz = kDefaultSampleRate);

// ---------------------------------------------------------------------------
// Statistics

struct OrderStatistic {
  double value = 0;
  std::size_t index = 0;  // position of the selected sample in the input
};

// Nearest-rank p-quantile of {x_i^2}: the element of rank ceil(p N) - 1 in
// ascending order (clamped to [0, N-1]).
OrderStatistic percentile_of_squares_at(std::span<const double> x, double p);
double percentile_of_squares(std::span<const double> x, double p);

inline constexpr double kActiveSpeechThresholdDb = -35.0;
inline constexpr double kActiveSpeechFrameSeconds = 0.020;

// Total duration of 20 ms frames whose RMS exceeds the global RMS by
// `threshold_db` (negative: below it). Silent signal gives 0.
double active_speech_seconds(const Waveform& x, double threshold_db = kActiveSpeechThresholdDb);

}  // namespace pesqlab
