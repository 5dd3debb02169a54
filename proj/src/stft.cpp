#include <fftw3.h>

#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>

#include "pesqlab/errors.hpp"
#include "pesqlab/signal_ops.hpp"

namespace pesqlab {

namespace {

// FFTW plans for one transform size. Planning is not thread-safe in FFTW, so
// plans are created once under a lock; the new-array execute functions used
// below are safe to call concurrently.
struct FftPlans {
  fftw_plan forward = nullptr;
  fftw_plan inverse = nullptr;

  explicit FftPlans(std::size_t n) {
    const int size = static_cast<int>(n);
    std::vector<double> re(n);
    std::vector<fftw_complex> cx(n / 2 + 1);
    const unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
    forward = fftw_plan_dft_r2c_1d(size, re.data(), cx.data(), flags);
    inverse = fftw_plan_dft_c2r_1d(size, cx.data(), re.data(), flags);
  }
  ~FftPlans() {
    fftw_destroy_plan(forward);
    fftw_destroy_plan(inverse);
  }
  FftPlans(const FftPlans&) = delete;
  FftPlans& operator=(const FftPlans&) = delete;
};

const FftPlans& plans_for(std::size_t n) {
  static std::mutex mu;
  static std::map<std::size_t, std::unique_ptr<FftPlans>> cache;
  std::lock_guard lock(mu);
  auto& slot = cache[n];
  if (!slot) slot = std::make_unique<FftPlans>(n);
  return *slot;
}

void forward_fft(const FftPlans& p, std::vector<double>& in, std::vector<std::complex<double>>& out) {
  fftw_execute_dft_r2c(p.forward, in.data(), reinterpret_cast<fftw_complex*>(out.data()));
}

// Unnormalized Hermitian inverse; `in` is clobbered.
void inverse_fft(const FftPlans& p, std::vector<std::complex<double>>& in, std::vector<double>& out) {
  fftw_execute_dft_c2r(p.inverse, reinterpret_cast<fftw_complex*>(in.data()), out.data());
}

std::size_t padding(const StftConfig& cfg) { return cfg.center_padding ? cfg.fft_size / 2 : 0; }

}  // namespace

std::vector<double> hann_window(std::size_t n) {
  if (n < 2) throw ArgumentError("hann window length must be >= 2");
  std::vector<double> w(n);
  for (std::size_t k = 0; k < n; ++k) {
    w[k] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(k) /
                                static_cast<double>(n));
  }
  w[0] = 0.0;
  return w;
}

void StftConfig::validate() const {
  if (fft_size < 2) throw ConfigError("fft_size must be >= 2");
  if (hop == 0 || hop > fft_size) throw ConfigError("hop must be in [1, fft_size]");
}

std::size_t stft_frame_count(std::size_t signal_length, const StftConfig& cfg) {
  const std::size_t padded = signal_length + 2 * padding(cfg);
  if (padded < cfg.fft_size) return 0;
  return (padded - cfg.fft_size) / cfg.hop + 1;
}

Stft::Stft(StftConfig cfg) : cfg_(cfg) {
  cfg_.validate();
  window_ = hann_window(cfg_.fft_size);
  plans_for(cfg_.fft_size);
}

std::size_t Stft::frames(std::size_t signal_length) const {
  return stft_frame_count(signal_length, cfg_);
}

std::vector<std::vector<std::complex<double>>> Stft::analyze(std::span<const double> x) const {
  const std::size_t n_frames = frames(x.size());
  if (n_frames == 0) {
    throw ArgumentError("signal of " + std::to_string(x.size()) +
                        " samples is shorter than one frame of " +
                        std::to_string(cfg_.fft_size));
  }
  const auto& p = plans_for(cfg_.fft_size);
  const std::size_t n = cfg_.fft_size;
  const auto pad = static_cast<std::ptrdiff_t>(padding(cfg_));

  std::vector<std::vector<std::complex<double>>> out(n_frames,
                                                     std::vector<std::complex<double>>(bins()));
  std::vector<double> frame(n);
  for (std::size_t t = 0; t < n_frames; ++t) {
    const auto start = static_cast<std::ptrdiff_t>(t * cfg_.hop) - pad;
    for (std::size_t i = 0; i < n; ++i) {
      const auto idx = start + static_cast<std::ptrdiff_t>(i);
      const double v = (idx >= 0 && idx < static_cast<std::ptrdiff_t>(x.size())) ? x[idx] : 0.0;
      frame[i] = window_[i] * v;
    }
    forward_fft(p, frame, out[t]);
  }
  return out;
}

Matrix Stft::power(const std::vector<std::vector<std::complex<double>>>& spectra) {
  Matrix m(spectra.size(), spectra.empty() ? 0 : spectra.front().size());
  for (std::size_t t = 0; t < m.rows; ++t) {
    for (std::size_t k = 0; k < m.cols; ++k) m(t, k) = std::norm(spectra[t][k]);
  }
  return m;
}

std::vector<double> Stft::power_adjoint(
    const std::vector<std::vector<std::complex<double>>>& spectra, const Matrix& grad_power,
    std::size_t signal_length) const {
  // dP_k/dx_n = 2 Re(conj(X_k) w_n e^{-i 2 pi k n / N}), so the frame gradient
  // is w_n * 2 Re(sum_k g_k X_k e^{+i 2 pi k n / N}) over k = 0..N/2. A
  // Hermitian inverse of Z (Z_0, Z_{N/2} doubled) evaluates exactly twice
  // that real part.
  const auto& p = plans_for(cfg_.fft_size);
  const std::size_t n = cfg_.fft_size;
  const std::size_t nb = bins();
  const auto pad = static_cast<std::ptrdiff_t>(padding(cfg_));
  std::vector<double> grad(signal_length, 0.0);
  std::vector<std::complex<double>> z(nb);
  std::vector<double> frame(n);
  for (std::size_t t = 0; t < spectra.size(); ++t) {
    bool any = false;
    for (std::size_t k = 0; k < nb; ++k) {
      z[k] = grad_power(t, k) * spectra[t][k];
      any = any || grad_power(t, k) != 0.0;
    }
    if (!any) continue;
    z[0] *= 2.0;
    if (n % 2 == 0) z[nb - 1] *= 2.0;
    inverse_fft(p, z, frame);
    const auto start = static_cast<std::ptrdiff_t>(t * cfg_.hop) - pad;
    for (std::size_t i = 0; i < n; ++i) {
      const auto idx = start + static_cast<std::ptrdiff_t>(i);
      if (idx >= 0 && idx < static_cast<std::ptrdiff_t>(signal_length)) {
        grad[idx] += window_[i] * frame[i];
      }
    }
  }
  return grad;
}

std::vector<double> Stft::synthesize(const std::vector<std::vector<std::complex<double>>>& spectra,
                                     std::size_t signal_length) const {
  const auto& p = plans_for(cfg_.fft_size);
  const std::size_t n = cfg_.fft_size;
  const auto pad = static_cast<std::ptrdiff_t>(padding(cfg_));
  std::vector<double> acc(signal_length, 0.0);
  std::vector<double> norm(signal_length, 0.0);
  std::vector<std::complex<double>> z;
  std::vector<double> frame(n);
  for (std::size_t t = 0; t < spectra.size(); ++t) {
    z = spectra[t];
    inverse_fft(p, z, frame);
    const auto start = static_cast<std::ptrdiff_t>(t * cfg_.hop) - pad;
    for (std::size_t i = 0; i < n; ++i) {
      const auto idx = start + static_cast<std::ptrdiff_t>(i);
      if (idx < 0 || idx >= static_cast<std::ptrdiff_t>(signal_length)) continue;
      acc[idx] += window_[i] * frame[i] / static_cast<double>(n);
      norm[idx] += window_[i] * window_[i];
    }
  }
  for (std::size_t i = 0; i < signal_length; ++i) {
    acc[i] = norm[i] > 1e-12 ? acc[i] / norm[i] : 0.0;
  }
  return acc;
}

Matrix stft_power(std::span<const double> x, const StftConfig& cfg) {
  Stft stft(cfg);
  return Stft::power(stft.analyze(x));
}

}  // namespace pesqlab
