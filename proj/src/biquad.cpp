#include <algorithm>
#include <cmath>
#include <numbers>

#include "pesqlab/errors.hpp"
#include "pesqlab/signal_ops.hpp"

namespace pesqlab {

bool BiquadSection::stable() const {
  // Jury conditions for 1 + a1 z^-1 + a2 z^-2.
  return std::abs(a2) < 1.0 && std::abs(a1) < 1.0 + a2;
}

void BiquadCascade::validate() const {
  for (std::size_t i = 0; i < sections.size(); ++i) {
    if (!sections[i].stable()) {
      throw ConfigError("biquad section " + std::to_string(i) +
                        " is unstable (poles on or outside the unit circle)");
    }
  }
}

std::vector<double> biquad_filter(std::span<const double> x, const BiquadCascade& f) {
  f.validate();
  std::vector<double> y(x.begin(), x.end());
  for (const auto& s : f.sections) {
    double z1 = 0.0, z2 = 0.0;
    for (double& v : y) {
      const double in = v;
      const double out = s.b0 * in + z1;
      z1 = s.b1 * in - s.a1 * out + z2;
      z2 = s.b2 * in - s.a2 * out;
      v = out;
    }
  }
  return y;
}

Waveform biquad_filter(const Waveform& x, const BiquadCascade& f) {
  return x.with_samples(biquad_filter(x.samples(), f));
}

std::vector<double> biquad_filter_adjoint(std::span<const double> g, const BiquadCascade& f) {
  std::vector<double> rev(g.rbegin(), g.rend());
  auto out = biquad_filter(std::span<const double>(rev), f);
  std::reverse(out.begin(), out.end());
  return out;
}

std::complex<double> frequency_response(const BiquadCascade& f, double freq_hz, double fs_hz) {
  const std::complex<double> zi = std::polar(1.0, -2.0 * std::numbers::pi * freq_hz / fs_hz);
  std::complex<double> h = 1.0;
  for (const auto& s : f.sections) {
    h *= (s.b0 + s.b1 * zi + s.b2 * zi * zi) / (1.0 + s.a1 * zi + s.a2 * zi * zi);
  }
  return h;
}

BiquadCascade butterworth_bandpass(int prototype_order, double low_hz, double high_hz,
                                   double fs_hz) {
  if (prototype_order < 1) throw ArgumentError("butterworth order must be >= 1");
  if (!(0.0 < low_hz && low_hz < high_hz && high_hz < fs_hz / 2.0)) {
    throw ArgumentError("bandpass edges must satisfy 0 < low < high < fs/2");
  }
  using cd = std::complex<double>;
  const double pi = std::numbers::pi;
  const double fs2 = 2.0 * fs_hz;
  const double w_lo = fs2 * std::tan(pi * low_hz / fs_hz);
  const double w_hi = fs2 * std::tan(pi * high_hz / fs_hz);
  const double bw = w_hi - w_lo;
  const double w0_sq = w_lo * w_hi;
  const int n = prototype_order;

  // Analog lowpass prototype poles, then lowpass-to-bandpass: each prototype
  // pole p becomes the two roots of s^2 - p bw s + w0^2.
  std::vector<cd> analog_poles;
  for (int k = 0; k < n; ++k) {
    const cd p = std::polar(1.0, pi * (2.0 * k + n + 1) / (2.0 * n));
    const cd disc = std::sqrt(p * p * bw * bw - 4.0 * w0_sq);
    analog_poles.push_back((p * bw + disc) / 2.0);
    analog_poles.push_back((p * bw - disc) / 2.0);
  }

  // Bilinear transform. The bandpass has n zeros at s = 0 (z = 1) and n at
  // infinity (z = -1); gain follows from the analog gain bw^n.
  cd gain = std::pow(bw, n);
  std::vector<cd> poles;
  for (const cd& s : analog_poles) {
    poles.push_back((fs2 + s) / (fs2 - s));
    gain /= (fs2 - s);
  }
  gain *= std::pow(fs2, n);

  // Keep the upper-half-plane member of each conjugate pair.
  std::vector<cd> upper;
  for (const cd& p : poles) {
    if (p.imag() > 0.0) upper.push_back(p);
  }
  if (static_cast<int>(upper.size()) != n) {
    throw ArgumentError("bandpass design produced real poles; edges too close");
  }
  std::sort(upper.begin(), upper.end(),
            [](const cd& a, const cd& b) { return std::abs(a) < std::abs(b); });

  const double section_gain = std::pow(gain.real(), 1.0 / n);
  BiquadCascade out;
  for (const cd& p : upper) {
    BiquadSection s;
    s.b0 = section_gain;
    s.b1 = 0.0;
    s.b2 = -section_gain;
    s.a1 = -2.0 * p.real();
    s.a2 = std::norm(p);
    out.sections.push_back(s);
  }
  out.validate();
  return out;
}

BiquadCascade level_alignment_bandpass(int fs_hz) {
  return butterworth_bandpass(2, 325.0, 3250.0, static_cast<double>(fs_hz));
}

}  // namespace pesqlab
