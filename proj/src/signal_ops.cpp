#include <algorithm>
#include <cmath>
#include <numeric>

#include "pesqlab/errors.hpp"
#include "pesqlab/signal_ops.hpp"

namespace pesqlab {

OrderStatistic percentile_of_squares_at(std::span<const double> x, double p) {
  if (x.empty()) throw ArgumentError("percentile of an empty sequence");
  if (!(p >= 0.0 && p <= 1.0)) throw ArgumentError("percentile fraction must lie in [0, 1]");
  const std::size_t n = x.size();
  auto rank = static_cast<std::ptrdiff_t>(std::ceil(p * static_cast<double>(n))) - 1;
  rank = std::clamp<std::ptrdiff_t>(rank, 0, static_cast<std::ptrdiff_t>(n) - 1);

  // Sort indices by (square, index) so the selected sample is deterministic
  // under ties.
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  auto less = [&x](std::size_t a, std::size_t b) {
    const double sa = x[a] * x[a];
    const double sb = x[b] * x[b];
    return sa < sb || (sa == sb && a < b);
  };
  std::nth_element(order.begin(), order.begin() + rank, order.end(), less);
  const std::size_t idx = order[static_cast<std::size_t>(rank)];
  return {x[idx] * x[idx], idx};
}

double percentile_of_squares(std::span<const double> x, double p) {
  return percentile_of_squares_at(x, p).value;
}

double active_speech_seconds(const Waveform& x, double threshold_db) {
  const auto s = x.samples();
  const double energy = std::inner_product(s.begin(), s.end(), s.begin(), 0.0);
  if (energy == 0.0) return 0.0;
  const double global_rms = std::sqrt(energy / static_cast<double>(s.size()));
  const double threshold = global_rms * std::pow(10.0, threshold_db / 20.0);

  const auto frame_len =
      static_cast<std::size_t>(std::lround(kActiveSpeechFrameSeconds * x.sample_rate_hz()));
  std::size_t active = 0;
  for (std::size_t start = 0; start + frame_len <= s.size(); start += frame_len) {
    double e = 0.0;
    for (std::size_t i = start; i < start + frame_len; ++i) e += s[i] * s[i];
    if (std::sqrt(e / static_cast<double>(frame_len)) > threshold) ++active;
  }
  return static_cast<double>(active) * kActiveSpeechFrameSeconds;
}

}  // namespace pesqlab
