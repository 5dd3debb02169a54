#include "pesqlab/losses.hpp"

#include <cmath>
#include <numbers>
#include <numeric>

#include "pesqlab/errors.hpp"

namespace pesqlab {

void LossConfig::validate() const {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw ConfigError("alpha must lie in [0, 1]");
  if (!(beta > 0.0)) throw ConfigError("beta must be positive");
  if (!(cap_db > 0.0)) throw ConfigError("cap_db must be positive");
}

double mse_loss(const UtterancePair& pair) {
  const auto s = pair.reference.samples();
  const auto e = pair.degraded.samples();
  if (s.size() != e.size()) throw ValidationError("mse on pairs of unequal length");
  double acc = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const double d = s[i] - e[i];
    acc += d * d;
  }
  return 0.5 * acc;
}

SiSdrGradient si_sdr_with_gradient(std::span<const double> s, std::span<const double> x,
                                   double cap_db) {
  if (s.size() != x.size()) throw ValidationError("si_sdr on signals of unequal length");
  const double ss = std::inner_product(s.begin(), s.end(), s.begin(), 0.0);
  if (ss == 0.0) throw ArgumentError("si_sdr reference is all zero");

  const std::size_t n = s.size();
  const double xs = std::inner_product(x.begin(), x.end(), s.begin(), 0.0);
  const double g = xs / ss;
  std::vector<double> residual(n);
  double target_energy = 0.0, residual_energy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double t = g * s[i];
    residual[i] = t - x[i];
    target_energy += t * t;
    residual_energy += residual[i] * residual[i];
  }

  SiSdrGradient out;
  out.grad.assign(n, 0.0);
  if (residual_energy == 0.0) {
    out.value = cap_db;
    return out;
  }
  if (target_energy == 0.0) {
    out.value = -cap_db;
    return out;
  }
  const double value = 10.0 * std::log10(target_energy / residual_energy);
  if (value >= cap_db) {
    out.value = cap_db;
    return out;
  }
  if (value <= -cap_db) {
    out.value = -cap_db;
    return out;
  }
  out.value = value;

  // target_energy = <x,s>^2/<s,s>, so d/dx = 2 g s.
  // residual r = P x - x with P the projection onto s; d|r|^2/dx = 2 (P r - r).
  const double rs = std::inner_product(residual.begin(), residual.end(), s.begin(), 0.0);
  const double scale = 10.0 / std::numbers::ln10;
  for (std::size_t i = 0; i < n; ++i) {
    const double d_target = 2.0 * g * s[i];
    const double d_residual = 2.0 * (rs / ss * s[i] - residual[i]);
    out.grad[i] = scale * (d_target / target_energy - d_residual / residual_energy);
  }
  return out;
}

double si_sdr(std::span<const double> reference, std::span<const double> estimate, double cap_db) {
  return si_sdr_with_gradient(reference, estimate, cap_db).value;
}

double si_sdr(const UtterancePair& pair, double cap_db) {
  return si_sdr(pair.reference.samples(), pair.degraded.samples(), cap_db);
}

double torchpesq_loss(const UtterancePair& pair, const MetricConfig& cfg) {
  return max_mapping_value(cfg.mos_mapping) - compute_metric(pair, cfg).value;
}

double combined_loss(const UtterancePair& pair, const LossConfig& lc, const MetricConfig& mc) {
  lc.validate();
  const double metric_term = lc.alpha > 0.0 ? torchpesq_loss(pair, mc) : 0.0;
  const double sdr_term = lc.alpha < 1.0 ? si_sdr(pair, lc.cap_db) : 0.0;
  return lc.alpha * metric_term + (1.0 - lc.alpha) * lc.beta * sdr_term;
}

}  // namespace pesqlab
