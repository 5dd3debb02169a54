#pragma once

// Internals shared by the metric stages and their adjoints.

#include <cmath>
#include <span>
#include <vector>

#include "pesqlab/metric_constants.hpp"
#include "pesqlab/quality_metric.hpp"

namespace pesqlab::detail {

// Clipping primitives in hard or smooth form. relu(x) is max(x, 0) or the
// softplus log(1 + e^{kx}) / k; step(x) is [x > 0] or the logistic of kx.
struct Clip {
  bool smooth = false;
  double k = 100.0;

  double relu(double x) const {
    if (!smooth) return x > 0.0 ? x : 0.0;
    const double kx = k * x;
    return kx > 0.0 ? x + std::log1p(std::exp(-kx)) / k : std::log1p(std::exp(kx)) / k;
  }
  double relu_d(double x) const { return smooth ? sigmoid(x) : (x > 0.0 ? 1.0 : 0.0); }
  double step(double x) const { return smooth ? sigmoid(x) : (x > 0.0 ? 1.0 : 0.0); }
  double step_d(double x) const {
    if (!smooth) return 0.0;
    const double s = sigmoid(x);
    return k * s * (1.0 - s);
  }

 private:
  double sigmoid(double x) const {
    const double kx = k * x;
    if (kx >= 0.0) return 1.0 / (1.0 + std::exp(-kx));
    const double e = std::exp(kx);
    return e / (1.0 + e);
  }
};

inline Clip clip_for(const MetricConfig& cfg) {
  return Clip{cfg.clip_mode == ClipMode::smooth, cfg.sharpness};
}

// Total power of bands above `factor` x hearing threshold, with the gate in
// hard or smooth form.
double audible_power(std::span<const double> bands, double factor, const Clip& clip);
// d audible_power / d bands[b].
double audible_power_d(double power, std::size_t band, double factor, const Clip& clip);

double band_loudness_d(double power, std::size_t band);

struct EqualizeTrace {
  std::vector<char> silent;
  std::vector<double> mean_ref;
  std::vector<double> mean_deg;
  std::vector<double> band_ratio_raw;
  std::vector<double> band_ratio;
  std::vector<double> audible_ref;
  std::vector<double> audible_deg;
  std::vector<double> frame_ratio_raw;
  std::vector<double> frame_ratio_smoothed;
  std::vector<double> frame_ratio;
};

EqualizedBands equalize_forward(const Matrix& ref_bands, const Matrix& deg_bands,
                                const MetricConfig& cfg, EqualizeTrace* trace);

// Gradient with respect to the degraded band powers, given gradients with
// respect to both equalized outputs.
Matrix equalize_backward(const Matrix& ref_bands, const Matrix& deg_bands,
                         const EqualizeTrace& trace, const MetricConfig& cfg,
                         const Matrix& grad_eq_ref, const Matrix& grad_eq_deg);

struct FrameGrad {
  std::vector<double> ref_loudness;
  std::vector<double> deg_loudness;
  std::vector<double> ref_power;
  std::vector<double> deg_power;
};

void frame_disturbance_backward(std::span<const double> ref_loudness,
                                std::span<const double> deg_loudness,
                                std::span<const double> ref_power,
                                std::span<const double> deg_power, const MetricConfig& cfg,
                                double grad_symmetric, double grad_asymmetric, FrameGrad& out);

// Time aggregation of one disturbance series (floored at 1e-20); the
// gradient, when requested, is with respect to the unfloored inputs.
double aggregate_series(std::span<const double> v, std::vector<double>* grad);

double lqo_derivative(double raw);

}  // namespace pesqlab::detail
