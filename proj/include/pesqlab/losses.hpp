#pragma once

#include <span>
#include <vector>

#include "pesqlab/audio_io.hpp"
#include "pesqlab/quality_metric.hpp"

namespace pesqlab {

struct LossConfig {
  double alpha = 0.9;      // weight of the metric term
  double beta = 0.5;       // scale of the SI-SDR term
  double cap_db = 100.0;   // SI-SDR saturation bound

  void validate() const;
};

// 1/2 sum_i (s_i - s_hat_i)^2, unnormalized.
double mse_loss(const UtterancePair& pair);

// Scale-invariant SDR in dB, clamped to [-cap_db, cap_db]. An estimate
// exactly proportional to the reference gives +cap_db.
double si_sdr(const UtterancePair& pair, double cap_db = 100.0);
double si_sdr(std::span<const double> reference, std::span<const double> estimate,
              double cap_db = 100.0);

// max_mapping_value - metric: non-negative, zero at the quality ceiling.
double torchpesq_loss(const UtterancePair& pair, const MetricConfig& cfg);

// alpha * torchpesq_loss + (1 - alpha) * beta * si_sdr. Minimizing it raises
// the metric while lowering SI-SDR.
double combined_loss(const UtterancePair& pair, const LossConfig& lc, const MetricConfig& mc);

// SI-SDR with its gradient with respect to the estimate (zero when clamped).
struct SiSdrGradient {
  double value = 0;
  std::vector<double> grad;
};
SiSdrGradient si_sdr_with_gradient(std::span<const double> reference,
                                   std::span<const double> estimate, double cap_db);

}  // namespace pesqlab
