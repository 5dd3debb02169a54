#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "pesqlab/audio_io.hpp"
#include "pesqlab/losses.hpp"
#include "pesqlab/quality_metric.hpp"

namespace pesqlab {

enum class LossKind { mse, sisdr, torchpesq, combined };

std::string to_string(LossKind k);
LossKind parse_loss_kind(const std::string& s);  // mse|sisdr|torchpesq|combined

// A loss selector with the configs it needs.
struct LossSpec {
  LossKind kind = LossKind::torchpesq;
  MetricConfig metric;
  LossConfig loss;
};

// Forward-only loss value.
double evaluate_loss(const LossSpec& spec, const UtterancePair& pair);

struct GradResult {
  double loss = 0;
  std::vector<double> grad;  // d loss / d degraded sample
};

// loss equals evaluate_loss(spec, pair) exactly.
GradResult loss_and_grad(const LossSpec& spec, const UtterancePair& pair);

struct FiniteDiffReport {
  double max_relative_error = 0;
  std::vector<std::size_t> probed;
  std::vector<double> analytic;
  std::vector<double> numeric;
};

// Central differences (L(x+h) - L(x-h)) / 2h at `n_probes` distinct random
// sample indices, compared with the analytic gradient. Relative error uses
// max(|analytic|, |numeric|, 1e-12) as denominator.
FiniteDiffReport finite_diff_check(const LossSpec& spec, const UtterancePair& pair,
                                   std::size_t n_probes, double step, std::uint64_t seed = 0);

// Tolerance of finite_diff_check per loss (mse 1e-9, sisdr 1e-5, metric 1e-3).
double gradcheck_tolerance(LossKind kind);
// Probe step per loss.
double gradcheck_step(LossKind kind);

struct AdamState {
  std::vector<double> first_moment;
  std::vector<double> second_moment;
  std::uint64_t step_count = 0;
  double lr = 1e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  explicit AdamState(std::size_t n = 0, double learning_rate = 1e-5)
      : first_moment(n, 0.0), second_moment(n, 0.0), lr(learning_rate) {}
};

// One bias-corrected Adam update of params in place.
void adam_step(std::span<double> params, std::span<const double> grad, AdamState& state);

}  // namespace pesqlab
