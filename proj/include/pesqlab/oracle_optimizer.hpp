#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "pesqlab/audio_io.hpp"
#include "pesqlab/grad_engine.hpp"
#include "pesqlab/losses.hpp"
#include "pesqlab/quality_metric.hpp"

namespace pesqlab {

struct OptimConfig {
  std::size_t iterations = 25000;
  double lr = 1e-5;
  std::size_t freeze_head = 400;
  std::size_t freeze_tail = 400;
  LossKind loss = LossKind::torchpesq;  // torchpesq or combined
  std::size_t trace_every = 50;

  void validate(std::size_t signal_length) const;
};

struct TraceRow {
  std::size_t iteration = 0;  // number of updates applied
  double loss = 0;            // optimized (smooth-mode) loss
  double metric = 0;          // hard-mode score, as standalone evaluation reports it
  double si_sdr = 0;
};

struct OptimTrace {
  std::vector<TraceRow> rows;
  // Set when a numeric failure stopped the run; the iteration is the update
  // that could not be computed.
  std::optional<std::size_t> failed_at;
  std::string failure;
};

struct OptimResult {
  Waveform optimized;
  OptimTrace trace;
};

// Adam on the degraded samples, initialized from pair.degraded. Gradient
// entries in the frozen head and tail are zeroed before each update. The loss
// is evaluated in smooth mode; trace metrics in hard mode.
OptimResult oracle_optimize(const UtterancePair& pair, const OptimConfig& oc,
                            const MetricConfig& mc, const LossConfig& lc);

// CSV `iteration,loss,metric,si_sdr` with 17 significant digits.
void export_trace(const OptimTrace& trace, const std::filesystem::path& path);
std::string trace_csv(const OptimTrace& trace);
OptimTrace read_trace(const std::filesystem::path& path);

// Pearson correlation of two equally long series; NaN if either is constant.
double pearson_correlation(const std::vector<double>& a, const std::vector<double>& b);

}  // namespace pesqlab
