#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "pesqlab/audio_io.hpp"
#include "pesqlab/quality_metric.hpp"

namespace pesqlab {

struct ClickConfig {
  double value = 666.0;   // normalized amplitude, may exceed full scale
  std::size_t index = 0;
};

// Copy of x with samples[index] = value. Throws ArgumentError when index is
// outside the signal.
Waveform apply_click(const Waveform& x, const ClickConfig& cc);

// 60 log-spaced values from 1 to 1e4, ascending.
std::vector<double> default_click_grid();

struct ClickOutcome {
  std::string id;
  std::optional<double> best_c;  // empty: no grid value beats the unclicked score
  double metric_with_click = 0;  // equals metric_without when best_c is empty
  double metric_without = 0;
  std::optional<std::string> error;
};

struct ClickSearchResult {
  std::vector<ClickOutcome> per_utterance;  // input order
  std::optional<double> median_c;           // over utterances with a best_c
  double mean_metric = 0;                   // mean best metric over successful utterances
  double mean_baseline = 0;                 // mean unclicked metric over the same set
  std::size_t succeeded = 0;
  std::vector<std::string> warnings;

  double mean_delta() const { return mean_metric - mean_baseline; }
};

// Click at index 0 with every grid value; keeps the argmax, ties going to the
// smallest c. Per-utterance metric failures are recorded and excluded from
// the aggregates. jobs == 0 uses the hardware concurrency.
ClickSearchResult search_click(const std::vector<UtterancePair>& pairs, std::vector<double> grid,
                               const MetricConfig& cfg, std::size_t jobs = 1);

struct EstimatorRow {
  std::string id;
  LevelEstimator estimator;
  std::optional<double> best_c;
  double metric_base = 0;
  double metric_attacked = 0;
  double delta = 0;
  std::optional<std::string> error;
};

struct EstimatorComparison {
  std::vector<EstimatorRow> rows;  // per utterance: sum_of_squares row then percentile85 row
  ClickSearchResult sum_of_squares;
  ClickSearchResult percentile85;
  double max_delta_sum_of_squares = 0;
  double max_delta_percentile85 = 0;
  // Spearman correlation of the two estimators' unattacked scores, NaN when
  // fewer than two utterances succeed under both.
  double rank_correlation = 0;
};

// `cfg` supplies everything but the level estimator, which is set to each
// variant in turn.
EstimatorComparison compare_estimators(const std::vector<UtterancePair>& pairs,
                                       const std::vector<double>& grid, const MetricConfig& cfg,
                                       std::size_t jobs = 1);

// CSV: id,estimator,best_c,metric_base,metric_attacked,delta
std::string comparison_csv(const EstimatorComparison& cmp);
std::string click_search_csv(const ClickSearchResult& r, LevelEstimator estimator);

// Spearman rank correlation with average ranks for ties.
double spearman_correlation(const std::vector<double>& a, const std::vector<double>& b);

// Closest signal (least squares) whose 510-point Hann STFT, hop 128, has
// bins 0 and 1 exactly zero in every frame. Frames sit on a grid anchored at
// sample 0 and are zero-extended past the edges. Being an orthogonal
// projection, a second application changes nothing. Length is preserved.
std::vector<double> zero_low_bins(std::span<const double> x);

inline constexpr double kDeclickCropSeconds = 0.5;
// Below this output/input peak ratio the input had essentially no content
// outside the zeroed bins; rescaling would only amplify ripple.
inline constexpr double kDeclickResidualFloor = 1e-3;

// Crops the first 0.5 s, removes the two lowest bins and rescales to the
// peak of the cropped input. An output whose peak is below
// kDeclickResidualFloor of the input peak is returned unscaled.
Waveform declick_postprocess(const Waveform& x);

}  // namespace pesqlab
