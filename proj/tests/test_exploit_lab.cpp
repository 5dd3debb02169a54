#include <gtest/gtest.h>

#include <algorithm>
#include <complex>
#include <numbers>

#include "pesqlab/errors.hpp"
#include "pesqlab/exploit_lab.hpp"
#include "pesqlab/signal_ops.hpp"
#include "pesqlab/synth.hpp"
#include "test_util.hpp"

using namespace pesqlab;
using pesqlab::testing::gaussian;
using pesqlab::testing::sine;

namespace {

std::vector<UtterancePair> small_corpus(std::size_t n, double seconds = 1.5) {
  SpeechProxyConfig sc;
  sc.seconds = seconds;
  return synth_noisy_corpus(n, sc, 0, 10, 21);
}

}  // namespace

TEST(ApplyClick, ReplacesOnlyTheIndex) {
  Waveform x(gaussian(1000, 1, 0.1));
  const auto y = apply_click(x, {666, 0});
  EXPECT_EQ(y[0], 666.0);
  EXPECT_TRUE(std::equal(x.samples().begin() + 1, x.samples().end(), y.samples().begin() + 1));
  EXPECT_EQ(apply_click(x, {x[5], 5}), x);
  Waveform z(std::vector<double>{0.0, 0.3, 0.1});
  EXPECT_EQ(apply_click(z, {0.0, 0}), z);
  EXPECT_THROW(apply_click(x, {1.0, 1000}), ArgumentError);
}

TEST(ApplyClick, RevertRestoresBitForBit) {
  Waveform x(gaussian(500, 2, 0.1));
  for (std::size_t idx : {0ul, 17ul, 499ul}) {
    EXPECT_EQ(apply_click(apply_click(x, {1e4, idx}), {x[idx], idx}), x);
  }
}

TEST(ClickGrid, DefaultIsSixtyLogSpaced) {
  const auto g = default_click_grid();
  ASSERT_EQ(g.size(), 60u);
  EXPECT_EQ(g.front(), 1.0);
  EXPECT_EQ(g.back(), 1e4);
  for (std::size_t i = 1; i < g.size(); ++i) {
    EXPECT_NEAR(std::log10(g[i]) - std::log10(g[i - 1]), 4.0 / 59.0, 1e-12);
  }
}

TEST(SearchClick, IdentityCorpusNeverImproves) {
  auto corpus = small_corpus(3);
  for (auto& p : corpus) p.degraded = p.reference;
  const auto r = search_click(corpus, default_click_grid(), MetricConfig{});
  for (const auto& o : r.per_utterance) {
    EXPECT_FALSE(o.best_c.has_value());
    EXPECT_EQ(o.metric_with_click, o.metric_without);
  }
  EXPECT_FALSE(r.median_c.has_value());
  EXPECT_EQ(r.mean_delta(), 0.0);
}

TEST(SearchClick, SingletonGridEqualsDirectEvaluation) {
  const auto corpus = small_corpus(2);
  const auto r = search_click(corpus, {666.0}, MetricConfig{});
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    const auto& p = corpus[i];
    const double direct =
        compute_metric({p.reference, apply_click(p.degraded, {666, 0}), p.id, {}}, MetricConfig{}).value;
    const double base = compute_metric(p, MetricConfig{}).value;
    EXPECT_EQ(r.per_utterance[i].metric_without, base);
    EXPECT_EQ(r.per_utterance[i].metric_with_click, std::max(direct, base));
  }
}

TEST(SearchClick, TiesGoToSmallestValue) {
  // Duplicated and unsorted values collapse to an ascending grid.
  const auto corpus = small_corpus(1);
  const auto a = search_click(corpus, {1000, 300, 1000, 300}, MetricConfig{});
  const auto b = search_click(corpus, {300, 1000}, MetricConfig{});
  EXPECT_EQ(a.per_utterance[0].best_c, b.per_utterance[0].best_c);
  EXPECT_THROW(search_click(corpus, {}, MetricConfig{}), ArgumentError);
}

TEST(SearchClick, FailuresAreExcludedWithWarning) {
  auto corpus = small_corpus(2);
  const auto& ref = corpus[1].reference;
  corpus[1].degraded = ref.with_samples(std::vector<double>(ref.size(), 0.0));
  const auto r = search_click(corpus, {666.0}, MetricConfig{});
  EXPECT_TRUE(r.per_utterance[1].error.has_value());
  EXPECT_EQ(r.succeeded, 1u);
  EXPECT_EQ(r.warnings.size(), 1u);
  EXPECT_EQ(r.mean_baseline, r.per_utterance[0].metric_without);
}

TEST(SearchClick, ParallelMatchesSequential) {
  const auto corpus = small_corpus(4, 1.0);
  const std::vector<double> grid = {10, 100, 666, 3000};
  const auto a = search_click(corpus, grid, MetricConfig{}, 1);
  const auto b = search_click(corpus, grid, MetricConfig{}, 3);
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    EXPECT_EQ(a.per_utterance[i].best_c, b.per_utterance[i].best_c);
    EXPECT_EQ(a.per_utterance[i].metric_with_click, b.per_utterance[i].metric_with_click);
  }
}

TEST(CompareEstimators, IdentityCorpusHasZeroDeltas) {
  auto corpus = small_corpus(3, 1.0);
  for (auto& p : corpus) p.degraded = p.reference;
  const auto c = compare_estimators(corpus, {100, 666}, MetricConfig{});
  EXPECT_EQ(c.rows.size(), 6u);
  for (const auto& r : c.rows) EXPECT_EQ(r.delta, 0.0);
}

TEST(CompareEstimators, CsvLayout) {
  const auto corpus = small_corpus(2, 1.0);
  const auto c = compare_estimators(corpus, {666}, MetricConfig{});
  const auto csv = comparison_csv(c);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "id,estimator,best_c,metric_base,metric_attacked,delta");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 5);
  EXPECT_NE(csv.find("percentile85"), std::string::npos);
}

TEST(CompareEstimators, RankCorrelationAcrossSnrs) {
  SpeechProxyConfig sc;
  sc.seconds = 1.5;
  const auto corpus = synth_noisy_corpus(50, sc, -5, 30, 33);
  const auto c = compare_estimators(corpus, {666}, MetricConfig{});
  EXPECT_GE(c.rank_correlation, 0.95);
}

TEST(Spearman, KnownValues) {
  EXPECT_NEAR(spearman_correlation({1, 2, 3, 4}, {10, 20, 30, 40}), 1.0, 1e-15);
  EXPECT_NEAR(spearman_correlation({1, 2, 3, 4}, {4, 3, 2, 1}), -1.0, 1e-15);
  EXPECT_NEAR(spearman_correlation({1, 2, 2, 3}, {1, 2, 2, 3}), 1.0, 1e-15);
  EXPECT_TRUE(std::isnan(spearman_correlation({1}, {2})));
}

TEST(Declick, CropArithmeticAndShortInput) {
  Waveform x(gaussian(64000, 4, 0.1));
  EXPECT_EQ(declick_postprocess(x).size(), 56000u);
  EXPECT_THROW(declick_postprocess(Waveform(gaussian(8000, 4))), ArgumentError);
}

TEST(Declick, DcOffsetVanishes) {
  Waveform x(std::vector<double>(32000, 0.4));
  const auto y = declick_postprocess(x);
  // 510/128 is not an exact overlap-add hop, so a tiny ripple survives.
  for (double v : y.samples()) EXPECT_LT(std::abs(v), 1e-4);
}

TEST(Declick, ClickEnergyRemovedAndPeakMatched) {
  SpeechProxyConfig sc;
  sc.seconds = 3;
  const auto s = synth_speech_proxy(sc, 5);
  const auto clicked = apply_click(s, {666, 0});
  const auto y = declick_postprocess(clicked);
  std::vector<double> mags;
  for (double v : y.samples()) mags.push_back(std::abs(v));
  const double peak = *std::max_element(mags.begin(), mags.end());
  std::nth_element(mags.begin(), mags.begin() + mags.size() * 99 / 100, mags.end());
  EXPECT_LE(peak, 3.0 * mags[mags.size() * 99 / 100]);
  double in_peak = 0;
  for (std::size_t i = 8000; i < s.size(); ++i) in_peak = std::max(in_peak, std::abs(s[i]));
  EXPECT_NEAR(peak, in_peak, 1e-12 * in_peak);
}

TEST(Declick, LowBinZeroingIsIdempotent) {
  auto x = gaussian(24000, 6, 0.1);
  const auto tone = sine(24000, 20, 0.3);
  for (std::size_t i = 0; i < x.size(); ++i) x[i] += tone[i];
  const auto once = zero_low_bins(x);
  const auto twice = zero_low_bins(once);
  double num = 0, den = 0;
  for (std::size_t i = 0; i < once.size(); ++i) {
    num += (twice[i] - once[i]) * (twice[i] - once[i]);
    den += once[i] * once[i];
  }
  EXPECT_LE(std::sqrt(num / den), 1e-6);
}

TEST(Declick, LowBinsAreZeroInEveryFrame) {
  auto x = gaussian(9000, 11, 0.2);
  for (std::size_t i = 0; i < x.size(); ++i) x[i] += 0.5;
  const auto y = zero_low_bins(x);
  const auto w = hann_window(510);
  double scale = 0;
  for (double v : x) scale += std::abs(v);
  for (std::size_t st = 0; st + 510 <= y.size(); st += 128) {
    std::complex<double> b0, b1;
    for (std::size_t i = 0; i < 510; ++i) {
      const double ph = 2.0 * std::numbers::pi * static_cast<double>(i) / 510.0;
      b0 += w[i] * y[st + i];
      b1 += w[i] * y[st + i] * std::polar(1.0, -ph);
    }
    EXPECT_LT(std::abs(b0), 1e-10 * scale) << st;
    EXPECT_LT(std::abs(b1), 1e-10 * scale) << st;
  }
}
