#include <gtest/gtest.h>

#include "pesqlab/errors.hpp"
#include "pesqlab/grad_engine.hpp"
#include "pesqlab/synth.hpp"

using namespace pesqlab;

namespace {

LossSpec spec_for(LossKind k) { return {k, MetricConfig{}.smooth(), LossConfig{}}; }

}  // namespace

TEST(LossAndGrad, ValuesMatchForwardEvaluationExactly) {
  const auto p = synth_random_pair(1.0, 1);
  for (auto k : {LossKind::mse, LossKind::sisdr, LossKind::torchpesq, LossKind::combined}) {
    const auto s = spec_for(k);
    const auto g = loss_and_grad(s, p);
    EXPECT_EQ(g.loss, evaluate_loss(s, p)) << to_string(k);
    EXPECT_EQ(g.grad.size(), p.degraded.size());
    for (double v : g.grad) ASSERT_TRUE(std::isfinite(v));
  }
}

TEST(LossAndGrad, MseGradientIsResidual) {
  const auto p = synth_random_pair(0.1, 2);
  const auto g = loss_and_grad(spec_for(LossKind::mse), p);
  for (std::size_t i = 0; i < p.degraded.size(); ++i) {
    EXPECT_EQ(g.grad[i], p.degraded[i] - p.reference[i]);
  }
}

TEST(FiniteDiff, SiSdrOnShortPair) {
  const auto p = synth_random_pair(2000.0 / 16000.0, 3);
  const auto r = finite_diff_check(spec_for(LossKind::sisdr), p, 50, gradcheck_step(LossKind::sisdr), 3);
  EXPECT_EQ(r.probed.size(), 50u);
  EXPECT_LE(r.max_relative_error, 1e-5);
}

TEST(FiniteDiff, AllLossesAcrossSeeds) {
  for (auto k : {LossKind::mse, LossKind::sisdr, LossKind::torchpesq, LossKind::combined}) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      const auto p = synth_random_pair(1.0, seed);
      const auto r = finite_diff_check(spec_for(k), p, 50, gradcheck_step(k), seed);
      EXPECT_LE(r.max_relative_error, gradcheck_tolerance(k)) << to_string(k) << " seed " << seed;
    }
  }
}

// Level alignment scales quiet speech up by ~1e4, so a 1e-4 raw step spans
// several soft-gate widths. A smaller step isolates the analytic gradient.
TEST(FiniteDiff, MetricOnSpeechLikePair) {
  SpeechProxyConfig sc;
  sc.seconds = 1.5;
  const auto p = synth_noisy_pair(sc, 5, 4);
  const auto r = finite_diff_check(spec_for(LossKind::torchpesq), p, 50, 1e-6, 4);
  EXPECT_LE(r.max_relative_error, 1e-4);
}

TEST(FiniteDiff, MetricErrorShrinksWithStep) {
  SpeechProxyConfig sc;
  const auto p = synth_noisy_pair(sc, 5, 5);
  const auto coarse = finite_diff_check(spec_for(LossKind::torchpesq), p, 30, 1e-4, 5);
  const auto fine = finite_diff_check(spec_for(LossKind::torchpesq), p, 30, 1e-6, 5);
  EXPECT_LT(fine.max_relative_error, 0.1 * coarse.max_relative_error + 1e-5);
}

TEST(FiniteDiff, ProbesAreDistinctAndSeeded) {
  const auto p = synth_random_pair(0.05, 5);
  const auto a = finite_diff_check(spec_for(LossKind::mse), p, 100, 0.5, 9);
  const auto b = finite_diff_check(spec_for(LossKind::mse), p, 100, 0.5, 9);
  EXPECT_EQ(a.probed, b.probed);
  auto sorted = a.probed;
  std::sort(sorted.begin(), sorted.end());
  EXPECT_EQ(std::unique(sorted.begin(), sorted.end()), sorted.end());
  EXPECT_THROW(finite_diff_check(spec_for(LossKind::mse), p, 0, 0.5), ArgumentError);
}

TEST(Adam, FirstStepWithUnitGradient) {
  std::vector<double> x(5, 1.0), g(5, 1.0);
  AdamState st(5, 1e-5);
  adam_step(x, g, st);
  for (double v : x) EXPECT_NEAR(v, 1.0 - 1e-5 / (1.0 + 1e-8), 1e-15);
  EXPECT_EQ(st.step_count, 1u);
}

TEST(Adam, ZeroGradientStillCountsStep) {
  std::vector<double> x = {0.3, -0.2}, g(2, 0.0);
  AdamState st(2);
  adam_step(x, g, st);
  EXPECT_EQ(x, (std::vector<double>{0.3, -0.2}));
  EXPECT_EQ(st.step_count, 1u);
}

TEST(Adam, TwoStepsMatchStraightLineOracle) {
  const double g = 0.37, lr = 1e-3, b1 = 0.9, b2 = 0.999, eps = 1e-8;
  double p = 0.5, m = 0, v = 0;
  for (int t = 1; t <= 2; ++t) {
    m = b1 * m + (1 - b1) * g;
    v = b2 * v + (1 - b2) * g * g;
    const double mh = m / (1 - std::pow(b1, t)), vh = v / (1 - std::pow(b2, t));
    p -= lr * mh / (std::sqrt(vh) + eps);
  }
  std::vector<double> x = {0.5}, gv = {g};
  AdamState st(1, lr);
  adam_step(x, gv, st);
  adam_step(x, gv, st);
  EXPECT_EQ(x[0], p);
}

TEST(Adam, ConstantGradientStepApproachesLearningRate) {
  std::vector<double> x = {0.0, 0.0}, g = {2.5, -0.01};
  AdamState st(2, 1e-3);
  std::vector<double> prev = x;
  for (int i = 0; i < 1000; ++i) {
    prev = x;
    adam_step(x, g, st);
  }
  EXPECT_NEAR(prev[0] - x[0], 1e-3, 1e-5);
  EXPECT_NEAR(prev[1] - x[1], -1e-3, 1e-5);
}

TEST(Adam, LengthMismatchIsArgumentError) {
  std::vector<double> x(3), g(2);
  AdamState st(3);
  EXPECT_THROW(adam_step(x, g, st), ArgumentError);
}

TEST(LossKind, Parsing) {
  EXPECT_EQ(parse_loss_kind("combined"), LossKind::combined);
  EXPECT_THROW(parse_loss_kind("l1"), ArgumentError);
}
