#include "pesqlab/grad_engine.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "pesqlab/errors.hpp"

namespace pesqlab {

std::string to_string(LossKind k) {
  switch (k) {
    case LossKind::mse: return "mse";
    case LossKind::sisdr: return "sisdr";
    case LossKind::torchpesq: return "torchpesq";
    case LossKind::combined: return "combined";
  }
  return "unknown";
}

LossKind parse_loss_kind(const std::string& s) {
  if (s == "mse") return LossKind::mse;
  if (s == "sisdr" || s == "si_sdr") return LossKind::sisdr;
  if (s == "torchpesq" || s == "metric") return LossKind::torchpesq;
  if (s == "combined") return LossKind::combined;
  throw ArgumentError("unknown loss '" + s + "' (expected mse, sisdr, torchpesq or combined)");
}

double evaluate_loss(const LossSpec& spec, const UtterancePair& pair) {
  switch (spec.kind) {
    case LossKind::mse: return mse_loss(pair);
    case LossKind::sisdr: return si_sdr(pair, spec.loss.cap_db);
    case LossKind::torchpesq: return torchpesq_loss(pair, spec.metric);
    case LossKind::combined: return combined_loss(pair, spec.loss, spec.metric);
  }
  throw ArgumentError("unknown loss kind");
}

namespace {

GradResult metric_loss_and_grad(const UtterancePair& pair, const MetricConfig& cfg) {
  auto mg = compute_metric_with_gradient(pair, cfg);
  GradResult r;
  r.loss = max_mapping_value(cfg.mos_mapping) - mg.score.value;
  r.grad = std::move(mg.grad_degraded);
  for (double& g : r.grad) g = -g;
  return r;
}

}  // namespace

GradResult loss_and_grad(const LossSpec& spec, const UtterancePair& pair) {
  const auto s = pair.reference.samples();
  const auto x = pair.degraded.samples();
  if (s.size() != x.size()) throw ValidationError("loss_and_grad on pairs of unequal length");
  GradResult r;
  switch (spec.kind) {
    case LossKind::mse: {
      r.loss = mse_loss(pair);
      r.grad.resize(x.size());
      for (std::size_t i = 0; i < x.size(); ++i) r.grad[i] = x[i] - s[i];
      break;
    }
    case LossKind::sisdr: {
      auto sg = si_sdr_with_gradient(s, x, spec.loss.cap_db);
      r.loss = sg.value;
      r.grad = std::move(sg.grad);
      break;
    }
    case LossKind::torchpesq:
      r = metric_loss_and_grad(pair, spec.metric);
      break;
    case LossKind::combined: {
      const auto& lc = spec.loss;
      lc.validate();
      // Same expression and term skipping as combined_loss, so the value is
      // bit-identical to the forward evaluation.
      GradResult metric;
      SiSdrGradient sdr;
      if (lc.alpha > 0.0) metric = metric_loss_and_grad(pair, spec.metric);
      if (lc.alpha < 1.0) sdr = si_sdr_with_gradient(s, x, lc.cap_db);
      const double metric_term = lc.alpha > 0.0 ? metric.loss : 0.0;
      const double sdr_term = lc.alpha < 1.0 ? sdr.value : 0.0;
      r.loss = lc.alpha * metric_term + (1.0 - lc.alpha) * lc.beta * sdr_term;
      r.grad.assign(x.size(), 0.0);
      for (std::size_t i = 0; i < x.size(); ++i) {
        if (lc.alpha > 0.0) r.grad[i] += lc.alpha * metric.grad[i];
        if (lc.alpha < 1.0) r.grad[i] += (1.0 - lc.alpha) * lc.beta * sdr.grad[i];
      }
      break;
    }
  }
  if (!std::isfinite(r.loss)) throw NumericError(to_string(spec.kind), "loss is not finite");
  for (double g : r.grad) {
    if (!std::isfinite(g)) throw NumericError(to_string(spec.kind), "gradient is not finite");
  }
  return r;
}

FiniteDiffReport finite_diff_check(const LossSpec& spec, const UtterancePair& pair,
                                   std::size_t n_probes, double step, std::uint64_t seed) {
  if (n_probes == 0) throw ArgumentError("finite_diff_check needs at least one probe");
  if (!(step > 0.0)) throw ArgumentError("finite difference step must be positive");
  const auto analytic = loss_and_grad(spec, pair);
  const std::size_t n = pair.degraded.size();
  n_probes = std::min(n_probes, n);

  std::mt19937_64 rng(seed);
  std::vector<std::size_t> indices(n);
  for (std::size_t i = 0; i < n; ++i) indices[i] = i;
  for (std::size_t i = 0; i < n_probes; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, n - 1);
    std::swap(indices[i], indices[pick(rng)]);
  }

  FiniteDiffReport report;
  std::vector<double> x = pair.degraded.vector();
  for (std::size_t p = 0; p < n_probes; ++p) {
    const std::size_t i = indices[p];
    const double orig = x[i];
    x[i] = orig + step;
    const double up = evaluate_loss(spec, UtterancePair{pair.reference, pair.degraded.with_samples(x),
                                                        pair.id, {}});
    x[i] = orig - step;
    const double down = evaluate_loss(
        spec, UtterancePair{pair.reference, pair.degraded.with_samples(x), pair.id, {}});
    x[i] = orig;
    const double numeric = (up - down) / (2.0 * step);
    const double a = analytic.grad[i];
    const double denom = std::max({std::abs(a), std::abs(numeric), 1e-12});
    report.max_relative_error = std::max(report.max_relative_error, std::abs(a - numeric) / denom);
    report.probed.push_back(i);
    report.analytic.push_back(a);
    report.numeric.push_back(numeric);
  }
  return report;
}

double gradcheck_tolerance(LossKind kind) {
  switch (kind) {
    case LossKind::mse: return 1e-9;
    case LossKind::sisdr: return 1e-5;
    case LossKind::torchpesq:
    case LossKind::combined: return 1e-3;
  }
  return 1e-3;
}

double gradcheck_step(LossKind kind) {
  switch (kind) {
    case LossKind::mse: return 0.5;  // quadratic: any step is exact, a large one keeps rounding small
    case LossKind::sisdr: return 1e-5;
    case LossKind::torchpesq:
    case LossKind::combined: return 1e-4;
  }
  return 1e-4;
}

void adam_step(std::span<double> params, std::span<const double> grad, AdamState& st) {
  if (params.size() != grad.size()) {
    throw ArgumentError("adam_step: " + std::to_string(params.size()) + " parameters but " +
                        std::to_string(grad.size()) + " gradient entries");
  }
  if (st.first_moment.size() != params.size() || st.second_moment.size() != params.size()) {
    throw ArgumentError("adam_step: optimizer state sized for a different parameter vector");
  }
  st.step_count += 1;
  const double t = static_cast<double>(st.step_count);
  const double bias1 = 1.0 - std::pow(st.beta1, t);
  const double bias2 = 1.0 - std::pow(st.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grad[i];
    st.first_moment[i] = st.beta1 * st.first_moment[i] + (1.0 - st.beta1) * g;
    st.second_moment[i] = st.beta2 * st.second_moment[i] + (1.0 - st.beta2) * g * g;
    const double m_hat = st.first_moment[i] / bias1;
    const double v_hat = st.second_moment[i] / bias2;
    params[i] -= st.lr * m_hat / (std::sqrt(v_hat) + st.eps);
  }
}

}  // namespace pesqlab
