#include "pesqlab/oracle_optimizer.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

#include "pesqlab/errors.hpp"

namespace pesqlab {

void OptimConfig::validate(std::size_t signal_length) const {
  if (loss != LossKind::torchpesq && loss != LossKind::combined) {
    throw ConfigError("oracle optimization supports the torchpesq and combined losses");
  }
  if (!(lr > 0.0) || !std::isfinite(lr)) throw ConfigError("learning rate must be positive");
  if (trace_every == 0) throw ConfigError("trace_every must be at least 1");
  if (freeze_head + freeze_tail >= signal_length) {
    throw ConfigError("frozen head and tail (" + std::to_string(freeze_head + freeze_tail) +
                      " samples) leave nothing to optimize in " + std::to_string(signal_length));
  }
}

OptimResult oracle_optimize(const UtterancePair& pair, const OptimConfig& oc,
                            const MetricConfig& mc, const LossConfig& lc) {
  const std::size_t n = pair.degraded.size();
  if (pair.reference.size() != n) throw ValidationError("oracle pair lengths differ");
  oc.validate(n);
  mc.validate();
  lc.validate();

  const LossSpec spec{oc.loss, mc.smooth(), lc};
  const MetricConfig eval_cfg = mc.hard();
  std::vector<double> x = pair.degraded.vector();
  AdamState adam(n, oc.lr);
  OptimTrace trace;

  auto current = [&] { return UtterancePair{pair.reference, pair.degraded.with_samples(x), pair.id, {}}; };
  auto record = [&](std::size_t it, double loss) {
    const auto p = current();
    trace.rows.push_back({it, loss, compute_metric(p, eval_cfg).value, si_sdr(p, lc.cap_db)});
  };

  for (std::size_t it = 0;; ++it) {
    GradResult g;
    try {
      g = loss_and_grad(spec, current());
    } catch (const NumericError& e) {
      trace.failed_at = it;
      trace.failure = e.what();
      break;
    }
    if (it % oc.trace_every == 0 || it == oc.iterations) record(it, g.loss);
    if (it == oc.iterations) break;
    std::fill(g.grad.begin(), g.grad.begin() + static_cast<std::ptrdiff_t>(oc.freeze_head), 0.0);
    std::fill(g.grad.end() - static_cast<std::ptrdiff_t>(oc.freeze_tail), g.grad.end(), 0.0);
    adam_step(x, g.grad, adam);
  }
  return {pair.degraded.with_samples(std::move(x)), std::move(trace)};
}

std::string trace_csv(const OptimTrace& trace) {
  std::ostringstream os;
  os << "iteration,loss,metric,si_sdr\n";
  char buf[160];
  for (const auto& r : trace.rows) {
    std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g,%.17g\n", r.iteration, r.loss, r.metric,
                  r.si_sdr);
    os << buf;
  }
  return os.str();
}

void export_trace(const OptimTrace& trace, const std::filesystem::path& path) {
  if (trace.rows.empty()) throw ArgumentError("refusing to export an empty trace");
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path.string() + " for writing");
  f << trace_csv(trace);
  if (!f) throw IoError("failed writing " + path.string());
}

OptimTrace read_trace(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot open " + path.string());
  std::string line;
  if (!std::getline(f, line) || line != "iteration,loss,metric,si_sdr") {
    throw SchemaError("trace header must be iteration,loss,metric,si_sdr");
  }
  OptimTrace t;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    TraceRow r;
    if (std::sscanf(line.c_str(), "%zu,%lf,%lf,%lf", &r.iteration, &r.loss, &r.metric, &r.si_sdr) !=
        4) {
      throw SchemaError("malformed trace row: " + line);
    }
    t.rows.push_back(r);
  }
  return t;
}

double pearson_correlation(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw ArgumentError("pearson_correlation on unequal lengths");
  const std::size_t n = a.size();
  if (n < 2) return std::numeric_limits<double>::quiet_NaN();
  double ma = 0, mb = 0;
  for (std::size_t i = 0; i < n; ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= static_cast<double>(n);
  mb /= static_cast<double>(n);
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  if (saa == 0 || sbb == 0) return std::numeric_limits<double>::quiet_NaN();
  return sab / std::sqrt(saa * sbb);
}

}  // namespace pesqlab
