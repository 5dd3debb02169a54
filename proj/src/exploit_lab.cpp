#include "pesqlab/exploit_lab.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>
#include <numeric>
#include <sstream>

#include "parallel.hpp"
#include "pesqlab/errors.hpp"
#include "pesqlab/signal_ops.hpp"

namespace pesqlab {

Waveform apply_click(const Waveform& x, const ClickConfig& cc) {
  if (cc.index >= x.size()) {
    throw ArgumentError("click index " + std::to_string(cc.index) + " outside signal of " +
                        std::to_string(x.size()) + " samples");
  }
  if (!std::isfinite(cc.value)) throw ArgumentError("click value must be finite");
  std::vector<double> s = x.vector();
  s[cc.index] = cc.value;
  return x.with_samples(std::move(s));
}

std::vector<double> default_click_grid() {
  constexpr int n = 60;
  std::vector<double> g(n);
  for (int i = 0; i < n; ++i) g[i] = std::pow(10.0, 4.0 * i / (n - 1));
  g.front() = 1.0;
  g.back() = 1e4;
  return g;
}

namespace {

double median_of(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

ClickOutcome search_one(const UtterancePair& pair, const std::vector<double>& grid,
                        const MetricConfig& cfg) {
  ClickOutcome out;
  out.id = pair.id;
  try {
    out.metric_without = compute_metric(pair, cfg).value;
    out.metric_with_click = out.metric_without;
    for (double c : grid) {
      UtterancePair attacked{pair.reference, apply_click(pair.degraded, {c, 0}), pair.id, {}};
      const double m = compute_metric(attacked, cfg).value;
      if (m > out.metric_with_click) {
        out.metric_with_click = m;
        out.best_c = c;
      }
    }
  } catch (const Error& e) {
    out.error = e.what();
  }
  return out;
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

}  // namespace

ClickSearchResult search_click(const std::vector<UtterancePair>& pairs, std::vector<double> grid,
                               const MetricConfig& cfg, std::size_t jobs) {
  if (grid.empty()) throw ArgumentError("click grid is empty");
  for (double c : grid) {
    if (!std::isfinite(c)) throw ArgumentError("click grid contains a non-finite value");
  }
  cfg.validate();
  // Ascending order plus strict improvement gives the smallest-c tie-break.
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());

  ClickSearchResult r;
  r.per_utterance.resize(pairs.size());
  detail::parallel_for(pairs.size(), jobs,
                       [&](std::size_t i) { r.per_utterance[i] = search_one(pairs[i], grid, cfg); });

  std::vector<double> best;
  double sum_metric = 0.0, sum_base = 0.0;
  for (const auto& o : r.per_utterance) {
    if (o.error) {
      r.warnings.push_back("excluded " + o.id + ": " + *o.error);
      continue;
    }
    ++r.succeeded;
    sum_metric += o.metric_with_click;
    sum_base += o.metric_without;
    if (o.best_c) best.push_back(*o.best_c);
  }
  if (r.succeeded > 0) {
    r.mean_metric = sum_metric / static_cast<double>(r.succeeded);
    r.mean_baseline = sum_base / static_cast<double>(r.succeeded);
  }
  if (!best.empty()) r.median_c = median_of(best);
  return r;
}

double spearman_correlation(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw ArgumentError("spearman_correlation on unequal lengths");
  const std::size_t n = a.size();
  if (n < 2) return std::numeric_limits<double>::quiet_NaN();
  auto ranks = [n](const std::vector<double>& v) {
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](std::size_t i, std::size_t j) { return v[i] < v[j]; });
    std::vector<double> r(n);
    for (std::size_t i = 0; i < n;) {
      std::size_t j = i;
      while (j + 1 < n && v[idx[j + 1]] == v[idx[i]]) ++j;
      const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
      for (std::size_t k = i; k <= j; ++k) r[idx[k]] = avg;
      i = j + 1;
    }
    return r;
  };
  const auto ra = ranks(a), rb = ranks(b);
  const double mean = 0.5 * static_cast<double>(n + 1);
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sab += (ra[i] - mean) * (rb[i] - mean);
    saa += (ra[i] - mean) * (ra[i] - mean);
    sbb += (rb[i] - mean) * (rb[i] - mean);
  }
  if (saa == 0 || sbb == 0) return std::numeric_limits<double>::quiet_NaN();
  return sab / std::sqrt(saa * sbb);
}

EstimatorComparison compare_estimators(const std::vector<UtterancePair>& pairs,
                                       const std::vector<double>& grid, const MetricConfig& cfg,
                                       std::size_t jobs) {
  MetricConfig sos = cfg, p85 = cfg;
  sos.level_estimator = LevelEstimator::sum_of_squares;
  p85.level_estimator = LevelEstimator::percentile85;

  EstimatorComparison cmp;
  cmp.sum_of_squares = search_click(pairs, grid, sos, jobs);
  cmp.percentile85 = search_click(pairs, grid, p85, jobs);

  std::vector<double> base_sos, base_p85;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const auto& a = cmp.sum_of_squares.per_utterance[i];
    const auto& b = cmp.percentile85.per_utterance[i];
    for (const auto* o : {&a, &b}) {
      EstimatorRow row;
      row.id = o->id;
      row.estimator = o == &a ? LevelEstimator::sum_of_squares : LevelEstimator::percentile85;
      row.best_c = o->best_c;
      row.metric_base = o->metric_without;
      row.metric_attacked = o->metric_with_click;
      row.delta = o->metric_with_click - o->metric_without;
      row.error = o->error;
      cmp.rows.push_back(row);
      if (!o->error) {
        double& mx = o == &a ? cmp.max_delta_sum_of_squares : cmp.max_delta_percentile85;
        mx = std::max(mx, row.delta);
      }
    }
    if (!a.error && !b.error) {
      base_sos.push_back(a.metric_without);
      base_p85.push_back(b.metric_without);
    }
  }
  cmp.rank_correlation = spearman_correlation(base_sos, base_p85);
  return cmp;
}

namespace {

void append_row(std::ostringstream& os, const std::string& id, LevelEstimator e,
                const std::optional<double>& best_c, double base, double attacked,
                const std::optional<std::string>& error) {
  os << id << ',' << to_string(e) << ',';
  if (error) {
    os << "error,,,\n";
    return;
  }
  os << (best_c ? fmt(*best_c) : std::string("none")) << ',' << fmt(base) << ',' << fmt(attacked)
     << ',' << fmt(attacked - base) << '\n';
}

}  // namespace

std::string comparison_csv(const EstimatorComparison& cmp) {
  std::ostringstream os;
  os << "id,estimator,best_c,metric_base,metric_attacked,delta\n";
  for (const auto& r : cmp.rows) {
    append_row(os, r.id, r.estimator, r.best_c, r.metric_base, r.metric_attacked, r.error);
  }
  return os.str();
}

std::string click_search_csv(const ClickSearchResult& res, LevelEstimator estimator) {
  std::ostringstream os;
  os << "id,estimator,best_c,metric_base,metric_attacked,delta\n";
  for (const auto& o : res.per_utterance) {
    append_row(os, o.id, estimator, o.best_c, o.metric_without, o.metric_with_click, o.error);
  }
  return os.str();
}

namespace {

constexpr std::size_t kDeclickFrame = 510;
constexpr std::size_t kDeclickHop = 128;
constexpr std::size_t kDeclickBand = 3 * ((kDeclickFrame - 1) / kDeclickHop) + 2;

// One linear functional per (frame, component): windowed DC, cos and sin of bin 1.
struct Constraint {
  std::ptrdiff_t start;  // frame start, may be negative
  int component;
};

}  // namespace

std::vector<double> zero_low_bins(std::span<const double> x) {
  if (x.empty()) throw ArgumentError("zero_low_bins on an empty signal");
  const auto len = static_cast<std::ptrdiff_t>(x.size());
  const auto frame = static_cast<std::ptrdiff_t>(kDeclickFrame);
  const auto hop = static_cast<std::ptrdiff_t>(kDeclickHop);
  const auto window = hann_window(kDeclickFrame);

  // coef[c][i]: weight of frame offset i for component c.
  std::array<std::vector<double>, 3> coef;
  for (int c = 0; c < 3; ++c) coef[c].resize(kDeclickFrame);
  for (std::size_t i = 0; i < kDeclickFrame; ++i) {
    const double ph = 2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(kDeclickFrame);
    coef[0][i] = window[i];
    coef[1][i] = window[i] * std::cos(ph);
    coef[2][i] = window[i] * std::sin(ph);
  }

  std::vector<Constraint> rows;
  for (std::ptrdiff_t st = -3 * hop; st < len; st += hop) {
    for (int c = 0; c < 3; ++c) rows.push_back({st, c});
  }
  const std::size_t m = rows.size();

  auto dot_rows = [&](const Constraint& a, const Constraint& b) {
    const std::ptrdiff_t lo = std::max({a.start, b.start, std::ptrdiff_t{0}});
    const std::ptrdiff_t hi = std::min({a.start + frame, b.start + frame, len});
    double acc = 0.0;
    for (std::ptrdiff_t t = lo; t < hi; ++t) {
      acc += coef[a.component][t - a.start] * coef[b.component][t - b.start];
    }
    return acc;
  };

  // Banded Gram matrix G = C C^T stored as band[r][d] = G(r, r - d).
  const std::size_t bw = kDeclickBand;
  std::vector<std::array<double, kDeclickBand + 1>> band(m);
  for (std::size_t r = 0; r < m; ++r) {
    band[r].fill(0.0);
    for (std::size_t d = 0; d <= bw && d <= r; ++d) band[r][d] = dot_rows(rows[r], rows[r - d]);
  }

  std::vector<double> rhs(m, 0.0);
  for (std::size_t r = 0; r < m; ++r) {
    const auto& q = rows[r];
    for (std::ptrdiff_t t = std::max(q.start, std::ptrdiff_t{0}); t < std::min(q.start + frame, len); ++t) {
      rhs[r] += coef[q.component][t - q.start] * x[static_cast<std::size_t>(t)];
    }
  }

  // In-place banded LDL^T. Frames that barely touch the signal give
  // constraints already spanned by their neighbours; those pivots are dropped
  // so the result stays an exact orthogonal projection.
  std::vector<double> diag(m, 0.0);
  std::vector<bool> active(m, true);
  for (std::size_t r = 0; r < m; ++r) {
    for (std::size_t d = std::min(bw, r); d >= 1; --d) {
      const std::size_t j = r - d;
      double v = band[r][d];
      for (std::size_t e = d + 1; e <= bw && e <= r; ++e) {
        const std::size_t k = r - e;
        if (j - k > bw || j < k) continue;
        v -= band[r][e] * band[j][j - k] * diag[k];
      }
      band[r][d] = active[j] ? v / diag[j] : 0.0;
    }
    double p = band[r][0];
    for (std::size_t e = 1; e <= bw && e <= r; ++e) p -= band[r][e] * band[r][e] * diag[r - e];
    if (p <= 1e-10 * band[r][0] || band[r][0] <= 0.0) {
      active[r] = false;
      diag[r] = 0.0;
      for (std::size_t e = 1; e <= bw && e <= r; ++e) band[r][e] = 0.0;
    } else {
      diag[r] = p;
    }
  }

  std::vector<double> lambda(rhs);
  for (std::size_t r = 0; r < m; ++r) {
    for (std::size_t e = 1; e <= bw && e <= r; ++e) lambda[r] -= band[r][e] * lambda[r - e];
  }
  for (std::size_t r = 0; r < m; ++r) lambda[r] = active[r] ? lambda[r] / diag[r] : 0.0;
  for (std::size_t r = m; r-- > 0;) {
    for (std::size_t e = 1; e <= bw && r + e < m; ++e) lambda[r] -= band[r + e][e] * lambda[r + e];
  }

  std::vector<double> y(x.begin(), x.end());
  for (std::size_t r = 0; r < m; ++r) {
    if (!active[r] || lambda[r] == 0.0) continue;
    const auto& q = rows[r];
    for (std::ptrdiff_t t = std::max(q.start, std::ptrdiff_t{0}); t < std::min(q.start + frame, len); ++t) {
      y[static_cast<std::size_t>(t)] -= lambda[r] * coef[q.component][t - q.start];
    }
  }
  return y;
}

Waveform declick_postprocess(const Waveform& x) {
  const auto crop = static_cast<std::size_t>(std::lround(kDeclickCropSeconds * x.sample_rate_hz()));
  if (x.size() <= crop) {
    throw ArgumentError("declick needs more than 0.5 s of audio, got " +
                        std::to_string(x.duration_seconds()) + " s");
  }
  const auto tail = x.samples().subspan(crop);
  auto y = zero_low_bins(tail);

  double in_peak = 0.0, out_peak = 0.0;
  for (double v : tail) in_peak = std::max(in_peak, std::abs(v));
  for (double v : y) out_peak = std::max(out_peak, std::abs(v));
  if (out_peak > kDeclickResidualFloor * in_peak && out_peak > 0.0) {
    const double g = in_peak / out_peak;
    for (double& v : y) v *= g;
  }
  return x.with_samples(std::move(y));
}

}  // namespace pesqlab
