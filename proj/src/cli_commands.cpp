#include "pesqlab/cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>

#include "parallel.hpp"
#include "pesqlab/errors.hpp"
#include "pesqlab/exploit_lab.hpp"
#include "pesqlab/grad_engine.hpp"
#include "pesqlab/losses.hpp"
#include "pesqlab/oracle_optimizer.hpp"
#include "pesqlab/quality_metric.hpp"
#include "pesqlab/synth.hpp"

namespace pesqlab {

using nlohmann::json;

std::string fnv1a_hex(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::vector<double> parse_grid(const std::string& text) {
  std::vector<double> grid;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto b = item.find_first_not_of(" \t");
    const auto e = item.find_last_not_of(" \t");
    if (b == std::string::npos) throw ArgumentError("empty entry in grid '" + text + "'");
    item = item.substr(b, e - b + 1);
    std::size_t used = 0;
    double v = 0;
    try {
      v = std::stod(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != item.size() || !std::isfinite(v)) {
      throw ArgumentError("grid entry '" + item + "' is not a finite number");
    }
    grid.push_back(v);
  }
  if (grid.empty()) throw ArgumentError("grid is empty");
  return grid;
}

namespace {

struct Common {
  std::string manifest;
  std::string out;
  std::string estimator = "sos";
  std::string mapping;
  std::size_t jobs = 0;
  std::uint64_t seed = 0;
};

void add_common(CLI::App* sub, Common& c, const std::string& default_mapping) {
  c.mapping = default_mapping;
  sub->add_option("--manifest", c.manifest, "CSV manifest with id,reference,degraded columns");
  sub->add_option("--out", c.out, "Output path");
  sub->add_option("--estimator", c.estimator, "Level estimator")
      ->check(CLI::IsMember({"sos", "p85", "sum_of_squares", "percentile85"}))
      ->capture_default_str();
  sub->add_option("--mapping", c.mapping, "Score mapping")
      ->check(CLI::IsMember({"raw", "lqo", "lqo_logistic"}))
      ->capture_default_str();
  sub->add_option("--jobs", c.jobs, "Worker threads (0: all cores)")->capture_default_str();
  sub->add_option("--seed", c.seed, "Seed for randomized steps")->capture_default_str();
}

MetricConfig metric_config(const Common& c) {
  MetricConfig mc;
  mc.level_estimator = parse_level_estimator(c.estimator);
  mc.mos_mapping = parse_mos_mapping(c.mapping);
  mc.validate();
  return mc;
}

json to_json(const MetricConfig& mc) {
  return {{"level_estimator", to_string(mc.level_estimator)},
          {"target_level", mc.target_level},
          {"bark_bands", mc.bark_bands},
          {"sample_rate_hz", mc.sample_rate_hz},
          {"mos_mapping", to_string(mc.mos_mapping)},
          {"clip_mode", mc.clip_mode == ClipMode::hard ? "hard" : "smooth"},
          {"sharpness", mc.sharpness}};
}

json opt_number(const std::optional<double>& v) { return v ? json(*v) : json("none"); }

// Embeds schema version and fingerprint; the fingerprint hashes the canonical
// (key-sorted, compact) dump of `config`.
json make_report(const std::string& command, const json& config) {
  json r;
  r["schema_version"] = kReportSchemaVersion;
  r["command"] = command;
  r["config"] = config;
  r["config_fingerprint"] = fnv1a_hex(json{{"command", command}, {"config", config}}.dump());
  return r;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path + " for writing");
  f << text;
  if (!f) throw IoError("failed writing " + path);
}

void write_json(const std::string& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

struct Stats {
  double mean = 0, stddev = 0;
};

Stats stats_of(const std::vector<double>& v) {
  Stats s;
  if (v.empty()) return s;
  for (double x : v) s.mean += x;
  s.mean /= static_cast<double>(v.size());
  if (v.size() > 1) {
    double acc = 0;
    for (double x : v) acc += (x - s.mean) * (x - s.mean);
    s.stddev = std::sqrt(acc / static_cast<double>(v.size() - 1));
  }
  return s;
}

json stats_json(const std::vector<double>& v) {
  const auto s = stats_of(v);
  return {{"mean", s.mean}, {"std", s.stddev}};
}

std::string fmtf(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

Manifest require_manifest(const Common& c) {
  if (c.manifest.empty()) throw ArgumentError("--manifest is required");
  return load_manifest(c.manifest);
}

struct LoadedCorpus {
  std::vector<UtterancePair> pairs;
  json load_errors = json::array();
};

LoadedCorpus load_corpus(const Manifest& m, std::size_t jobs) {
  std::vector<std::optional<UtterancePair>> slots(m.entries.size());
  std::vector<std::string> errors(m.entries.size());
  detail::parallel_for(m.entries.size(), jobs, [&](std::size_t i) {
    try {
      slots[i] = load_pair(m.entries[i]);
    } catch (const Error& e) {
      errors[i] = e.what();
    }
  });
  LoadedCorpus c;
  for (std::size_t i = 0; i < slots.size(); ++i) {
    if (slots[i]) {
      c.pairs.push_back(std::move(*slots[i]));
    } else {
      c.load_errors.push_back({{"id", m.entries[i].id}, {"error", errors[i]}});
    }
  }
  return c;
}

// ---------------------------------------------------------------------------

int cmd_evaluate(const Common& c, std::ostream& out) {
  const auto mc = metric_config(c);
  const LossConfig lc;
  const auto manifest = require_manifest(c);

  struct Row {
    std::optional<MosScore> score;
    double si_sdr = 0, mse = 0;
    std::vector<std::string> warnings;
    std::string error;
  };
  std::vector<Row> rows(manifest.entries.size());
  detail::parallel_for(manifest.entries.size(), c.jobs, [&](std::size_t i) {
    try {
      const auto pair = load_pair(manifest.entries[i]);
      auto s = compute_metric(pair, mc);
      rows[i].si_sdr = si_sdr(pair, lc.cap_db);
      rows[i].mse = mse_loss(pair);
      rows[i].warnings = pair.warnings;
      rows[i].warnings.insert(rows[i].warnings.end(), s.warnings.begin(), s.warnings.end());
      rows[i].score = std::move(s);
    } catch (const Error& e) {
      rows[i].error = e.what();
    }
  });

  json report = make_report("evaluate", {{"metric", to_json(mc)}, {"si_sdr_cap_db", lc.cap_db}});
  report["per_pair"] = json::array();
  report["errors"] = json::array();
  std::vector<double> metrics, sdrs, mses;
  out << "id                    metric     si_sdr          mse  support\n";
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& id = manifest.entries[i].id;
    const auto& r = rows[i];
    if (!r.score) {
      report["errors"].push_back({{"id", id}, {"error", r.error}});
      out << id << "  ERROR: " << r.error << "\n";
      continue;
    }
    metrics.push_back(r.score->value);
    sdrs.push_back(r.si_sdr);
    mses.push_back(r.mse);
    report["per_pair"].push_back({{"id", id},
                                  {"metric", r.score->value},
                                  {"raw", r.score->raw},
                                  {"si_sdr", r.si_sdr},
                                  {"mse", r.mse},
                                  {"support", r.score->support},
                                  {"warnings", r.warnings}});
    char line[256];
    std::snprintf(line, sizeof line, "%-20s %8.4f %10.3f %12.6g  %s\n", id.c_str(), r.score->value,
                  r.si_sdr, r.mse, r.score->support ? "yes" : "no");
    out << line;
  }
  report["aggregate"] = {{"count", metrics.size()},
                         {"metric", stats_json(metrics)},
                         {"si_sdr", stats_json(sdrs)},
                         {"mse", stats_json(mses)}};
  const auto m = stats_of(metrics), s = stats_of(sdrs);
  out << "mean metric " << fmtf("%.4f", m.mean) << " +- " << fmtf("%.4f", m.stddev)
      << ", si_sdr " << fmtf("%.3f", s.mean) << " +- " << fmtf("%.3f", s.stddev) << " dB over "
      << metrics.size() << " pair(s)\n";
  out << "config_fingerprint " << report["config_fingerprint"].get<std::string>() << "\n";
  if (!c.out.empty()) write_json(c.out, report);
  return report["errors"].empty() ? kExitOk : kExitPartial;
}

json click_result_json(const ClickSearchResult& r) {
  json per = json::array();
  for (const auto& o : r.per_utterance) {
    json row = {{"id", o.id}};
    if (o.error) {
      row["error"] = *o.error;
    } else {
      row["best_c"] = opt_number(o.best_c);
      row["metric_without"] = o.metric_without;
      row["metric_with_click"] = o.metric_with_click;
    }
    per.push_back(row);
  }
  return {{"per_utterance", per},
          {"median_c", opt_number(r.median_c)},
          {"mean_metric", r.mean_metric},
          {"mean_baseline", r.mean_baseline},
          {"mean_delta", r.mean_delta()},
          {"succeeded", r.succeeded},
          {"warnings", r.warnings}};
}

void print_click_summary(std::ostream& out, const std::string& label, const ClickSearchResult& r) {
  out << label << ": " << r.succeeded << " utterance(s), baseline " << fmtf("%.4f", r.mean_baseline)
      << ", attacked " << fmtf("%.4f", r.mean_metric) << ", delta " << fmtf("%+.4f", r.mean_delta())
      << ", median_c " << (r.median_c ? fmtf("%.6g", *r.median_c) : std::string("none")) << "\n";
  for (const auto& w : r.warnings) out << "warning: " << w << "\n";
}

int cmd_click_search(const Common& c, const std::string& grid_text, const std::string& report_path,
                     std::ostream& out) {
  const auto mc = metric_config(c);
  const auto grid = grid_text.empty() ? default_click_grid() : parse_grid(grid_text);
  const auto corpus = load_corpus(require_manifest(c), c.jobs);
  const auto r = search_click(corpus.pairs, grid, mc, c.jobs);

  json report = make_report("click-search", {{"metric", to_json(mc)}, {"grid", grid}});
  report["result"] = click_result_json(r);
  report["load_errors"] = corpus.load_errors;

  print_click_summary(out, to_string(mc.level_estimator), r);
  if (mc.level_estimator == LevelEstimator::percentile85) {
    out << (std::abs(r.mean_delta()) <= 0.05 ? "immune" : "NOT immune")
        << ": mean delta within 0.05 MOS is the immunity criterion\n";
  }
  out << "config_fingerprint " << report["config_fingerprint"].get<std::string>() << "\n";
  if (!c.out.empty()) write_text(c.out, click_search_csv(r, mc.level_estimator));
  if (!report_path.empty()) write_json(report_path, report);
  const bool partial = !corpus.load_errors.empty() || r.succeeded != r.per_utterance.size();
  return partial ? kExitPartial : kExitOk;
}

int cmd_compare(const Common& c, const std::string& grid_text, const std::string& report_path,
                std::ostream& out) {
  auto mc = metric_config(c);
  const auto grid = grid_text.empty() ? default_click_grid() : parse_grid(grid_text);
  const auto corpus = load_corpus(require_manifest(c), c.jobs);
  const auto cmp = compare_estimators(corpus.pairs, grid, mc, c.jobs);

  mc.level_estimator = LevelEstimator::sum_of_squares;
  json cfg = {{"metric", to_json(mc)}, {"grid", grid}};
  cfg["metric"].erase("level_estimator");
  json report = make_report("compare-estimators", cfg);
  report["sum_of_squares"] = click_result_json(cmp.sum_of_squares);
  report["percentile85"] = click_result_json(cmp.percentile85);
  report["max_delta_sum_of_squares"] = cmp.max_delta_sum_of_squares;
  report["max_delta_percentile85"] = cmp.max_delta_percentile85;
  report["rank_correlation"] = cmp.rank_correlation;
  report["load_errors"] = corpus.load_errors;

  print_click_summary(out, "sum_of_squares", cmp.sum_of_squares);
  print_click_summary(out, "percentile85", cmp.percentile85);
  out << "max delta: sum_of_squares " << fmtf("%.4f", cmp.max_delta_sum_of_squares)
      << ", percentile85 " << fmtf("%.4f", cmp.max_delta_percentile85) << "\n";
  out << "rank correlation of unattacked scores " << fmtf("%.4f", cmp.rank_correlation) << "\n";
  out << "config_fingerprint " << report["config_fingerprint"].get<std::string>() << "\n";
  if (!c.out.empty()) write_text(c.out, comparison_csv(cmp));
  if (!report_path.empty()) write_json(report_path, report);
  const bool partial = !corpus.load_errors.empty() ||
                       cmp.sum_of_squares.succeeded != corpus.pairs.size() ||
                       cmp.percentile85.succeeded != corpus.pairs.size();
  return partial ? kExitPartial : kExitOk;
}

struct OracleArgs {
  std::string ref, deg, trace_out, audio_out, loss = "torchpesq";
  OptimConfig oc;
  LossConfig lc;
  double seconds = 2.0;
  double snr_db = 10.0;
};

int cmd_oracle(const Common& c, OracleArgs a, std::ostream& out) {
  const auto mc = metric_config(c);
  a.oc.loss = parse_loss_kind(a.loss);
  if (a.ref.empty() != a.deg.empty()) throw ArgumentError("--ref and --deg go together");

  UtterancePair pair = [&] {
    if (!a.ref.empty()) return make_pair(load_waveform(a.ref), load_waveform(a.deg), "oracle");
    SpeechProxyConfig sc;
    sc.seconds = a.seconds;
    return synth_noisy_pair(sc, a.snr_db, c.seed, "synthetic");
  }();
  for (const auto& w : pair.warnings) out << "warning: " << w << "\n";

  const auto res = oracle_optimize(pair, a.oc, mc, a.lc);

  json cfg = {{"metric", to_json(mc)},
              {"loss", to_string(a.oc.loss)},
              {"iterations", a.oc.iterations},
              {"lr", a.oc.lr},
              {"freeze_head", a.oc.freeze_head},
              {"freeze_tail", a.oc.freeze_tail},
              {"trace_every", a.oc.trace_every},
              {"si_sdr_cap_db", a.lc.cap_db}};
  if (a.oc.loss == LossKind::combined) {
    cfg["alpha"] = a.lc.alpha;
    cfg["beta"] = a.lc.beta;
  }
  if (a.ref.empty()) {
    cfg["synthetic"] = {{"seconds", a.seconds}, {"snr_db", a.snr_db}, {"seed", c.seed}};
  } else {
    cfg["reference"] = a.ref;
    cfg["degraded"] = a.deg;
  }
  json report = make_report("oracle", cfg);

  auto row_json = [](const TraceRow& r) {
    return json{{"iteration", r.iteration}, {"loss", r.loss}, {"metric", r.metric}, {"si_sdr", r.si_sdr}};
  };
  auto print_row = [&out](const char* label, const TraceRow& r) {
    char line[200];
    std::snprintf(line, sizeof line, "%-8s iteration %6zu  loss %.5f  metric %.4f  si_sdr %.3f dB\n",
                  label, r.iteration, r.loss, r.metric, r.si_sdr);
    out << line;
  };
  if (!res.trace.rows.empty()) {
    report["initial"] = row_json(res.trace.rows.front());
    report["final"] = row_json(res.trace.rows.back());
    print_row("initial", res.trace.rows.front());
    print_row("final", res.trace.rows.back());
  }
  if (res.trace.failed_at) {
    report["failed_at"] = *res.trace.failed_at;
    report["failure"] = res.trace.failure;
    out << "stopped at iteration " << *res.trace.failed_at << ": " << res.trace.failure << "\n";
  }
  out << "config_fingerprint " << report["config_fingerprint"].get<std::string>() << "\n";
  if (!a.trace_out.empty() && !res.trace.rows.empty()) export_trace(res.trace, a.trace_out);
  if (!a.audio_out.empty()) save_waveform(res.optimized, a.audio_out, SampleEncoding::float32);
  if (!c.out.empty()) write_json(c.out, report);
  return res.trace.failed_at ? kExitPartial : kExitOk;
}

int cmd_declick(const Common& c, const std::string& in, std::ostream& out) {
  if (!in.empty()) {
    if (c.out.empty()) throw ArgumentError("--out is required with --in");
    const auto y = declick_postprocess(load_waveform(in));
    save_waveform(y, c.out, SampleEncoding::float32);
    out << "wrote " << c.out << " (" << fmtf("%.3f", y.duration_seconds()) << " s)\n";
    return kExitOk;
  }
  // Batch mode: every degraded file of the manifest into the --out directory.
  const auto manifest = require_manifest(c);
  if (c.out.empty()) throw ArgumentError("--out directory is required with --manifest");
  std::filesystem::create_directories(c.out);
  int code = kExitOk;
  for (const auto& e : manifest.entries) {
    try {
      const auto y = declick_postprocess(load_waveform(e.degraded_path));
      save_waveform(y, std::filesystem::path(c.out) / (e.id + ".wav"), SampleEncoding::float32);
      out << e.id << ": ok\n";
    } catch (const Error& err) {
      out << e.id << ": ERROR: " << err.what() << "\n";
      code = kExitPartial;
    }
  }
  return code;
}

int cmd_gradcheck(const Common& c, const std::string& loss, double seconds, std::size_t probes,
                  std::optional<double> step, std::ostream& out) {
  LossSpec spec;
  spec.kind = parse_loss_kind(loss);
  spec.metric = metric_config(c).smooth();
  const double h = step.value_or(gradcheck_step(spec.kind));
  const auto pair = synth_random_pair(seconds, c.seed);
  const auto rep = finite_diff_check(spec, pair, probes, h, c.seed);
  const double tol = gradcheck_tolerance(spec.kind);
  const bool pass = rep.max_relative_error <= tol;
  out << (pass ? "PASS" : "FAIL") << " gradcheck loss=" << to_string(spec.kind)
      << " seconds=" << seconds << " probes=" << rep.probed.size() << " step=" << h
      << " max_relative_error=" << fmtf("%.3e", rep.max_relative_error)
      << " tolerance=" << fmtf("%.0e", tol) << "\n";
  if (!c.out.empty()) {
    json report = make_report("gradcheck", {{"loss", to_string(spec.kind)},
                                            {"metric", to_json(spec.metric)},
                                            {"seconds", seconds},
                                            {"probes", probes},
                                            {"step", h},
                                            {"seed", c.seed}});
    report["max_relative_error"] = rep.max_relative_error;
    report["tolerance"] = tol;
    report["pass"] = pass;
    write_json(c.out, report);
  }
  return pass ? kExitOk : kExitPartial;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Differentiable speech-quality metric and exploit toolkit", "pesqlab"};
  app.require_subcommand(1);

  Common ev, cs, ce, orc, dc, gc;
  std::string cs_grid, cs_report, ce_grid, ce_report, dc_in, gc_loss = "torchpesq";
  double gc_seconds = 1.0;
  std::size_t gc_probes = 50;
  std::optional<double> gc_step;
  OracleArgs oa;
  oa.oc.iterations = OptimConfig{}.iterations;

  auto* evaluate = app.add_subcommand("evaluate", "Score every manifest pair");
  add_common(evaluate, ev, "lqo");

  auto* click = app.add_subcommand("click-search", "Search the click value that maximizes the metric");
  add_common(click, cs, "lqo");
  click->add_option("--grid", cs_grid, "Comma-separated click values (default: 60 log-spaced in [1, 1e4])");
  click->add_option("--report", cs_report, "JSON report path");

  auto* compare = app.add_subcommand("compare-estimators", "Click attack under both level estimators");
  add_common(compare, ce, "lqo");
  compare->add_option("--grid", ce_grid, "Comma-separated click values");
  compare->add_option("--report", ce_report, "JSON report path");

  auto* oracle = app.add_subcommand("oracle", "Optimize the degraded samples against the metric");
  add_common(oracle, orc, "raw");
  oracle->add_option("--ref", oa.ref, "Reference WAV (default: synthetic pair)");
  oracle->add_option("--deg", oa.deg, "Degraded WAV used as initialization");
  oracle->add_option("--iterations", oa.oc.iterations)->capture_default_str();
  oracle->add_option("--lr", oa.oc.lr)->capture_default_str();
  oracle->add_option("--freeze-head", oa.oc.freeze_head)->capture_default_str();
  oracle->add_option("--freeze-tail", oa.oc.freeze_tail)->capture_default_str();
  oracle->add_option("--trace-every", oa.oc.trace_every)->capture_default_str();
  oracle->add_option("--loss", oa.loss)->check(CLI::IsMember({"torchpesq", "combined"}))->capture_default_str();
  oracle->add_option("--alpha", oa.lc.alpha)->capture_default_str();
  oracle->add_option("--beta", oa.lc.beta)->capture_default_str();
  oracle->add_option("--seconds", oa.seconds, "Synthetic pair duration")->capture_default_str();
  oracle->add_option("--snr", oa.snr_db, "Synthetic pair SNR in dB")->capture_default_str();
  oracle->add_option("--trace-out", oa.trace_out, "Trace CSV path");
  oracle->add_option("--audio-out", oa.audio_out, "Optimized WAV path (float32)");

  auto* declick = app.add_subcommand("declick", "Crop 0.5 s and remove the two lowest STFT bins");
  add_common(declick, dc, "lqo");
  declick->add_option("--in", dc_in, "Input WAV");

  auto* gradcheck = app.add_subcommand("gradcheck", "Finite-difference check of a loss gradient");
  add_common(gradcheck, gc, "raw");
  gradcheck->add_option("--loss", gc_loss)
      ->check(CLI::IsMember({"mse", "sisdr", "torchpesq", "combined"}))
      ->capture_default_str();
  gradcheck->add_option("--seconds", gc_seconds)->capture_default_str();
  gradcheck->add_option("--probes", gc_probes)->capture_default_str();
  gradcheck->add_option("--step", gc_step, "Probe step (default depends on the loss)");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (evaluate->parsed()) return cmd_evaluate(ev, out);
    if (click->parsed()) return cmd_click_search(cs, cs_grid, cs_report, out);
    if (compare->parsed()) return cmd_compare(ce, ce_grid, ce_report, out);
    if (oracle->parsed()) return cmd_oracle(orc, oa, out);
    if (declick->parsed()) return cmd_declick(dc, dc_in, out);
    if (gradcheck->parsed()) return cmd_gradcheck(gc, gc_loss, gc_seconds, gc_probes, gc_step, out);
  } catch (const NumericError& e) {
    err << "error: " << e.what() << "\n";
    return kExitPartial;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  return kExitUsage;
}

}  // namespace pesqlab
