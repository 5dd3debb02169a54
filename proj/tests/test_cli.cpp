#include <gtest/gtest.h>

#include <fstream>
#include <json.hpp>
#include <sstream>

#include "pesqlab/cli.hpp"
#include "pesqlab/synth.hpp"
#include "test_util.hpp"

using namespace pesqlab;
using pesqlab::testing::scratch_dir;

namespace {

struct Run {
  int code;
  std::string out, err;
};

Run run(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream f(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(f), {}};
}

// Writes `n` synthetic pairs plus a manifest; identical pairs when asked.
std::filesystem::path corpus(const std::string& name, int n, bool identical) {
  const auto dir = scratch_dir(name);
  std::ofstream m(dir / "manifest.csv");
  m << "id,reference,degraded\n";
  SpeechProxyConfig sc;
  sc.seconds = 1.0;
  for (int k = 0; k < n; ++k) {
    const auto p = synth_noisy_pair(sc, 5, 40 + k);
    save_waveform(p.reference, dir / ("r" + std::to_string(k) + ".wav"));
    save_waveform(identical ? p.reference : p.degraded, dir / ("d" + std::to_string(k) + ".wav"));
    m << "u" << k << ",r" << k << ".wav,d" << k << ".wav\n";
  }
  return dir;
}

}  // namespace

TEST(Cli, HelpersFingerprintAndGrid) {
  EXPECT_EQ(fnv1a_hex(""), "cbf29ce484222325");
  EXPECT_EQ(fnv1a_hex("a"), "af63dc4c8601ec8c");
  EXPECT_EQ(parse_grid("1,10,100"), (std::vector<double>{1, 10, 100}));
  EXPECT_THROW(parse_grid("1,,2"), std::exception);
  EXPECT_THROW(parse_grid("1,x"), std::exception);
}

TEST(Cli, UsageErrorsExitOne) {
  EXPECT_EQ(run({}).code, kExitUsage);
  EXPECT_EQ(run({"frobnicate"}).code, kExitUsage);
  EXPECT_EQ(run({"evaluate"}).code, kExitUsage);
  EXPECT_EQ(run({"evaluate", "--manifest", "/nonexistent.csv"}).code, kExitUsage);
  EXPECT_EQ(run({"evaluate", "--estimator", "median"}).code, kExitUsage);
  EXPECT_EQ(run({"--help"}).code, kExitOk);
}

TEST(Cli, EmptyManifestIsSchemaErrorExitOne) {
  const auto dir = scratch_dir("cli_empty");
  std::ofstream(dir / "m.csv") << "";
  const auto r = run({"evaluate", "--manifest", (dir / "m.csv").string()});
  EXPECT_EQ(r.code, kExitUsage);
  EXPECT_NE(r.err.find("empty"), std::string::npos);
}

TEST(Cli, EvaluateIdenticalPairsAtCeilingAndDeterministic) {
  const auto dir = corpus("cli_identical", 2, true);
  const auto m = (dir / "manifest.csv").string();
  const auto a = run({"evaluate", "--manifest", m, "--out", (dir / "a.json").string(), "--jobs", "1"});
  ASSERT_EQ(a.code, kExitOk) << a.err;
  const auto b = run({"evaluate", "--manifest", m, "--out", (dir / "b.json").string(), "--jobs", "2"});
  EXPECT_EQ(slurp(dir / "a.json"), slurp(dir / "b.json"));
  const auto j = nlohmann::json::parse(slurp(dir / "a.json"));
  EXPECT_EQ(j["schema_version"], 1);
  EXPECT_EQ(j["config_fingerprint"].get<std::string>().size(), 16u);
  for (const auto& row : j["per_pair"]) {
    EXPECT_NEAR(row["metric"].get<double>(), 4.644, 0.01);
    EXPECT_EQ(row["si_sdr"].get<double>(), 100.0);
  }
}

TEST(Cli, EvaluatePartialFailureExitsTwo) {
  const auto dir = corpus("cli_partial", 1, false);
  std::ofstream(dir / "manifest.csv", std::ios::app) << "broken,r0.wav,missing.wav\n";
  const auto r = run({"evaluate", "--manifest", (dir / "manifest.csv").string(), "--out",
                      (dir / "r.json").string()});
  EXPECT_EQ(r.code, kExitPartial);
  const auto j = nlohmann::json::parse(slurp(dir / "r.json"));
  EXPECT_EQ(j["per_pair"].size(), 1u);
  EXPECT_EQ(j["errors"].size(), 1u);
  EXPECT_EQ(j["aggregate"]["count"], 1);
}

TEST(Cli, ClickSearchGridIsFingerprinted) {
  const auto dir = corpus("cli_click", 2, false);
  const auto m = (dir / "manifest.csv").string();
  const auto a = run({"click-search", "--manifest", m, "--grid", "1,10,100", "--out",
                      (dir / "a.csv").string(), "--report", (dir / "a.json").string()});
  ASSERT_EQ(a.code, kExitOk) << a.err;
  const auto ja = nlohmann::json::parse(slurp(dir / "a.json"));
  EXPECT_EQ(ja["config"]["grid"].size(), 3u);
  const auto b = run({"click-search", "--manifest", m, "--grid", "666", "--report",
                      (dir / "b.json").string()});
  const auto jb = nlohmann::json::parse(slurp(dir / "b.json"));
  EXPECT_NE(ja["config_fingerprint"], jb["config_fingerprint"]);
  EXPECT_NE(b.out.find("median_c"), std::string::npos);
  const auto p85 = run({"click-search", "--manifest", m, "--grid", "666", "--estimator", "p85"});
  EXPECT_NE(p85.out.find("immune"), std::string::npos);
  const auto csv = slurp(dir / "a.csv");
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "id,estimator,best_c,metric_base,metric_attacked,delta");
}

TEST(Cli, CompareEstimatorsWritesBothRows) {
  const auto dir = corpus("cli_compare", 2, false);
  const auto r = run({"compare-estimators", "--manifest", (dir / "manifest.csv").string(), "--grid",
                      "300,666", "--out", (dir / "c.csv").string()});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const auto csv = slurp(dir / "c.csv");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 5);
}

TEST(Cli, OracleZeroIterationsCopiesInput) {
  const auto dir = corpus("cli_oracle", 1, false);
  const auto r = run({"oracle", "--ref", (dir / "r0.wav").string(), "--deg", (dir / "d0.wav").string(),
                      "--iterations", "0", "--audio-out", (dir / "o.wav").string(), "--trace-out",
                      (dir / "t.csv").string(), "--loss", "combined", "--alpha", "0.9", "--beta",
                      "0.5", "--out", (dir / "o.json").string()});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  EXPECT_EQ(load_waveform(dir / "o.wav"), load_waveform(dir / "d0.wav"));
  const auto j = nlohmann::json::parse(slurp(dir / "o.json"));
  EXPECT_EQ(j["config"]["alpha"], 0.9);
  EXPECT_EQ(j["config"]["loss"], "combined");
  EXPECT_NE(r.out.find("initial"), std::string::npos);
  const auto t = slurp(dir / "t.csv");
  EXPECT_EQ(std::count(t.begin(), t.end(), '\n'), 2);
}

TEST(Cli, DeclickSingleFile) {
  const auto dir = corpus("cli_declick", 1, false);
  const auto r = run({"declick", "--in", (dir / "d0.wav").string(), "--out", (dir / "x.wav").string()});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  EXPECT_EQ(load_waveform(dir / "x.wav").size(), 8000u);
}

TEST(Cli, GradcheckPassesForCheapLosses) {
  EXPECT_EQ(run({"gradcheck", "--loss", "mse"}).code, kExitOk);
  const auto r = run({"gradcheck", "--loss", "sisdr", "--probes", "20"});
  EXPECT_EQ(r.code, kExitOk);
  EXPECT_EQ(r.out.substr(0, 4), "PASS");
  EXPECT_EQ(run({"gradcheck", "--loss", "torchpesq", "--seconds", "1", "--probes", "10"}).code, kExitOk);
}
