#include <gtest/gtest.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "halfcalc/cli.hpp"

namespace halfcalc {
namespace {

namespace fs = std::filesystem;
using cli::json;

struct RunResult {
  int code = -1;
  std::string out;
};

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() / ("halfcalc_cli_" + std::to_string(::getpid()) + "_" +
                                        ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string write(const std::string& name, const std::string& text) {
    const auto p = dir_ / name;
    std::ofstream(p) << text;
    return p.string();
  }

  static std::string read(const std::string& path) {
    std::ifstream in(path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
  }

  RunResult run(const std::string& args, const std::string& env = "") {
    const std::string cmd = env + " " + HALFCALC_CLI_PATH + " " + args + " 2>/dev/null";
    RunResult r;
    FILE* p = ::popen(cmd.c_str(), "r");
    if (!p) return r;
    char buf[4096];
    std::size_t n;
    while ((n = std::fread(buf, 1, sizeof buf, p)) > 0) r.out.append(buf, n);
    const int status = ::pclose(p);
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return r;
  }

  RunResult run_config(const std::string& command, const std::string& config, const std::string& extra = "") {
    return run(command + " --config " + write("config.json", config) + " " + extra);
  }

  static json verdict(const json& report, const std::string& name) {
    for (const auto& v : report["verdicts"])
      if (v["name"] == name) return v;
    return json();
  }

  fs::path dir_;
};

const std::string diag_resolvent =
    R"({"schema": "halfcalc-config/1", "generator": {"diagonal": [-1, -2]},
        "symbol": {"kind": "resolvent", "mu": 1}, "path": "all"})";

TEST_F(CliTest, ApplyAllPaths) {
  const auto r = run_config("apply", diag_resolvent);
  ASSERT_EQ(r.code, 0);
  const auto rep = json::parse(r.out);
  EXPECT_EQ(rep["schema"], cli::report_schema);
  EXPECT_EQ(rep["command"], "apply");
  EXPECT_EQ(rep["results"]["paths"].size(), 4u);
  EXPECT_EQ(rep["results"]["inapplicable"].size(), 1u);
  EXPECT_EQ(rep["results"]["pairwise"].size(), 6u);
  EXPECT_TRUE(cli::all_pass(rep));
  // R(1, A) = diag(1/2, 1/3), printed with 17 significant digits
  EXPECT_NE(r.out.find("[[0, 0], [0.33333333333333331, 0]]"), std::string::npos);
}

TEST_F(CliTest, ApplyIdentityGivesIdentity) {
  const auto r = run_config("apply", R"({"schema": "halfcalc-config/1", "generator": {"golden": "nonnormal4"},
                                        "symbol": {"kind": "identity"}})");
  ASSERT_EQ(r.code, 0);
  const auto rep = json::parse(r.out);
  for (const auto& p : rep["results"]["paths"]) {
    const auto m = p["matrix"];
    for (std::size_t i = 0; i < 4; ++i)
      for (std::size_t j = 0; j < 4; ++j) {
        EXPECT_NEAR(m[i][j][0].get<double>(), i == j ? 1.0 : 0.0, 1e-5) << p["path"];
        EXPECT_NEAR(m[i][j][1].get<double>(), 0.0, 1e-5) << p["path"];
      }
  }
}

TEST_F(CliTest, ApplyUnstableIsNumericError) {
  const auto r = run_config("apply", R"({"schema": "halfcalc-config/1", "generator": {"diagonal": [0.5, -2]},
                                        "symbol": {"kind": "resolvent", "mu": 1}})");
  EXPECT_EQ(r.code, 3);
}

TEST_F(CliTest, ApplyRescaledUnstable) {
  const auto r = run_config("apply", R"({"schema": "halfcalc-config/1", "generator": {"diagonal": [0.5, -2]},
                                        "allow_unstable": true, "rescale": 1.0,
                                        "symbol": {"kind": "resolvent", "mu": 2}, "path": ["SpectralOracle", "Phillips"]})");
  ASSERT_EQ(r.code, 0);
  const auto rep = json::parse(r.out);
  // f = 1/(2 - z) shifted by 1 and applied to A - I reproduces (2 - A)^-1 = diag(2/3, 1/4)
  const auto m = rep["results"]["paths"][1]["matrix"];
  EXPECT_NEAR(m[0][0][0].get<double>(), 2.0 / 3.0, 1e-8);
  EXPECT_NEAR(m[1][1][0].get<double>(), 0.25, 1e-8);
}

TEST_F(CliTest, LawsExamples) {
  for (const std::string cfg :
       {R"({"schema": "halfcalc-config/1", "generator": {"diagonal": [-1, -2]},
            "symbols": [{"kind": "resolvent", "mu": 1}, {"kind": "regularizer"}]})",
        R"({"schema": "halfcalc-config/1", "generator": {"golden": "nonnormal4"},
            "symbols": [{"kind": "resolvent", "mu": [2, 1]}, {"kind": "exponential", "t": 0.5}]})",
        R"({"schema": "halfcalc-config/1", "generator": {"golden": "nonnormal4"},
            "symbols": [{"kind": "allpass"}, {"kind": "golden", "name": "(2-z)^-2"}], "path": "Phillips"})"}) {
    const auto r = run_config("laws", cfg);
    ASSERT_EQ(r.code, 0);
    const auto rep = json::parse(r.out);
    EXPECT_FALSE(rep["results"]["laws"].empty());
    EXPECT_TRUE(cli::all_pass(rep)) << r.out;
  }
}

TEST_F(CliTest, ObservabilityExamples) {
  auto r = run_config("observability", R"({"schema": "halfcalc-config/1", "generator": {"diagonal": [-1]}, "C": [[1]]})");
  ASSERT_EQ(r.code, 0);
  auto rep = json::parse(r.out);
  EXPECT_NEAR(rep["results"]["K"].get<double>(), 1.0 / std::sqrt(2.0), 1e-14);
  EXPECT_NEAR(rep["results"]["directional"]["K_dir"].get<double>(), 1.0 / std::sqrt(2.0), 1e-14);

  r = run_config("observability", R"({"schema": "halfcalc-config/1", "generator": {"diagonal": [-1, -2]},
                                     "C": [[0, 0]], "search": {"starts": 4}})");
  ASSERT_EQ(r.code, 0);
  rep = json::parse(r.out);
  EXPECT_EQ(rep["results"]["K"].get<double>(), 0.0);
  EXPECT_FALSE(rep["results"]["boundedness"]["applicable"].get<bool>());
  EXPECT_FALSE(rep["results"]["boundedness"]["notice"].get<std::string>().empty());

  r = run_config("observability", R"({"schema": "halfcalc-config/1", "generator": {"diagonal": [-1, -2]},
                                     "search": {"starts": 8}})");
  ASSERT_EQ(r.code, 0);
  rep = json::parse(r.out);
  EXPECT_TRUE(rep["results"]["boundedness"]["applicable"].get<bool>());
  EXPECT_EQ(rep["results"]["boundedness"]["entries"].size(), 9u);
  EXPECT_TRUE(cli::all_pass(rep));
}

TEST_F(CliTest, ExampleTable) {
  auto r = run_config("example", R"({"schema": "halfcalc-config/1", "N": 16, "table": [4, 8, 16], "search": {"starts": 8}})");
  ASSERT_EQ(r.code, 0);
  auto rep = json::parse(r.out);
  const auto& table = rep["results"]["table"];
  ASSERT_EQ(table.size(), 3u);
  for (std::size_t k = 1; k < 3; ++k) {
    EXPECT_LT(table[k]["lambda_max_W_xN"].get<double>(), table[k - 1]["lambda_max_W_xN"].get<double>());
    EXPECT_LT(table[k]["K_dir"].get<double>(), table[k - 1]["K_dir"].get<double>());
  }
  EXPECT_TRUE(verdict(rep, "K=1/sqrt2")["pass"].get<bool>());
  EXPECT_TRUE(verdict(rep, "gramian=I/2")["pass"].get<bool>());
  EXPECT_TRUE(verdict(rep, "riesz")["pass"].get<bool>());
  EXPECT_TRUE(verdict(rep, "carleson")["pass"].get<bool>());

  r = run_config("example", R"({"schema": "halfcalc-config/1", "N": 1})");
  ASSERT_EQ(r.code, 0);
  rep = json::parse(r.out);
  EXPECT_NEAR(rep["results"]["K"].get<double>(), 1.0 / std::sqrt(2.0), 1e-15);

  EXPECT_EQ(run_config("example", R"({"schema": "halfcalc-config/1", "N": 33})").code, 3);
  EXPECT_EQ(run_config("example", R"({"schema": "halfcalc-config/1", "N": 2, "lambdas": [-1, 1]})").code, 3);
}

TEST_F(CliTest, ToeplitzDemo) {
  const auto r = run_config("toeplitz-demo", R"({"schema": "halfcalc-config/1"})");
  ASSERT_EQ(r.code, 0);
  const auto rep = json::parse(r.out);
  EXPECT_EQ(rep["results"]["eigen_relation"].size(), 3u);
  EXPECT_TRUE(cli::all_pass(rep));
  EXPECT_EQ(run_config("toeplitz-demo", R"({"schema": "halfcalc-config/1", "tau": 0.3})").code, 2);
}

TEST_F(CliTest, UsageErrors) {
  EXPECT_EQ(run("apply").code, 2);
  EXPECT_EQ(run("frobnicate --config x.json").code, 2);
  EXPECT_EQ(run("apply --config " + (dir_ / "missing.json").string()).code, 2);
  EXPECT_EQ(run_config("apply", "{ not json").code, 2);
  EXPECT_EQ(run_config("apply", R"({"schema": "other/9", "generator": {"diagonal": [-1]}, "symbol": {"kind": "identity"}})").code, 2);
  EXPECT_EQ(run_config("apply", R"({"schema": "halfcalc-config/1", "generator": {"diagonal": [-1]}})").code, 2);
  EXPECT_EQ(run_config("apply", R"({"schema": "halfcalc-config/1", "generator": {"diagonal": [-1]},
                                   "symbol": {"kind": "nope"}})").code, 2);
  EXPECT_EQ(run_config("apply", R"({"schema": "halfcalc-config/1", "generator": {"diagonal": [-1]},
                                   "symbol": {"kind": "identity"}, "tolerances": {"Phillips": -1}})").code, 2);
  EXPECT_EQ(run_config("apply", R"({"schema": "halfcalc-config/1", "generator": {"diagonal": [-1]},
                                   "symbol": {"kind": "identity"}, "path": "Sideways"})").code, 2);
}

TEST_F(CliTest, OutFileAndSeed) {
  const auto out = (dir_ / "report.json").string();
  const auto cfg = write("o.json", R"({"schema": "halfcalc-config/1", "generator": {"diagonal": [-1, -3]},
                                      "search": {"starts": 4}, "seed": 9})");
  ASSERT_EQ(run("observability --config " + cfg + " --out " + out).code, 0);
  EXPECT_EQ(json::parse(read(out))["seed"], 9);
  ASSERT_EQ(run("observability --config " + cfg + " --out " + out + " --seed 11").code, 0);
  EXPECT_EQ(json::parse(read(out))["seed"], 11);
}

TEST_F(CliTest, DeterministicAcrossRunsAndThreads) {
  const auto cfg = write("d.json", R"({"schema": "halfcalc-config/1", "generator": {"golden": "nonnormal4"},
                                      "search": {"starts": 6, "iterations": 50}})");
  const auto a = run("observability --config " + cfg + " --seed 5", "HALFCALC_THREADS=1");
  const auto b = run("observability --config " + cfg + " --seed 5", "HALFCALC_THREADS=1");
  const auto c = run("observability --config " + cfg + " --seed 5", "HALFCALC_THREADS=4");
  ASSERT_EQ(a.code, 0);
  EXPECT_EQ(a.out, b.out);
  EXPECT_EQ(a.out, c.out);
  const auto app1 = run("apply --config " + write("a.json", diag_resolvent), "HALFCALC_THREADS=1");
  const auto app2 = run("apply --config " + write("a.json", diag_resolvent), "HALFCALC_THREADS=3");
  EXPECT_EQ(app1.out, app2.out);
}

TEST_F(CliTest, CheckRoundTrip) {
  const auto out = (dir_ / "r.json").string();
  ASSERT_EQ(run("apply --config " + write("a.json", diag_resolvent) + " --out " + out + " --check").code, 0);
  EXPECT_EQ(run("apply --config " + out + " --check").code, 0);
  EXPECT_EQ(run("laws --config " + out + " --check").code, 2);

  auto rep = json::parse(read(out));
  rep["verdicts"][0]["pass"] = !rep["verdicts"][0]["pass"].get<bool>();
  const auto tampered = write("t.json", cli::to_text(rep));
  EXPECT_EQ(run("apply --config " + tampered + " --check").code, 3);
}

TEST(Emitter, FixedDigitsAndLayout) {
  json j;
  j["x"] = 0.1;
  j["n"] = 3;
  j["m"] = cli::to_json(CMatrix{{1.0, cplx(0.0, 2.0)}});
  j["s"] = "a\"b";
  const auto text = cli::to_text(j);
  EXPECT_EQ(text,
            "{\n  \"x\": 0.10000000000000001,\n  \"n\": 3,\n  \"m\": [\n    [[1, 0], [0, 2]]\n  ],\n  \"s\": \"a\\\"b\"\n}\n");
  EXPECT_EQ(json::parse(text)["x"].get<double>(), 0.1);
}

TEST(Emitter, NonFiniteBecomesString) {
  json j = json::array({std::numeric_limits<double>::infinity(), std::nan("")});
  EXPECT_EQ(cli::to_text(j), "[\"inf\", \"nan\"]\n");
}

TEST(Check, DetectsMismatchAndMissingFields) {
  cli::Report rep("apply", json::object(), 0);
  rep.verdict("a", 1.0, cli::Relation::le, 2.0);
  rep.verdict("b", 3.0, cli::Relation::le, 2.0);
  auto doc = json::parse(cli::to_text(rep.doc()));
  EXPECT_TRUE(cli::check_report(doc).ok());
  EXPECT_EQ(cli::check_report(doc).verdicts, 2u);
  doc["verdicts"][1]["pass"] = true;
  EXPECT_FALSE(cli::check_report(doc).ok());
  doc.erase("provenance");
  EXPECT_GE(cli::check_report(doc).problems.size(), 2u);
  EXPECT_FALSE(cli::check_report(json{{"schema", "x"}}).ok());
}

TEST(Config, SymbolAndGeneratorParsing) {
  const auto g = cli::parse_generator(json::parse(
      R"({"generator": {"spectral": {"eigenvalues": [-1, [-2, 1]], "V": [[1, 1], [0, 1]]}}})"));
  ASSERT_TRUE(g.spectral().has_value());
  EXPECT_NEAR(g.omega(), -1.0, 1e-15);
  const auto s = cli::parse_symbol(json::parse(R"({"kind": "product", "args": [{"kind": "resolvent", "mu": 1},
                                                                                 {"kind": "constant", "c": [0, 2]}]})"));
  EXPECT_NEAR(std::abs(s.fn(-1.0) - cplx(0.0, 1.0)), 0.0, 1e-15);
  EXPECT_THROW(cli::parse_symbol(json::parse(R"({"kind": "resolvent", "mu": -1})")), usage_error);
  EXPECT_THROW(cli::parse_generator(json::parse(R"({"generator": {"dense": [[1, 2]]}})")), usage_error);
}

}  // namespace
}  // namespace halfcalc
