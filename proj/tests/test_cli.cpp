#include <sys/wait.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <gtest/gtest.h>

#include "steininfo/cli.hpp"

using namespace steininfo;
using namespace steininfo::cli;
using nlohmann::json;

namespace {

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / ("stein_cli_" + name)).string();
}

std::string write_text(const std::string& name, const std::string& body) {
  const std::string path = temp_path(name);
  std::ofstream(path) << body;
  return path;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run distance(const std::string& target, const std::string& alt, const std::string& format = "csv") {
  PairOptions o;
  o.target = target;
  o.alt = alt;
  o.format = format;
  std::ostringstream out, err;
  const int code = cmd_distance(o, out, err);
  return {code, out.str(), err.str()};
}

Run verify(const std::string& config, const std::string& format = "csv") {
  VerifyOptions o;
  o.config_path = config;
  o.format = format;
  std::ostringstream out, err;
  const int code = cmd_verify(o, out, err);
  return {code, out.str(), err.str()};
}

Run solve(const std::string& target, const std::string& obs, std::vector<double> at) {
  SolveOptions o;
  o.target = target;
  o.obs = obs;
  o.at = std::move(at);
  std::ostringstream out, err;
  const int code = cmd_solve(o, out, err);
  return {code, out.str(), err.str()};
}

/// value column of a "name,x,value" or "metric,value,..." CSV row.
double csv_field(const std::string& text, const std::string& key, int column) {
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (line.rfind(key + ",", 0) != 0) continue;
    std::stringstream ls(line);
    std::string cell;
    for (int i = 0; i <= column; ++i) std::getline(ls, cell, ',');
    return std::stod(cell);
  }
  ADD_FAILURE() << "no row " << key;
  return 0.0;
}

int run_binary(const std::string& args, std::string* output = nullptr) {
  const std::string cmd = std::string(STEIN_INFO_BIN) + " " + args + " 2>&1";
  FILE* pipe = popen(cmd.c_str(), "r");
  if (!pipe) return -1;
  std::string text;
  char buf[4096];
  while (std::fgets(buf, sizeof buf, pipe)) text += buf;
  const int status = pclose(pipe);
  if (output) *output = text;
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

TEST(Distance, ExponentialPair) {
  const auto r = distance("exp:1", "exp:2");
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.out.substr(0, r.out.find('\n')), "metric,value,quad_error,location");
  EXPECT_NEAR(csv_field(r.out, "J", 1), 1.0, 1e-8);
  EXPECT_NEAR(csv_field(r.out, "TV", 1), 0.5, 1e-8);
  EXPECT_NEAR(csv_field(r.out, "Kolmogorov", 1), 0.25, 1e-7);
  EXPECT_NEAR(csv_field(r.out, "W1", 1), 0.5, 1e-8);
  EXPECT_NEAR(csv_field(r.out, "sup", 1), 1.0, 1e-6);
}

TEST(Distance, GaussianPair) {
  const auto r = distance("gauss:0,1", "gauss:1,1");
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NEAR(csv_field(r.out, "J", 1), 1.0, 1e-8);
  EXPECT_NEAR(csv_field(r.out, "W1", 1), 1.0, 1e-7);
  EXPECT_NEAR(csv_field(r.out, "TV", 1), 0.7658498, 1e-6);  // L1 norm; half of it is 0.38292
}

TEST(Distance, IdenticalSpecsGiveZeros) {
  const auto r = distance("quartic", "quartic");
  ASSERT_EQ(r.code, 0);
  for (const char* m : {"J", "TV", "Kolmogorov", "W1", "sup"}) EXPECT_EQ(csv_field(r.out, m, 1), 0.0) << m;
}

TEST(Distance, JsonRoundTripIsBitIdentical) {
  const auto r = distance("gauss:0,1", "gauss:0.5,1.2", "json");
  ASSERT_EQ(r.code, 0) << r.err;
  const json doc = json::parse(r.out);
  const auto p = builtin_density("gaussian", {0, 1}), q = builtin_density("gaussian", {0.5, 1.2});
  const auto rows = distance_rows(p, q, QuadratureSpec{}, 401);
  for (const auto& row : rows) {
    const double v = doc.at("metrics").at(row.metric).at("value").get<double>();
    EXPECT_EQ(v, row.value) << row.metric;
    if (row.location) EXPECT_EQ(doc.at("metrics").at(row.metric).at("location").get<double>(), *row.location);
  }
}

TEST(Distance, ExitCodes) {
  auto r = distance("exp:1", "gauss:0,1");
  EXPECT_EQ(r.code, kConfigError);
  EXPECT_NE(r.err.find("support mismatch"), std::string::npos);
  EXPECT_EQ(distance("cauchy", "exp:1").code, kConfigError);
  EXPECT_EQ(distance("exp:1", "exp:1", "xml").code, kConfigError);
  EXPECT_EQ(distance("exp:0", "exp:1").code, kConfigError);
}

TEST(Solve, Examples) {
  auto r = solve("exp:1", "poly:0,1", {1.0});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NEAR(csv_field(r.out, "f", 2), -1.0, 1e-9);
  EXPECT_LE(csv_field(r.out, "residual_max", 2), 1e-10);
  r = solve("gauss:0,1", "poly:0,1", {7.3});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NEAR(csv_field(r.out, "f", 2), -1.0, 1e-8);
  r = solve("gauss:0,1", "poly:4", {-1.0, 2.0});
  ASSERT_EQ(r.code, 0);
  EXPECT_EQ(csv_field(r.out, "f", 2), 0.0);
}

TEST(Solve, FactoredTargetReportsF0) {
  const auto r = solve("semicircle", "poly:0,1", {0.4});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NEAR(csv_field(r.out, "f0", 2), -1.0 / 3.0, 1e-8);
}

TEST(Solve, Errors) {
  EXPECT_EQ(solve("exp:1", "tv_sign", {1.0}).code, kConfigError);
  EXPECT_EQ(solve("unif", "indicator:2", {0.5}).code, kConfigError);
  EXPECT_EQ(solve("unif", "bogus", {0.5}).code, kConfigError);
}

TEST(Verify, GaussianConfigPasses) {
  const auto r = verify(std::string(STEIN_CONFIG_DIR) + "/gaussian.json");
  EXPECT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.out.find(",false,"), std::string::npos);
}

TEST(Verify, DeterministicReports) {
  const std::string cfg = std::string(STEIN_CONFIG_DIR) + "/quartic.json";
  const auto a = verify(cfg), b = verify(cfg);
  EXPECT_EQ(a.out, b.out);
  const auto ja = verify(cfg, "json"), jb = verify(cfg, "json");
  EXPECT_EQ(ja.out, jb.out);
  const json doc = json::parse(ja.out);
  EXPECT_EQ(doc.at("summary").at("failed").get<int>(), 0);
}

TEST(Verify, WritesFileAtomically) {
  VerifyOptions o;
  o.config_path = std::string(STEIN_CONFIG_DIR) + "/quartic.json";
  o.out = temp_path("report.csv");
  std::filesystem::remove(*o.out);
  std::ostringstream out, err;
  EXPECT_EQ(cmd_verify(o, out, err), 0);
  EXPECT_TRUE(out.str().empty());
  EXPECT_FALSE(std::filesystem::exists(*o.out + ".tmp"));
  EXPECT_EQ(slurp(*o.out).rfind("name,target,alternative,observable,lhs,rhs,slack,tolerance,pass,quad_error\n", 0), 0u);
}

TEST(Verify, SupportMismatchExitsTwo) {
  const auto path = write_text("mismatch.json", R"J({"target": "exp:1", "alternatives": ["exp:2", "gauss:0,1"]})J");
  const auto r = verify(path);
  EXPECT_EQ(r.code, kConfigError);
  EXPECT_NE(r.err.find("support mismatch"), std::string::npos);
}

TEST(Verify, DivergentJExitsThree) {
  // score difference ~ x, not square integrable under a Cauchy-type tail
  const auto path = write_text("heavy.json", R"J({"target": "gauss:0,1",
    "alternatives": [{"unnormalized": "1/(1+x^2)", "support": ["-inf", "inf"]}]})J");
  const auto r = verify(path);
  EXPECT_EQ(r.code, kNumericalError);
  EXPECT_NE(r.err.find("divergent-J"), std::string::npos) << r.err;
}

TEST(Verify, ParseErrorsExitTwo) {
  EXPECT_EQ(verify(write_text("bad.json", "{\"target\": ")).code, kConfigError);
  EXPECT_EQ(verify(write_text("badexpr.json", R"J({"target": "gauss:0,1",
    "alternatives": [{"unnormalized": "exp(-x^2", "support": ["-inf", "inf"]}]})J")).code, kConfigError);
  EXPECT_EQ(verify("/nonexistent.json").code, kConfigError);
}

TEST(Verify, FailingCheckExitsOne) {
  // the exponential(0.5) alternative exceeds the claimed kappa_1 = 1
  const auto path = write_text("half.json", R"J({"target": "exp:1", "alternatives": ["exp:0.5"],
    "observables": [{"kind": "poly", "coeffs": [0, 1]}]})J");
  const auto r = verify(path);
  EXPECT_EQ(r.code, kCheckFailed);
  EXPECT_NE(r.err.find("FAIL corollary_kappa1"), std::string::npos);
}

TEST(Characterize, SameAndDifferent) {
  CharacterizeOptions o;
  o.target = "semicircle";
  std::ostringstream out, err;
  EXPECT_EQ(cmd_characterize(o, out, err), 0) << err.str();
  o.target = "gauss:0,1";
  o.alt = "quartic";
  std::ostringstream out2, err2;
  EXPECT_EQ(cmd_characterize(o, out2, err2), 0) << err2.str();
  EXPECT_NE(out2.str().find("characterization_evidence"), std::string::npos);
}

TEST(Ingest, GenerateThenCompare) {
  IngestCommandOptions g;
  g.generate = "gauss:0,1";
  g.n = 20000;
  g.seed = 7;
  g.out = temp_path("draws.txt");
  std::ostringstream out, err;
  ASSERT_EQ(cmd_ingest(g, out, err), 0) << err.str();
  IngestCommandOptions c;
  c.samples = *std::optional<std::string>(g.out);
  c.target = "gauss:0,1";
  std::ostringstream out2, err2;
  ASSERT_EQ(cmd_ingest(c, out2, err2), 0) << err2.str();
  EXPECT_EQ(csv_field(out2.str(), "n", 1), 20000.0);
  EXPECT_LE(csv_field(out2.str(), "J", 1), 0.05);
}

TEST(Ingest, BadSampleFileExitsTwo) {
  IngestCommandOptions c;
  c.samples = write_text("bad_samples.txt", "1\n2\nthree\n4\n5\n6\n7\n8\n9\n10\n11\n");
  std::ostringstream out, err;
  EXPECT_EQ(cmd_ingest(c, out, err), kConfigError);
  EXPECT_NE(err.str().find("line 3"), std::string::npos);
}

TEST(Binary, EndToEnd) {
  std::string text;
  EXPECT_EQ(run_binary("distance --target exp:1 --alt exp:2", &text), 0);
  EXPECT_NE(text.find("TV,0.5"), std::string::npos) << text;
  EXPECT_EQ(run_binary("solve --target exp:1 --obs poly:0,1 --at 1.0", &text), 0);
  EXPECT_NEAR(csv_field(text, "f", 2), -1.0, 1e-9) << text;
  EXPECT_EQ(run_binary("--help"), 0);
  EXPECT_EQ(run_binary("distance --target exp:1"), kConfigError);
  EXPECT_EQ(run_binary("nonsense"), kConfigError);
  EXPECT_EQ(run_binary("distance --target exp:1 --alt gauss:0,1", &text), kConfigError);
  EXPECT_NE(text.find("support mismatch"), std::string::npos);
}

}  // namespace
