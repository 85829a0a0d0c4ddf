#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>
#include <json.hpp>

#include "../../tools/gtplan/cli.hpp"

namespace pooltest::cli {
namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result gtplan(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = std::filesystem::temp_directory_path() /
           (std::string("pooltest-cli-") + ::testing::UnitTest::GetInstance()->current_test_info()->name());
    std::filesystem::remove_all(dir_);
    std::filesystem::create_directories(dir_);
  }
  void TearDown() override { std::filesystem::remove_all(dir_); }
  std::string path(const std::string& name) const { return (dir_ / name).string(); }
  std::filesystem::path dir_;
};

TEST_F(CliTest, PlanWritesConfigAndState) {
  const auto r = gtplan({"plan", "--alg", "gbs", "--n", "64", "--d", "2", "--out", path("plan.json")});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto doc = nlohmann::json::parse(slurp(path("plan.json")));
  EXPECT_EQ(doc["config"]["planner"]["n"], 64);
  EXPECT_TRUE(doc.contains("planner_state"));
  EXPECT_EQ(doc["summary"]["worst_case_bound"], 13);  // ceil(log2 2016) + 2
  EXPECT_NE(r.out.find("worst case <= 13"), std::string::npos) << r.out;
}

TEST_F(CliTest, PlanRejectsMixedParameters) {
  EXPECT_EQ(gtplan({"plan", "--alg", "gbs", "--n", "8", "--alpha", "0.1", "--out", path("p")}).code, 2);
  EXPECT_EQ(gtplan({"plan", "--alg", "nt", "--n", "8", "--out", path("p")}).code, 2);
  EXPECT_EQ(gtplan({"plan", "--alg", "quantum", "--n", "8", "--d", "1", "--out", path("p")}).code, 2);
  EXPECT_EQ(gtplan({"plan", "--alg", "gbs", "--n", "8", "--d", "9", "--out", path("p")}).code, 1);
}

TEST_F(CliTest, DilutionPoolSize) {
  const auto r = gtplan({"dilution", "--viral-load", "1e6", "--v95", "1e3", "--replicates", "3"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(nlohmann::json::parse(r.out)["pool_size"], 57);
  const auto bad = gtplan({"dilution", "--viral-load", "1e6", "--v95", "1e3", "--v50", "2e3", "--gamma-star", "0.1"});
  EXPECT_EQ(bad.code, 1);
  EXPECT_EQ(gtplan({"dilution", "--v95", "1e3"}).code, 2);
}

TEST_F(CliTest, SimulateExhaustiveGbs) {
  const auto r = gtplan({"simulate", "--alg", "gbs", "--n", "8", "--d", "1", "--exhaustive"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("max=4 mean=4"), std::string::npos) << r.out;
}

TEST_F(CliTest, SimulateIsDeterministicGivenASeed) {
  const std::vector<std::string> args = {"simulate", "--alg", "nt", "--n", "16", "--alpha", "0.1",
                                         "--trials", "2000", "--seed", "7"};
  auto a = args;
  a.insert(a.end(), {"--json", path("a.json"), "--threads", "1"});
  auto b = args;
  b.insert(b.end(), {"--json", path("b.json"), "--threads", "3"});
  ASSERT_EQ(gtplan(a).code, 0);
  ASSERT_EQ(gtplan(b).code, 0);
  EXPECT_EQ(slurp(path("a.json")), slurp(path("b.json")));
}

TEST_F(CliTest, SimulateUsageErrors) {
  EXPECT_EQ(gtplan({"simulate", "--alg", "gbs", "--n", "8", "--d", "1", "--trials", "0", "--seed", "1"}).code, 2);
  EXPECT_EQ(gtplan({"simulate", "--alg", "gbs", "--n", "8", "--d", "1", "--trials", "10"}).code, 2);
  EXPECT_EQ(gtplan({"simulate", "--alg", "gbs", "--n", "30", "--d", "1", "--exhaustive"}).code, 1);
  EXPECT_EQ(gtplan({"frobnicate"}).code, 2);
  EXPECT_EQ(gtplan({"--help"}).code, 0);
}

TEST_F(CliTest, SessionRoundTrip) {
  ASSERT_EQ(gtplan({"plan", "--alg", "gbs", "--n", "8", "--d", "1", "--replicates", "1", "--mode", "none",
                    "--out", path("s.json")})
                .code,
            0);
  auto r = gtplan({"session", "start", "--file", path("s.json")});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("query 0 (replicate 1): samples 0,1,2,3,4,5,6,7"), std::string::npos) << r.out;
  r = gtplan({"session", "report", "--file", path("s.json"), "--outcomes", "0:-"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("complete"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("positive: (none)"), std::string::npos) << r.out;
}

TEST_F(CliTest, SessionUnknownQueryLeavesFileUntouched) {
  ASSERT_EQ(gtplan({"plan", "--alg", "mst", "--n", "16", "--d", "2", "--out", path("s.json")}).code, 0);
  ASSERT_EQ(gtplan({"session", "start", "--file", path("s.json")}).code, 0);
  const std::string before = slurp(path("s.json"));
  EXPECT_EQ(gtplan({"session", "report", "--file", path("s.json"), "--outcomes", "999:+"}).code, 1);
  EXPECT_EQ(gtplan({"session", "report", "--file", path("s.json"), "--outcomes", "0:maybe"}).code, 2);
  EXPECT_EQ(slurp(path("s.json")), before);
}

TEST_F(CliTest, NtTable) {
  const auto r = gtplan({"nt-table", "--alpha", "0.1", "--n", "16", "--out", path("t.json")});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("G(0,16) = 7.6945355"), std::string::npos) << r.out;
  const auto doc = nlohmann::json::parse(slurp(path("t.json")));
  EXPECT_EQ(doc["n_max"], 16);
  EXPECT_EQ(nlohmann::json::parse(gtplan({"nt-table", "--alpha", "0.1", "--n", "4"}).out)["n_max"], 4);
  EXPECT_EQ(gtplan({"nt-table", "--alpha", "1.5", "--n", "16"}).code, 1);
}

}  // namespace
}  // namespace pooltest::cli
