#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include <cli.hpp>
#include <mdpalloc/benchgen.hpp>
#include <mdpalloc/json_io.hpp>

using namespace mdpalloc;

namespace {

std::string fixture(const char* name) { return std::string(MDPALLOC_FIXTURE_DIR) + "/" + name; }

struct Result {
  int code;
  std::string out, err;
  Json json() const { return Json::parse(out); }
};

Result invoke(std::vector<std::string> args) {
  args.insert(args.begin(), "mdpalloc");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::vector<std::string> lines(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream in(s);
  for (std::string l; std::getline(in, l);)
    if (!l.empty()) out.push_back(l);
  return out;
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::istringstream in(line);
  for (std::string f; std::getline(in, f, ',');) out.push_back(f);
  return out;
}

std::filesystem::path temp_file(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("mdpalloc_test_" + std::to_string(::getpid()) + "_" + name);
}

}  // namespace

TEST(Cli, SolveExampleAgent) {
  const Result r = invoke({"solve", fixture("example_agent.json")});
  ASSERT_EQ(r.code, 0) << r.err;
  const Json j = r.json();
  EXPECT_EQ(j["status"], "optimal");
  EXPECT_EQ(j["bundle"], Json::array({1, 1, 0}));
  EXPECT_NEAR(j["objective"].get<double>(), 95.3, 0.1);
}

TEST(Cli, SolveModesAgree) {
  const double binary = invoke({"solve", fixture("example_agent.json")}).json()["objective"];
  const double nonbinary =
      invoke({"solve", fixture("example_agent.json"), "--mode", "constrained-nonbinary"}).json()["objective"];
  const double global = invoke({"solve", fixture("example_agent.json"), "--global-norm"}).json()["objective"];
  EXPECT_NEAR(binary, nonbinary, 1e-6);
  EXPECT_NEAR(binary, global, 1e-6);
  const Result mdp = invoke({"solve", fixture("example_agent.json"), "--mode", "mdp"});
  ASSERT_EQ(mdp.code, 0);
  EXPECT_GE(mdp.json()["objective"].get<double>(), binary - 1e-9);
}

TEST(Cli, ZeroRewardAgentHasZeroObjective) {
  const Result r = invoke({"solve", fixture("zero_reward_agent.json")});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NEAR(r.json()["objective"].get<double>(), 0.0, 1e-12);
}

TEST(Cli, ExitCodes) {
  EXPECT_EQ(invoke({"solve", fixture("infeasible_agent.json")}).code, cli::kExitInfeasible);
  EXPECT_EQ(invoke({"solve", fixture("malformed.json")}).code, cli::kExitParse);
  EXPECT_EQ(invoke({"solve", fixture("nope.json")}).code, cli::kExitParse);
  EXPECT_EQ(invoke({"solve", fixture("example_agent.json"), "--mode", "bogus"}).code, cli::kExitParse);
  EXPECT_EQ(invoke({"frobnicate"}).code, cli::kExitParse);
  EXPECT_EQ(invoke({"--help"}).code, 0);
  EXPECT_EQ(invoke({"auction", fixture("example_auction.json"), "--vcg", "--distributed", "2"}).code, cli::kExitParse);
  EXPECT_EQ(invoke({"bench", "--levels", "2"}).code, cli::kExitParse);
}

TEST(Cli, FlatBaselineBlowsUp) {
  DeliveryParams p;
  p.grid_n = 3;
  p.num_agents = 1;
  p.num_resources = 26;
  const auto path = temp_file("wide.json");
  write_json_file(path.string(), to_json(gen_delivery(p)));
  EXPECT_EQ(invoke({"auction", path.string(), "--flat"}).code, cli::kExitBlowup);
  std::filesystem::remove(path);
}

TEST(Cli, AuctionBothSolversAgree) {
  for (const char* f : {"example_auction.json", "delivery_small.json"}) {
    const Result r = invoke({"auction", fixture(f), "--mdp-wdp", "--flat"});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_LE(r.json()["welfare_difference"].get<double>(), 1e-6) << f;
  }
}

TEST(Cli, VcgPaymentsAreReported) {
  const Result r = invoke({"auction", fixture("example_auction.json"), "--vcg"});
  ASSERT_EQ(r.code, 0) << r.err;
  const Json j = r.json();
  const Json& agents = j["mdp_wdp"]["agents"];
  ASSERT_EQ(agents.size(), 2u);
  for (const auto& a : agents) EXPECT_GE(a["payment"].get<double>(), -1e-9);
}

TEST(Cli, DistributedRunFlagsTheCheater) {
  const Json central = invoke({"auction", fixture("example_auction.json"), "--no-tiebreak"}).json();
  const Result r = invoke({"auction", fixture("example_auction.json"), "--distributed", "4", "--adversary", "inflate:1"});
  ASSERT_EQ(r.code, 0) << r.err;
  const Json j = r.json();
  EXPECT_NEAR(j["mdp_wdp"]["welfare"].get<double>(), central["mdp_wdp"]["welfare"].get<double>(), 1e-9);
  EXPECT_EQ(j["mdp_wdp"]["audit"]["flagged_workers"], Json::array({1}));
}

TEST(Cli, EncryptedBidsGiveTheSameOutcome) {
  const Json plain = invoke({"auction", fixture("example_auction.json")}).json();
  const Result r = invoke({"auction", fixture("example_auction.json"), "--encrypt-bids", "7"});
  ASSERT_EQ(r.code, 0) << r.err;
  const Json j = r.json();
  EXPECT_NEAR(j["mdp_wdp"]["welfare"].get<double>(), plain["mdp_wdp"]["welfare"].get<double>(), 1e-6);
  for (std::size_t m = 0; m < 2; ++m)
    EXPECT_EQ(j["mdp_wdp"]["agents"][m]["bundle"], plain["mdp_wdp"]["agents"][m]["bundle"]);
  EXPECT_EQ(j["mdp_wdp"]["encrypted"], true);
}

TEST(Cli, GenWritesLoadableInstances) {
  const auto path = temp_file("gen.json");
  ASSERT_EQ(invoke({"gen", "delivery", "--grid", "3", "--agents", "2", "--resources", "3", "--out", path.string()}).code, 0);
  EXPECT_EQ(auction_from_json(read_json_file(path.string())).num_agents(), 2);
  std::filesystem::remove(path);
  const Result r = invoke({"gen", "example-agent"});
  ASSERT_EQ(r.code, 0);
  EXPECT_NO_THROW(cmdp_from_json(r.json()));
}

TEST(Bench, GoldenHeader) {
  const Result r = invoke({"bench", "--grid", "3", "--agents", "2", "--resources", "2"});
  ASSERT_EQ(r.code, 0) << r.err;
  std::ifstream golden(fixture("bench_header.csv"));
  std::string expect;
  std::getline(golden, expect);
  EXPECT_EQ(lines(r.out).front(), expect);
}

TEST(Bench, GridTimesRepetitions) {
  const Result r = invoke({"bench", "--grid", "3", "--agents", "2", "--resources", "3", "--c-loc", "0.2,0.8",
                           "--c-glob", "0.2,0.8", "--reps", "2"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto rows = lines(r.out);
  ASSERT_EQ(rows.size(), 1u + 8u);
  const auto header = split(rows[0]);
  const auto col = [&](const std::string& name) {
    return static_cast<std::size_t>(std::find(header.begin(), header.end(), name) - header.begin());
  };
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto f = split(rows[i]);
    ASSERT_EQ(f.size(), header.size());
    EXPECT_EQ(f[col("status")], "optimal");
    EXPECT_EQ(f[col("schema_version")], "1");
  }
}

TEST(Bench, SameSeedSameWelfare) {
  const std::vector<std::string> args = {"bench", "--grid", "3", "--agents", "2", "--resources", "3", "--seed-base", "11"};
  const auto a = lines(invoke(args).out), b = lines(invoke(args).out);
  ASSERT_EQ(a.size(), 2u);
  const auto header = split(a[0]);
  const std::size_t w = std::find(header.begin(), header.end(), "welfare") - header.begin();
  EXPECT_EQ(split(a[1])[w], split(b[1])[w]);
}

TEST(Bench, ExtremeLevelsSolveQuickly) {
  const Result r = invoke({"bench", "--grid", "3", "--agents", "3", "--resources", "4", "--levels", "0,1"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto rows = lines(r.out);
  ASSERT_EQ(rows.size(), 3u);
  const auto header = split(rows[0]);
  const std::size_t st = std::find(header.begin(), header.end(), "status") - header.begin();
  for (std::size_t i = 1; i < rows.size(); ++i) EXPECT_EQ(split(rows[i])[st], "optimal");
}

TEST(Bench, BudgetOverrunIsRecordedNotFatal) {
  const Result r = invoke({"bench", "--grid", "4", "--agents", "3", "--resources", "8", "--solver", "flat,mdp-wdp",
                           "--time-budget-ms", "1"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto rows = lines(r.out);
  ASSERT_EQ(rows.size(), 3u);
  const auto header = split(rows[0]);
  const std::size_t st = std::find(header.begin(), header.end(), "status") - header.begin();
  EXPECT_EQ(split(rows[1])[st], "timeout");
}

TEST(Bench, ThreadsFromEnvironment) {
  ::setenv("MDPALLOC_THREADS", "3", 1);
  EXPECT_EQ(cli::default_threads(), 3);
  ::setenv("MDPALLOC_THREADS", "zero", 1);
  EXPECT_EQ(cli::default_threads(), 1);
  ::unsetenv("MDPALLOC_THREADS");
  EXPECT_EQ(cli::default_threads(), 1);
}
