#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "fairtoll/cli.hpp"

using fairtoll::run_cli;
using Json = nlohmann::json;

namespace {

struct Run {
    int code;
    std::string out;
    std::string err;
};

Run run(const std::vector<std::string>& args) {
    std::ostringstream out, err;
    const int code = run_cli(args, out, err);
    return {code, out.str(), err.str()};
}

}  // namespace

TEST(Cli, SolveReportsEquilibrium) {
    const auto r = run({"solve", "--toll", "e1=8"});
    ASSERT_EQ(r.code, fairtoll::kExitOk) << r.err;
    const Json j = Json::parse(r.out);
    EXPECT_EQ(j["command"], "solve");
    EXPECT_EQ(j["scenario_digest"].get<std::string>().size(), 16u);
    EXPECT_DOUBLE_EQ(j["tolls"]["e1"].get<double>(), 8.0);
    EXPECT_NEAR(j["equilibrium"]["revenue"].get<double>(), 16.0, 1e-9);
    EXPECT_NEAR(j["equilibrium"]["group_cost"]["M"].get<double>(), 10.0, 1e-9);
    EXPECT_NEAR(j["equilibrium"]["edges"][0]["flow"].get<double>(), 2.0, 1e-9);
    EXPECT_LE(j["cost_identity_residual"].get<double>(), 1e-9);
}

TEST(Cli, RefundMaxMin) {
    const auto r = run({"refund", "--toll", "e1=8", "--policy", "maxmin"});
    ASSERT_EQ(r.code, fairtoll::kExitOk) << r.err;
    const Json j = Json::parse(r.out);
    const auto& refunds = j["scheme"]["refunds"];
    EXPECT_NEAR(refunds["H"].get<double>(), 0.0, 1e-9);
    EXPECT_NEAR(refunds["M"].get<double>(), 2.0, 1e-9);
    EXPECT_NEAR(refunds["L"].get<double>(), 2.8, 1e-9);
}

TEST(Cli, RefundProportional) {
    const auto r = run({"refund", "--toll", "e1=8", "--policy", "proportional"});
    ASSERT_EQ(r.code, fairtoll::kExitOk) << r.err;
    EXPECT_NE(r.out.find("\"refunds\""), std::string::npos);
}

TEST(Cli, ReproduceProp4) {
    const auto r = run({"reproduce", "prop4"});
    EXPECT_EQ(r.code, fairtoll::kExitOk) << r.err;
    const Json j = Json::parse(r.out);
    EXPECT_TRUE(j["mismatches"].empty());
}

TEST(Cli, GiniOfExplicitIncomes) {
    const auto r = run({"gini", "--incomes", "1,3", "--demands", "1,1"});
    ASSERT_EQ(r.code, fairtoll::kExitOk) << r.err;
    EXPECT_NEAR(Json::parse(r.out)["gini"].get<double>(), 0.25, 1e-15);
}

TEST(Cli, GiniOfScenario) {
    const auto r = run({"gini", "--scenario", "appendix-d"});
    ASSERT_EQ(r.code, fairtoll::kExitOk) << r.err;
    EXPECT_NEAR(Json::parse(r.out)["gini_ex_ante"].get<double>(), 1.0 / 6.0, 1e-12);
}

TEST(Cli, VerifyEndoExitCodes) {
    EXPECT_EQ(run({"verify-endo", "--toll", "e1=8", "--expect-equilibrium"}).code,
              fairtoll::kExitVerificationFailed);
    EXPECT_EQ(run({"verify-endo", "--toll", "e1=8"}).code, fairtoll::kExitOk);
    EXPECT_EQ(run({"verify-endo", "--toll", "e1=4", "--expect-equilibrium"}).code, fairtoll::kExitOk);
}

TEST(Cli, VerifyExoPasses) {
    const auto r = run({"verify-exo", "--toll", "e1=8"});
    EXPECT_EQ(r.code, fairtoll::kExitOk) << r.err;
    EXPECT_TRUE(Json::parse(r.out)["pass"].get<bool>());
}

TEST(Cli, SoSearch) {
    const auto r = run({"so-search", "--scenario", "appendix-d", "--grid", "40"});
    ASSERT_EQ(r.code, fairtoll::kExitOk) << r.err;
    const Json j = Json::parse(r.out);
    EXPECT_LE(j["total_cost"].get<double>(), j["total_cost_untolled"].get<double>() + j["grid_bound"].get<double>());
}

TEST(Cli, InputErrorsExitTwoWithEmptyStdout) {
    for (const std::vector<std::string>& args : std::vector<std::vector<std::string>>{
             {"frobnicate"},
             {},
             {"solve", "--scenario", "no-such-scenario.json"},
             {"solve", "--toll", "e9=1"},
             {"solve", "--toll", "e1=-1"},
             {"solve", "--toll", "e1"},
             {"solve", "--format", "xml"},
             {"reproduce", "prop9"},
             {"gini", "--incomes", "1,-2"}}) {
        const auto r = run(args);
        EXPECT_EQ(r.code, fairtoll::kExitInputError) << (args.empty() ? "" : args[0]);
        EXPECT_FALSE(r.err.empty());
        if (!args.empty() && args[0] != "frobnicate") EXPECT_TRUE(r.out.empty());
    }
}

TEST(Cli, ConvergenceFailureExitsOne) {
    const auto path = (std::filesystem::temp_directory_path() / "fairtoll_cli_two_stage.json").string();
    std::ofstream(path) << R"({"nodes": ["s", "m", "t"],
 "edges": [
  {"id": "a", "tail": "s", "head": "m", "a": 1, "b": 0.5, "p": 4},
  {"id": "b", "tail": "s", "head": "m", "a": 2, "b": 0.2, "p": 4},
  {"id": "c", "tail": "m", "head": "t", "a": 1, "b": 1, "p": 2},
  {"id": "d", "tail": "m", "head": "t", "a": 0.5, "b": 2, "p": 4},
  {"id": "e", "tail": "s", "head": "t", "a": 4, "b": 0.3, "p": 1}],
 "groups": [
  {"id": "A", "vot": 1, "income": 100, "demand": 3, "origin": "s", "destination": "t"},
  {"id": "B", "vot": 2.5, "income": 150, "demand": 2, "origin": "s", "destination": "t"},
  {"id": "C", "vot": 0.7, "income": 80, "demand": 4, "origin": "s", "destination": "m"}],
 "beta": 0.01})";
    const auto r = run({"solve", "--scenario", path, "--toll", "c=0.3", "--max-iters", "1"});
    std::filesystem::remove(path);
    EXPECT_EQ(r.code, fairtoll::kExitVerificationFailed);
    EXPECT_TRUE(r.out.empty());
}

TEST(Cli, OutputIsDeterministic) {
    const std::vector<std::string> args{"refund", "--toll", "e1=8", "--format", "csv"};
    EXPECT_EQ(run(args).out, run(args).out);
}

TEST(Cli, CsvIsKeyValueListing) {
    const auto r = run({"solve", "--toll", "e1=8", "--format", "csv"});
    ASSERT_EQ(r.code, fairtoll::kExitOk);
    std::istringstream in(r.out);
    std::string line;
    std::getline(in, line);
    EXPECT_EQ(line, "key,value");
    bool found = false;
    while (std::getline(in, line)) {
        EXPECT_NE(line.find(','), std::string::npos);
        if (line.rfind("tolls.e1,", 0) == 0) found = true;
    }
    EXPECT_TRUE(found);
}

TEST(Cli, TimingOnlyWhenRequested) {
    EXPECT_EQ(run({"solve"}).out.find("timing_ms"), std::string::npos);
    EXPECT_NE(run({"solve", "--timing"}).out.find("timing_ms"), std::string::npos);
}

TEST(Cli, VerifyExoOnSuppliedFlow) {
    const auto path = (std::filesystem::temp_directory_path() / "fairtoll_cli_flow.json").string();
    std::ofstream(path) << R"({"paths": {"H": [{"path": "e1", "flow": 2}], "M": [{"path": "e1", "flow": 1}],
                                  "L": [{"path": "e1", "flow": 1}, {"path": "e2", "flow": 4}]}})";
    const auto r = run({"verify-exo", "--toll", "e1=8", "--flow", path});
    EXPECT_EQ(r.code, fairtoll::kExitVerificationFailed);
    const Json j = Json::parse(r.out);
    EXPECT_FALSE(j["pass"].get<bool>());
    EXPECT_EQ(j["flow_source"], "file");
    std::ofstream(path) << R"({"paths": {"Z": []}})";
    EXPECT_EQ(run({"verify-exo", "--flow", path}).code, fairtoll::kExitInputError);
    std::filesystem::remove(path);
}
