#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "json.hpp"

namespace fs = std::filesystem;

namespace {

const char* kModel =
    R"("model":{"d":1,"params":{"p_table":[0.3],"p_tail":0.3},"phi":"harmonic","pi":"symmetric","init":"zero"})";

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    const char* bin = std::getenv("BDWALK_BIN");
    if (!bin) GTEST_SKIP() << "BDWALK_BIN not set";
    bin_ = bin;
    dir_ = fs::temp_directory_path() /
           ("bdwalk_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override {
    if (!dir_.empty()) fs::remove_all(dir_);
  }

  fs::path config(const std::string& name, const std::string& body) const {
    const fs::path p = dir_ / (name + ".json");
    std::ofstream(p) << body;
    return p;
  }

  // Runs the binary; returns the exit status and fills `out` with stdout+stderr.
  int run(const std::string& args, std::string* out = nullptr) const {
    const fs::path log = dir_ / "log.txt";
    const std::string cmd = "\"" + bin_ + "\" " + args + " > \"" + log.string() + "\" 2>&1";
    const int status = std::system(cmd.c_str());
    if (out) {
      std::ifstream in(log);
      std::stringstream ss;
      ss << in.rdbuf();
      *out = ss.str();
    }
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  }

  static std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
  }

  static nlohmann::json summary(const fs::path& out) {
    return nlohmann::json::parse(slurp(out / "summary.json"));
  }

  std::string bin_;
  fs::path dir_;
};

}  // namespace

TEST_F(Cli, CheckPasses) {
  const auto c = config("c", std::string("{\"schema\":1,") + kModel +
                                 R"(,"run":{"stop":{"n_jumps":5},"replicas":10,"seed":3},"analysis":{"hitting_mc_runs":100000}})");
  std::string log;
  EXPECT_EQ(run("check --config " + c.string() + " --out " + (dir_ / "o").string(), &log), 0) << log;
  const auto s = summary(dir_ / "o");
  EXPECT_EQ(s["command"], "check");
  EXPECT_EQ(s["verdict"], "pass");
  EXPECT_EQ(s["seed"], 3);
  EXPECT_TRUE(s["conditions"]["strongly_ergodic"]["holds"].get<bool>());
  EXPECT_NEAR(s["results"]["strong_sum"].get<double>(), 147.0 / 64.0, 1e-10);
  EXPECT_TRUE(fs::exists(dir_ / "o" / "data" / "stationary.csv"));
  EXPECT_NE(log.find("verdict: pass"), std::string::npos);
}

TEST_F(Cli, EstimateMuPrintsJson) {
  const auto c = config("c", std::string("{\"schema\":1,") + kModel + R"(,"run":{"stop":{"n_jumps":50},"replicas":500,"seed":1}})");
  std::string log;
  ASSERT_EQ(run("estimate-mu --config " + c.string() + " --out " + (dir_ / "o").string(), &log), 0) << log;
  std::istringstream lines(log);
  std::string line;
  nlohmann::json j;
  while (std::getline(lines, line))
    if (!line.empty() && line.front() == '{' && line.find("\"mu_hat\"") != std::string::npos) j = nlohmann::json::parse(line);
  ASSERT_FALSE(j.is_null()) << log;
  EXPECT_GT(j["mu_hat"].get<double>(), 1.0);
  EXPECT_EQ(j["n"], 50);
  EXPECT_EQ(j["replicas"], 500);
  ASSERT_EQ(j["ci"].size(), 2u);
  EXPECT_LT(j["ci"][0].get<double>(), j["mu_hat"].get<double>());
}

TEST_F(Cli, UnknownKeyIsConfigError) {
  const auto c = config("c", std::string("{\"schema\":1,") + kModel +
                                 R"(,"run":{"stop":{"n_jumps":5},"replicas":10,"seed":1},"bogus":1})");
  std::string log;
  EXPECT_EQ(run("check --config " + c.string() + " --out " + (dir_ / "o").string(), &log), 2);
  EXPECT_NE(log.find("ConfigError"), std::string::npos) << log;
  EXPECT_EQ(run("check --config " + (dir_ / "missing.json").string(), &log), 2);
  EXPECT_EQ(run("nonsense --config " + c.string(), &log), 2);
}

TEST_F(Cli, UnmetConditionsRefuseUnlessExploratory) {
  const auto c = config(
      "c",
      R"({"schema":1,"model":{"d":1,"params":{"p_table":[0.3],"p_tail":0.3},"phi":{"table":[1,0.3],"tail":0.6},"pi":"symmetric","init":"zero"},"run":{"stop":{"t_end":20},"replicas":100,"seed":1}})");
  std::string log;
  EXPECT_EQ(run("lln --config " + c.string() + " --out " + (dir_ / "o").string(), &log), 3) << log;
  const auto s = summary(dir_ / "o");
  EXPECT_EQ(s["verdict"], "refused");
  bool listed = false;
  for (const auto& u : s["unmet"]) listed = listed || u == "monotone_phi";
  EXPECT_TRUE(listed);
  const int code = run("lln --config " + c.string() + " --out " + (dir_ / "x").string() + " --exploratory", &log);
  EXPECT_TRUE(code == 0 || code == 1) << log;
  const auto x = summary(dir_ / "x");
  EXPECT_TRUE(x["exploratory"].get<bool>());
  EXPECT_NE(x["verdict"], "refused");
}

TEST_F(Cli, RerunIsByteIdentical) {
  const auto c = config("c", std::string("{\"schema\":1,") + kModel + R"(,"run":{"stop":{"n_jumps":20},"replicas":200,"seed":9}})");
  ASSERT_EQ(run("simulate --config " + c.string() + " --out " + (dir_ / "a").string()), 0);
  ASSERT_EQ(run("simulate --config " + c.string() + " --out " + (dir_ / "b").string()), 0);
  std::size_t files = 0;
  for (const auto& e : fs::recursive_directory_iterator(dir_ / "a")) {
    if (!e.is_regular_file()) continue;
    ++files;
    const auto rel = fs::relative(e.path(), dir_ / "a");
    EXPECT_EQ(slurp(e.path()), slurp(dir_ / "b" / rel)) << rel;
  }
  EXPECT_GE(files, 3u);
  ASSERT_EQ(run("simulate --config " + c.string() + " --out " + (dir_ / "s").string() + " --seed 10"), 0);
  EXPECT_NE(slurp(dir_ / "a" / "data" / "path.csv"), slurp(dir_ / "s" / "data" / "path.csv"));
}

TEST_F(Cli, TimeOverrideReplacesStop) {
  const auto c = config("c", std::string("{\"schema\":1,") + kModel + R"(,"run":{"stop":{"t_end":1000},"replicas":1000,"seed":2}})");
  std::string log;
  const int code = run("clt --config " + c.string() + " --out " + (dir_ / "o").string() + " --t 50 --replicas 1000", &log);
  EXPECT_TRUE(code == 0 || code == 1) << log;
  const auto s = summary(dir_ / "o");
  EXPECT_DOUBLE_EQ(s["results"]["t"].get<double>(), 50.0);
  EXPECT_TRUE(s["config"].contains("overrides"));
  EXPECT_EQ(run("clt --config " + c.string() + " --t 5 --n 5", &log), 2);
}
