#include <gtest/gtest.h>

#include <sys/wait.h>
#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "home/data.hpp"
#include "home/model.hpp"

namespace fs = std::filesystem;
using home::Matrix;

namespace {

const std::string kCli = HOME_CLI_PATH;
const std::string kFixtures = HOME_FIXTURE_DIR;

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("home_cli_" + std::to_string(::getpid()) + "_" +
            ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  // Runs the CLI with stdout/stderr captured to files; returns the exit code.
  int run(const std::string& args, const std::string& env = "") {
    const std::string cmd = env + " " + kCli + " " + args + " > " + (dir_ / "stdout").string() +
                            " 2> " + (dir_ / "stderr").string();
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }
  std::string smoke() const { return "--config " + kFixtures + "/smoke.ini"; }

  static std::string slurp(const std::string& p) {
    std::ifstream f(p, std::ios::binary);
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
  }

  std::vector<nlohmann::json> jsonl(const std::string& p) const {
    std::vector<nlohmann::json> out;
    std::istringstream is(slurp(p));
    std::string line;
    while (std::getline(is, line)) out.push_back(nlohmann::json::parse(line));
    return out;
  }

  fs::path dir_;
};

}  // namespace

TEST_F(Cli, HelpExitsZero) {
  EXPECT_EQ(run("--help"), 0);
  EXPECT_EQ(run("train --help"), 0);
  EXPECT_NE(slurp(path("stdout")).find("--config"), std::string::npos);
}

TEST_F(Cli, UsageErrorsExitOne) {
  EXPECT_EQ(run(""), 1);
  EXPECT_EQ(run("frobnicate"), 1);
  EXPECT_EQ(run("train --seed notanumber"), 1);
  EXPECT_EQ(run("train --set train.nonsense=1 --out " + path("o")), 1);
  const auto err = nlohmann::json::parse(slurp(path("stderr")));
  EXPECT_EQ(err["error"], "ConfigError");
  EXPECT_EQ(err["exit_code"], 1);
}

TEST_F(Cli, MissingConfigFileIsErrorRecord) {
  EXPECT_NE(run("train --config " + path("absent.ini") + " --out " + path("o")), 0);
  const std::string err = slurp(path("stderr"));
  EXPECT_EQ(std::count(err.begin(), err.end(), '\n'), 1);
  const auto j = nlohmann::json::parse(err);
  EXPECT_TRUE(j.contains("error"));
  EXPECT_TRUE(j.contains("message"));
  EXPECT_TRUE(j.contains("version"));
}

TEST_F(Cli, TrainTwiceGivesIdenticalMetrics) {
  const std::string args = "train " + smoke() + " --variant HOME-T2-O3-Self-All --seed 7 --threads 1";
  ASSERT_EQ(run(args + " --out " + path("a")), 0);
  ASSERT_EQ(run(args + " --out " + path("b")), 0);
  const std::string a = slurp(path("a/metrics.jsonl"));
  EXPECT_FALSE(a.empty());
  EXPECT_EQ(a, slurp(path("b/metrics.jsonl")));
  EXPECT_EQ(slurp(path("a/checkpoint.bin")), slurp(path("b/checkpoint.bin")));

  const auto recs = jsonl(path("a/metrics.jsonl"));
  ASSERT_EQ(recs.size(), 4u);  // 2 epochs x 2 steps
  for (const char* k : {"iteration", "epoch", "lr", "loss_total", "loss_invariance",
                        "loss_redundancy_per_view", "config_hash", "version"}) {
    EXPECT_TRUE(recs[0].contains(k)) << k;
  }
  EXPECT_EQ(recs[0]["loss_redundancy_per_view"].size(), 2u);
  const auto timing = jsonl(path("a/timing.jsonl"));
  ASSERT_EQ(timing.size(), 4u);
  EXPECT_TRUE(timing[0].contains("wall_ms"));
  EXPECT_EQ(timing[0]["config_hash"], recs[0]["config_hash"]);
}

TEST_F(Cli, ThreadedTrainMatchesSequential) {
  ASSERT_EQ(run("train " + smoke() + " --threads 1 --out " + path("a")), 0);
  ASSERT_EQ(run("train " + smoke() + " --threads 4 --out " + path("b")), 0);
  const auto a = jsonl(path("a/metrics.jsonl")), b = jsonl(path("b/metrics.jsonl"));
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_NEAR(a[i]["loss_total"].get<double>(), b[i]["loss_total"].get<double>(), 1e-10);
  }
}

TEST_F(Cli, ZeroLrKeepsInitialCheckpoint) {
  ASSERT_EQ(run("train " + smoke() + " --lr 0 --out " + path("z")), 0);
  EXPECT_EQ(slurp(path("z/checkpoint.bin")), slurp(path("z/checkpoint_init.bin")));
  for (const auto& r : jsonl(path("z/metrics.jsonl"))) EXPECT_EQ(r["lr"].get<double>(), 0.0);
}

TEST_F(Cli, EvalWritesProbeRecord) {
  ASSERT_EQ(run("train " + smoke() + " --out " + path("t")), 0);
  ASSERT_EQ(run("eval " + smoke() + " --out " + path("t")), 0);
  const auto probe = nlohmann::json::parse(slurp(path("t/probe.json")));
  const double acc = probe["accuracy"];
  EXPECT_GE(acc, 0.0);
  EXPECT_LE(acc, 1.0);
  EXPECT_EQ(probe["test_size"], 128);
  EXPECT_TRUE(probe.contains("config_hash"));
  ASSERT_EQ(run("eval " + smoke() + " --checkpoint " + path("t/checkpoint_init.bin") +
                " --out " + path("u")),
            0);
  EXPECT_EQ(nlohmann::json::parse(slurp(path("u/probe.json")))["checkpoint"],
            path("t/checkpoint_init.bin"));
  EXPECT_EQ(run("eval " + smoke() + " --checkpoint " + path("missing.bin") + " --out " +
                path("u")),
            2);
}

TEST_F(Cli, CheckpointRoundTripThroughFiles) {
  ASSERT_EQ(run("train " + smoke() + " --out " + path("t")), 0);
  const std::string bytes = slurp(path("t/checkpoint.bin"));
  const auto model = home::load_checkpoint(path("t/checkpoint.bin"));
  home::save_checkpoint(model, path("again.bin"));
  EXPECT_EQ(slurp(path("again.bin")), bytes);
}

TEST_F(Cli, MomentsOnHadamardFixture) {
  ASSERT_EQ(run("moments --input " + kFixtures + "/hadamard16.csv --set audit.sampling=full --out " +
                path("m")),
            0);
  std::istringstream is(slurp(path("m/moments.csv")));
  std::string line;
  std::getline(is, line);
  EXPECT_EQ(line, "order,indices,views,moment");
  std::size_t rows = 0;
  while (std::getline(is, line)) {
    const double m = std::stod(line.substr(line.rfind(',') + 1));
    EXPECT_LE(std::abs(m), 1e-15) << line;
    ++rows;
  }
  EXPECT_EQ(rows, 28u + 56u);
  EXPECT_TRUE(fs::exists(path("m/audit_summary.csv")));
  EXPECT_TRUE(fs::exists(path("m/audit_histogram.csv")));
}

TEST_F(Cli, FullAndExhaustiveSampledAuditsAreIdentical) {
  const std::string in = "moments --input " + kFixtures + "/hadamard16.csv";
  ASSERT_EQ(run(in + " --set audit.sampling=full --out " + path("full")), 0);
  ASSERT_EQ(run(in + " --set audit.sampling=sampled --set audit.sample_counts=2:28,3:56 --out " +
                path("samp")),
            0);
  for (const char* f : {"moments.csv", "audit_summary.csv", "audit_histogram.csv"}) {
    EXPECT_EQ(slurp(path(std::string("full/") + f)), slurp(path(std::string("samp/") + f))) << f;
  }
}

TEST_F(Cli, MomentsFromCheckpoint) {
  ASSERT_EQ(run("train " + smoke() + " --out " + path("t")), 0);
  ASSERT_EQ(run("moments " + smoke() + " --out " + path("t")), 0);
  const auto rec = nlohmann::json::parse(slurp(path("stdout")));
  EXPECT_EQ(rec["dim"], 8);
  EXPECT_EQ(rec["orders"].size(), 2u);
}

TEST_F(Cli, MalformedCsvFails) {
  EXPECT_EQ(run("moments --input " + kFixtures + "/malformed.csv --out " + path("m")), 2);
  EXPECT_EQ(nlohmann::json::parse(slurp(path("stderr")))["error"], "IoError");
}

TEST_F(Cli, DiagnoseDefaultAndSeedChange) {
  ASSERT_EQ(run("diagnose --out " + path("d1")), 0);
  const auto a = nlohmann::json::parse(slurp(path("d1/diagnose.json")));
  EXPECT_TRUE(a["pass"].get<bool>());
  ASSERT_EQ(run("diagnose --seed 99 --out " + path("d2")), 0);
  const auto b = nlohmann::json::parse(slurp(path("d2/diagnose.json")));
  for (const auto* j : {&a, &b}) {
    for (double mi : (*j)["pairwise_mi"]) EXPECT_LE(mi, 0.01);
    EXPECT_GE((*j)["total_correlation"].get<double>(), 0.6);
  }
  EXPECT_NE(a["pairwise_mi"], b["pairwise_mi"]);
  EXPECT_NE(slurp(path("stdout")).find("PASS"), std::string::npos);
}

TEST_F(Cli, OutputDirFromEnvironment) {
  ASSERT_EQ(run("diagnose --samples 1000", "HOME_SSL_OUT_DIR=" + path("envout")), 0);
  EXPECT_TRUE(fs::exists(path("envout/diagnose.json")));
}
