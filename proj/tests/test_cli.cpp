#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "cli.hpp"
#include "gds/binary_io.hpp"
#include "gds/checkpoint.hpp"
#include "gds/export.hpp"
#include "gds/synth.hpp"

using namespace gds;
namespace fs = std::filesystem;

namespace {

const char* kTinyConfig =
    "seed = 5\n"
    "[data]\nsamples = 10\nheight = 32\nwidth = 32\noffsets = -2,0,2\njitter_hi = 2\n"
    "[model]\nsignature_dim = 3\npyramid_channels = 4,6,8,8\nembed_channels = 8\nembed_hidden = 8\n"
    "decoder_channels = 8\n"
    "[train]\nepochs = 1\nlr = 1e-3\nkl_warmup_epochs = 1\n"
    "[eval]\npanel_size = 3\n";

struct CliResult {
  int status;
  std::string out, err;
};

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("gds_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
    std::ofstream(dir_ / "tiny.ini") << kTinyConfig;
  }

  CliResult run(std::vector<std::string> args) {
    args.insert(args.begin(), "gds");
    std::ostringstream out, err;
    const int status = cli::run(args, out, err);
    return {status, out.str(), err.str()};
  }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }
  std::string config() const { return path("tiny.ini"); }

  void gen(const std::string& name = "data.gds1") {
    ASSERT_EQ(run({"--config", config(), "gen", "--out", path(name)}).status, 0);
  }

  fs::path dir_;
};

}  // namespace

TEST_F(CliTest, GenIsDeterministicAndSeedSensitive) {
  auto r = run({"--config", config(), "gen", "--out", path("a.gds1")});
  ASSERT_EQ(r.status, 0) << r.err;
  EXPECT_NE(r.out.find("10 samples"), std::string::npos);
  ASSERT_EQ(run({"--config", config(), "gen", "--out", path("b.gds1")}).status, 0);
  ASSERT_EQ(run({"--config", config(), "--seed", "6", "gen", "--out", path("c.gds1")}).status, 0);
  EXPECT_EQ(read_file_bytes(path("a.gds1")), read_file_bytes(path("b.gds1")));
  EXPECT_NE(read_file_bytes(path("a.gds1")), read_file_bytes(path("c.gds1")));
}

TEST_F(CliTest, DefaultGenWrites250Samples) {
  ASSERT_EQ(run({"gen", "--out", path("d.gds1")}).status, 0);
  EXPECT_EQ(read_container(path("d.gds1")).samples.size(), 250u);
}

TEST_F(CliTest, InvalidSplitIsExitTwoNamingKey) {
  std::ofstream(dir_ / "bad.ini") << "[data]\nsplit_train = 0.5\n";
  auto r = run({"--config", path("bad.ini"), "gen", "--out", path("x.gds1")});
  EXPECT_EQ(r.status, 2);
  EXPECT_NE(r.err.find("data.split_train"), std::string::npos) << r.err;
  std::ofstream(dir_ / "unknown.ini") << "[train]\nmomentum = 0.9\n";
  r = run({"--config", path("unknown.ini"), "gen", "--out", path("x.gds1")});
  EXPECT_EQ(r.status, 2);
  EXPECT_NE(r.err.find("train.momentum"), std::string::npos) << r.err;
}

TEST_F(CliTest, UsageErrorsExitTwo) {
  EXPECT_EQ(run({}).status, 2);
  EXPECT_EQ(run({"frobnicate"}).status, 2);
  EXPECT_EQ(run({"gen"}).status, 2);
  EXPECT_EQ(run({"--threads", "0", "gen", "--out", path("x")}).status, 2);
}

TEST_F(CliTest, TrainWritesArtifactsAndResumes) {
  gen();
  auto r = run({"--config", config(), "train", "--data", path("data.gds1"), "--out", path("run"), "--ablation",
                "esg_only"});
  ASSERT_EQ(r.status, 0) << r.err;
  EXPECT_TRUE(fs::exists(dir_ / "run" / "best.gdsc"));
  EXPECT_TRUE(fs::exists(dir_ / "run" / "history.csv"));
  EXPECT_NE(r.out.find("train.ablation = esg_only"), std::string::npos);
  const auto ckpt = load_checkpoint(path("run/last.gdsc"));
  EXPECT_EQ(*find_value(ckpt.config, "train.ablation"), "esg_only");
  EXPECT_EQ(*find_value(ckpt.config, "model.use_attention"), "false");

  r = run({"--config", config(), "train", "--data", path("data.gds1"), "--out", path("run"), "--ablation",
           "esg_only", "--from", path("run/last.gdsc"), "--epochs", "2"});
  ASSERT_EQ(r.status, 0) << r.err;
  EXPECT_NE(r.out.find("epoch 2 "), std::string::npos) << r.out;
  EXPECT_EQ(r.out.find("epoch 1 "), std::string::npos) << r.out;
  EXPECT_EQ(load_checkpoint(path("run/last.gdsc")).epoch, 2u);
  std::ifstream hist(dir_ / "run" / "history.csv");
  int lines = 0;
  for (std::string l; std::getline(hist, l);) ++lines;
  EXPECT_EQ(lines, 3);
}

TEST_F(CliTest, BadAblationIsUsageError) {
  gen();
  EXPECT_EQ(run({"--config", config(), "train", "--data", path("data.gds1"), "--out", path("r"), "--ablation",
                 "none"})
                .status,
            2);
}

TEST_F(CliTest, SampleWritesPanelFiles) {
  gen();
  ASSERT_EQ(run({"--config", config(), "train", "--data", path("data.gds1"), "--out", path("run")}).status, 0);
  auto r = run({"--config", config(), "sample", "--checkpoint", path("run/best.gdsc"), "--data",
                path("data.gds1"), "--sample-id", "3", "--out", path("panel")});
  ASSERT_EQ(r.status, 0) << r.err;
  int pgm = 0;
  for (const auto& e : fs::directory_iterator(dir_ / "panel")) pgm += e.path().extension() == ".pgm";
  EXPECT_EQ(pgm, 10);
  EXPECT_TRUE(fs::exists(dir_ / "panel" / "summary.csv"));

  ASSERT_EQ(run({"--config", config(), "sample", "--checkpoint", path("run/best.gdsc"), "--data",
                 path("data.gds1"), "--sample-id", "3", "--out", path("panel2")})
                .status,
            0);
  for (const char* f : {"hypothesis_00.pgm", "consensus.pgm", "dispersion.pgm", "summary.csv"}) {
    EXPECT_EQ(read_file_bytes(path(std::string("panel/") + f)), read_file_bytes(path(std::string("panel2/") + f)))
        << f;
  }

  ASSERT_EQ(run({"--config", config(), "sample", "--checkpoint", path("run/best.gdsc"), "--data",
                 path("data.gds1"), "--sample-id", "3", "-m", "1", "--out", path("single")})
                .status,
            0);
  for (auto px : decode_pgm(read_file_bytes(path("single/dispersion.pgm"))).pixels) EXPECT_EQ(px, 0);

  EXPECT_EQ(run({"--config", config(), "sample", "--checkpoint", path("run/best.gdsc"), "--data",
                 path("data.gds1"), "--sample-id", "99", "--out", path("p3")})
                .status,
            2);
}

TEST_F(CliTest, EvalOracleAndDeterminism) {
  gen();
  auto r = run({"--config", config(), "eval", "--oracle", "--data", path("data.gds1"), "--out", path("oracle")});
  ASSERT_EQ(r.status, 0) << r.err;
  std::ifstream summary(dir_ / "oracle" / "summary.csv");
  std::string header, row;
  std::getline(summary, header);
  std::getline(summary, row);
  EXPECT_EQ(row.substr(0, 9), "oracle,0,");

  ASSERT_EQ(run({"--config", config(), "train", "--data", path("data.gds1"), "--out", path("run")}).status, 0);
  for (const char* out : {"e1", "e2"}) {
    r = run({"--config", config(), "--threads", "2", "eval", "--checkpoint", path("run/best.gdsc"), "--data",
             path("data.gds1"), "--out", path(out)});
    ASSERT_EQ(r.status, 0) << r.err;
  }
  EXPECT_EQ(read_file_bytes(path("e1/per_sample.csv")), read_file_bytes(path("e2/per_sample.csv")));
  EXPECT_EQ(read_file_bytes(path("e1/summary.csv")), read_file_bytes(path("e2/summary.csv")));
}

TEST_F(CliTest, EvalEmptySplitExitsTwo) {
  std::ofstream(dir_ / "notest.ini") << "[data]\nsamples = 10\nheight = 32\nwidth = 32\noffsets = -2,0,2\n"
                                        "split_train = 0.9\nsplit_val = 0.1\nsplit_test = 0\n";
  ASSERT_EQ(run({"--config", path("notest.ini"), "gen", "--out", path("nt.gds1")}).status, 0);
  EXPECT_EQ(run({"eval", "--oracle", "--data", path("nt.gds1"), "--out", path("o")}).status, 2);
  EXPECT_EQ(run({"eval", "--data", path("nt.gds1"), "--out", path("o")}).status, 2);
}
