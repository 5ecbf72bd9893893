// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cstdlib>
#include <sstream>

#include "rhnlm/cli.hpp"
#include "rhnlm/data.hpp"
#include "support.hpp"

namespace rhnlm {
namespace {

namespace fs = std::filesystem;

struct Outcome {
  int code;
  std::string out;
  std::string err;
};

Outcome run(std::vector<std::string> args) {
  args.insert(args.begin(), "rhnlm");
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

fs::path make_copy_data(const std::string& name) {
  const fs::path dir = testing::scratch_dir(name);
  const auto r = run({"synth", "--lag", "3", "--alphabet", "4", "--sequences", "60", "--out",
                      (dir / "data").string()});
  EXPECT_EQ(r.code, 0) << r.err;
  return dir;
}

std::vector<std::string> train_args(const fs::path& dir, const std::string& out) {
  const fs::path d = dir / "data";
  return {"train", "--train", (d / "train.txt").string(), "--valid", (d / "valid.txt").string(),
          "--test", (d / "test.txt").string(), "--depth", "2", "--hidden", "8", "--window", "10",
          "--epochs", "2", "--lr", "0.1", "--dropout-state", "0.2", "--out", (dir / out).string()};
}

TEST(Cli, PathsPrintsDeepStateGateLengths) {
  const auto r = run({"paths", "--arch", "rhn+hsg", "--depth", "30", "--horizon", "10"});
  EXPECT_EQ(r.code, 0);
  EXPECT_EQ(r.out, "10 40 70 100 130 160 190 220 250 280 310\n");
}

TEST(Cli, PathsCanEnumerate) {
  const auto r = run({"paths", "--arch", "stacked", "--depth", "3", "--horizon", "4", "--enumerate"});
  EXPECT_EQ(r.code, 0);
  EXPECT_EQ(r.out, "6\nenumerated: 6\nagree\n");
}

TEST(Cli, GradcheckPassesWithZeroExit) {
  const auto r = run({"gradcheck", "--depth", "2", "--hidden", "4", "--hsg"});
  EXPECT_EQ(r.code, 0) << r.out;
  EXPECT_NE(r.out.find("max relative error"), std::string::npos);
}

TEST(Cli, MissingInputsAndBadFlagsExitWithOne) {
  EXPECT_EQ(run({"train"}).code, 1);
  EXPECT_EQ(run({"train", "--no-such-flag"}).code, 1);
  EXPECT_EQ(run({"gradcheck", "--precision", "16"}).code, 1);
  EXPECT_EQ(run({}).code, 1);
  EXPECT_EQ(run({"eval", "--checkpoint", "/nonexistent/model.ckpt", "--corpus", "x"}).code, 1);
  EXPECT_EQ(run({"paths", "--arch", "lstm"}).code, 1);
}

TEST(Cli, HelpExitsCleanly) {
  const auto r = run({"--help"});
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("train"), std::string::npos);
}

TEST(Cli, TrainEvalPipelineAndDeterminism) {
  const fs::path dir = make_copy_data("cli_pipeline");
  const auto a = run(train_args(dir, "a"));
  ASSERT_EQ(a.code, 0) << a.err;
  const auto b = run(train_args(dir, "b"));
  ASSERT_EQ(b.code, 0) << b.err;
  const std::string curve = read_text_file(dir / "a" / "learning_curve.csv");
  EXPECT_EQ(curve, read_text_file(dir / "b" / "learning_curve.csv"));
  EXPECT_EQ(curve.substr(0, curve.find('\n')), "epoch,step,train_loss,valid_ppl,test_ppl,lr");
  for (const char* f : {"config.txt", "vocab.txt", "best.ckpt", "final.ckpt", "resume.ckpt"}) {
    EXPECT_TRUE(fs::exists(dir / "a" / f)) << f;
  }
  EXPECT_NE(read_text_file(dir / "a" / "config.txt").find("depth=2"), std::string::npos);

  const auto e = run({"eval", "--checkpoint", (dir / "a" / "final.ckpt").string(), "--corpus",
                      (dir / "data" / "test.txt").string(), "--out", (dir / "eval").string()});
  ASSERT_EQ(e.code, 0) << e.err;
  EXPECT_NE(e.out.find("perplexity"), std::string::npos);
  EXPECT_NE(e.out.find("query_loss"), std::string::npos);
  EXPECT_TRUE(fs::exists(dir / "eval" / "eval.csv"));

  const auto h = run({"hist", "--checkpoint", (dir / "a" / "final.ckpt").string(), "--corpus",
                      (dir / "data" / "valid.txt").string(), "--steps", "20", "--bins", "5",
                      "--out", (dir / "hist").string()});
  ASSERT_EQ(h.code, 0) << h.err;
  EXPECT_NE(h.out.find("values 160"), std::string::npos);

  const auto p = run({"probe", "--checkpoint", (dir / "a" / "final.ckpt").string(), "--origin",
                      "3", "--max-lag", "5", "--out", (dir / "probe").string()});
  ASSERT_EQ(p.code, 0) << p.err;
  EXPECT_EQ(p.out.substr(0, p.out.find('\n')), "lag,seed_norm,grad_norm,ratio");
}

TEST(Cli, ResumeFinishesTheRemainingEpochs) {
  const fs::path dir = make_copy_data("cli_resume");
  auto full = train_args(dir, "full");
  full[full.size() - 7] = "3";  // epochs
  ASSERT_EQ(full[full.size() - 8], "--epochs");
  ASSERT_EQ(run(full).code, 0);
  auto part = train_args(dir, "part");
  ASSERT_EQ(run(part).code, 0);
  auto resumed = full;
  resumed.back() = (dir / "resumed").string();
  resumed.push_back("--resume");
  resumed.push_back((dir / "part" / "resume.ckpt").string());
  const auto r = run(resumed);
  ASSERT_EQ(r.code, 0) << r.err;
  const std::string whole = read_text_file(dir / "full" / "learning_curve.csv");
  const std::string tail = read_text_file(dir / "resumed" / "learning_curve.csv");
  const std::string last_row = whole.substr(whole.rfind('\n', whole.size() - 2) + 1);
  EXPECT_EQ(tail.substr(tail.find('\n') + 1), last_row);
}

TEST(Cli, ConfigFileIsReadAndFlagsOverrideIt) {
  const fs::path dir = make_copy_data("cli_config");
  write_text_file(dir / "run.ini", "depth = 3\nhidden = 5\n");
  auto args = train_args(dir, "cfg");
  // Drop --depth and --hidden from the flags so the file supplies them.
  args.erase(args.begin() + 7, args.begin() + 11);
  args.push_back("--config");
  args.push_back((dir / "run.ini").string());
  args.push_back("--hidden");
  args.push_back("6");
  const auto r = run(args);
  ASSERT_EQ(r.code, 0) << r.err;
  const std::string echo = read_text_file(dir / "cfg" / "config.txt");
  EXPECT_NE(echo.find("depth=3"), std::string::npos) << echo;
  EXPECT_NE(echo.find("hidden=6"), std::string::npos) << echo;

  write_text_file(dir / "bad.ini", "depthh = 3\n");
  auto bad = train_args(dir, "bad");
  bad.push_back("--config");
  bad.push_back((dir / "bad.ini").string());
  EXPECT_EQ(run(bad).code, 1);
}

TEST(Cli, DivergenceExitsWithTwo) {
  const fs::path dir = make_copy_data("cli_diverge");
  auto args = train_args(dir, "boom");
  args.insert(args.end(), {"--lr", "1e30", "--clip", "0"});
  const auto r = run(args);
  EXPECT_EQ(r.code, 2) << r.out;
  EXPECT_FALSE(r.err.empty());
}

TEST(Cli, InstalledBinaryReportsExitCodes) {
  const std::string bin = RHNLM_CLI_PATH;
  EXPECT_EQ(std::system((bin + " paths --depth 2 --horizon 2 > /dev/null").c_str()), 0);
  EXPECT_NE(std::system((bin + " train > /dev/null 2>&1").c_str()), 0);
}

}  // namespace
}  // namespace rhnlm
