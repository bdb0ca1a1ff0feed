// tests/cli-test.cc

// Copyright 2026  mtcascade authors

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "gtest/gtest.h"
#include "json.hpp"
#include "test-util.h"

namespace mtcascade {
namespace {

namespace fs = std::filesystem;

struct RunResult {
  int code = -1;
  std::string err;
};

std::string Slurp(const std::string &path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Runs the CLI with `args`, capturing stderr.
RunResult RunCli(const std::string &args, const std::string &dir) {
  std::string err = dir + "/stderr.txt";
  std::string cmd = std::string(MTCASCADE_CLI) + " " + args + " >" + dir +
                    "/stdout.txt 2>" + err;
  int status = std::system(cmd.c_str());
  RunResult r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.err = Slurp(err);
  return r;
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = testing_util::TempDir(
        std::string("cli-") + ::testing::UnitTest::GetInstance()->current_test_info()->name());
  }
  std::string dir_;
};

TEST_F(CliTest, HelpForEverySubcommand) {
  EXPECT_EQ(RunCli("--help", dir_).code, 0);
  for (const char *sub : {"simulate", "pretrain", "train", "probe-train", "decode", "evaluate"})
    EXPECT_EQ(RunCli(std::string(sub) + " --help", dir_).code, 0) << sub;
}

TEST_F(CliTest, ParseAndConfigErrorsExitTwo) {
  EXPECT_EQ(RunCli("simulate --n-overlap -1 --out-dir " + dir_, dir_).code, 2);
  EXPECT_EQ(RunCli("no-such-command", dir_).code, 2);
  EXPECT_EQ(RunCli("train --manifest " + dir_ + "/none.jsonl --out x --wiring mt-bogus", dir_).code, 2);
  std::ofstream(dir_ + "/bad.json") << R"({"train": {"stepz": 3}})";
  RunResult r = RunCli("simulate --n-single 1 --n-overlap 0 --out-dir " + dir_ + " --config " +
                    dir_ + "/bad.json", dir_);
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("stepz"), std::string::npos) << r.err;
  std::ofstream(dir_ + "/bad-type.json") << R"({"seed": "seven"})";
  EXPECT_EQ(RunCli("simulate --out-dir " + dir_ + " --config " + dir_ + "/bad-type.json", dir_).code, 2);
}

TEST_F(CliTest, MissingInputsExitThree) {
  EXPECT_EQ(RunCli("pretrain --manifest " + dir_ + "/missing.jsonl --out " + dir_ + "/m.ckpt", dir_)
                .code,
            3);
  std::ofstream(dir_ + "/m.ckpt") << "not a checkpoint";
  std::ofstream(dir_ + "/e.jsonl") << "";
  EXPECT_EQ(RunCli("evaluate --model " + dir_ + "/m.ckpt --manifest " + dir_ + "/e.jsonl", dir_).code,
            3);
}

TEST_F(CliTest, SimulateIsDeterministic) {
  std::string a = dir_ + "/a", b = dir_ + "/b";
  ASSERT_EQ(RunCli("simulate --seed 5 --n-single 2 --n-overlap 2 --out-dir " + a, dir_).code, 0);
  ASSERT_EQ(RunCli("simulate --seed 5 --n-single 2 --n-overlap 2 --out-dir " + b, dir_).code, 0);
  std::string ma = Slurp(a + "/train.jsonl"), mb = Slurp(b + "/train.jsonl");
  ASSERT_FALSE(ma.empty());
  std::istringstream la(ma), lb(mb);
  std::string x, y;
  int rows = 0;
  while (std::getline(la, x) && std::getline(lb, y)) {
    auto ja = nlohmann::json::parse(x), jb = nlohmann::json::parse(y);
    EXPECT_EQ(ja["id"], jb["id"]);
    EXPECT_EQ(Slurp(a + "/" + ja["audio"].get<std::string>()),
              Slurp(b + "/" + jb["audio"].get<std::string>()));
    ++rows;
  }
  EXPECT_EQ(rows, 4);
}

TEST_F(CliTest, PretrainThenCascadeLogsAudioInit) {
  std::string data = dir_ + "/data";
  ASSERT_EQ(RunCli("simulate --seed 3 --n-single 4 --n-overlap 0 --out-dir " + data, dir_).code, 0);
  std::string manifest = data + "/train.jsonl";
  ASSERT_EQ(RunCli("pretrain --steps 3 --manifest " + manifest + " --out " + dir_ + "/st.ckpt", dir_)
                .code,
            0);
  RunResult r = RunCli("train --steps 4 --wiring mt-cascade --lambda 1 --manifest " + manifest +
                        " --init-audio-from " + dir_ + "/st.ckpt --out " + dir_ +
                        "/mt.ckpt --metrics " + dir_ + "/m.jsonl",
                    dir_);
  ASSERT_EQ(r.code, 0) << r.err;
  bool saw_init = false;
  std::istringstream log(r.err);
  for (std::string line; std::getline(log, line);) {
    auto j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_object() && j.value("event", "") == "init_audio") {
      saw_init = true;
      EXPECT_GT(j["audio_tensors_loaded"].get<int>(), 0);
      EXPECT_GT(j["mask_tensors_fresh"].get<int>(), 0);
    }
  }
  EXPECT_TRUE(saw_init) << r.err;
  std::istringstream metrics(Slurp(dir_ + "/m.jsonl"));
  int steps = 0;
  for (std::string line; std::getline(metrics, line); ++steps) {
    auto j = nlohmann::json::parse(line);
    EXPECT_EQ(j["branch"], "audio");
    EXPECT_TRUE(j.contains("L_t"));
  }
  EXPECT_EQ(steps, 4);

  RunResult e = RunCli("evaluate --mode mt --model " + dir_ + "/mt.ckpt --manifest " + manifest +
                        " --report " + dir_ + "/r.json",
                    dir_);
  ASSERT_EQ(e.code, 0) << e.err;
  auto rep = nlohmann::json::parse(Slurp(dir_ + "/r.json"));
  EXPECT_TRUE(rep.contains("SingleSpkr"));
  EXPECT_EQ(rep["Overlap"]["WER"], "n/a");
  EXPECT_EQ(RunCli("decode --mode st --model " + dir_ + "/mt.ckpt --manifest " + manifest, dir_).code,
            0);

  // A baseline checkpoint has no direct audio path.
  ASSERT_EQ(RunCli("train --steps 1 --wiring mt-baseline --manifest " + manifest + " --out " + dir_ +
                    "/base.ckpt",
                dir_)
                .code,
            0);
  EXPECT_EQ(RunCli("decode --mode st --model " + dir_ + "/base.ckpt --manifest " + manifest, dir_)
                .code,
            4);
}

}  // namespace
}  // namespace mtcascade
