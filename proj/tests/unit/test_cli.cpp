// Copyright 2026 The mofe-restore Authors
// SPDX-License-Identifier: Apache-2.0

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iterator>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

const fs::path kRoot = fs::path(MOFE_TEST_TMP) / "cli";

int run(const std::string& args) {
  const std::string cmd = std::string("\"") + MOFE_CLI_PATH + "\" " + args + " > \"" +
                          (kRoot / "last_output.txt").string() + "\" 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string last_output() {
  std::ifstream in(kRoot / "last_output.txt");
  return {std::istreambuf_iterator<char>(in), {}};
}

std::string p(const std::string& name) { return "\"" + (kRoot / name).string() + "\""; }

class Cli : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    fs::remove_all(kRoot);
    fs::create_directories(kRoot);
  }
};

}  // namespace

TEST_F(Cli, HelpAndUsageErrors) {
  EXPECT_EQ(run("--help"), 0);
  EXPECT_NE(last_output().find("synth"), std::string::npos);
  EXPECT_EQ(run("frobnicate"), 1) << last_output();
  EXPECT_EQ(run("synth"), 1) << last_output();
}

TEST_F(Cli, SynthEmbedTrainEvalDump) {
  ASSERT_EQ(run("--seed 3 synth --procedural 3 --out " + p("data") + " --per-combo 2 --size 32"), 0) << last_output();
  std::ifstream in(kRoot / "data" / "manifest.json");
  const auto manifest = json::parse(in);
  EXPECT_GE(manifest.at("records").size(), 22u);
  EXPECT_EQ(manifest.at("size"), 32);

  ASSERT_EQ(run("embed-synthetic --data " + p("data") + " --out " + p("emb")), 0) << last_output();
  EXPECT_TRUE(fs::exists(kRoot / "emb" / "payload.bin"));

  ASSERT_EQ(run("--seed 1 train --data " + p("data") + " --embeddings " + p("emb") + " --out " + p("run") +
                " --no-mgl --max-steps 3"),
            0)
      << last_output();
  EXPECT_TRUE(fs::exists(kRoot / "run" / "final.ckpt"));
  EXPECT_TRUE(fs::exists(kRoot / "run" / "config.json"));
  std::ifstream log(kRoot / "run" / "log.csv");
  std::string header;
  std::getline(log, header);
  EXPECT_EQ(header, "step,stage,lr,rec,mgl,total");

  ASSERT_EQ(run("eval --data " + p("data") + " --embeddings " + p("emb") + " --checkpoint " + p("run/final.ckpt") +
                " --out " + p("eval")),
            0)
      << last_output();
  EXPECT_TRUE(fs::exists(kRoot / "eval" / "report.csv"));

  ASSERT_EQ(run("router-dump --embeddings " + p("emb") + " --checkpoint " + p("run/final.ckpt") + " --out " +
                p("dump") + " --data " + p("data") + " --ids L_000,H_001"),
            0)
      << last_output();
  for (const char* f : {"router_weights.csv", "similarity.csv", "expert_energy.csv"}) {
    EXPECT_TRUE(fs::exists(kRoot / "dump" / f)) << f;
  }
}

TEST_F(Cli, MissingDatasetIsDataError) {
  EXPECT_EQ(run("train --data " + p("nowhere") + " --embeddings " + p("nowhere_emb") + " --out " + p("x")), 2)
      << last_output();
  EXPECT_EQ(run("synth --clean " + p("empty_clean") + " --out " + p("y")), 2) << last_output();
  EXPECT_EQ(run("synth --procedural 1 --combos L+Q --out " + p("z")), 2) << last_output();
}

TEST_F(Cli, GradcheckPasses) {
  EXPECT_EQ(run("gradcheck --skip-backbone"), 0) << last_output();
  EXPECT_NE(last_output().find("mofe"), std::string::npos);
  EXPECT_EQ(last_output().find("FAIL"), std::string::npos) << last_output();
}
