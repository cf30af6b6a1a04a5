#include <gtest/gtest.h>

#include <sys/wait.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "polyfs/embed/store.hpp"
#include "polyfs/util/jsonl.hpp"

using namespace polyfs;
namespace fs = std::filesystem;

namespace {

struct CliResult {
  int code = -1;
  std::string err;
};

// Runs the CLI in `dir`, capturing stderr; `env` is prepended to the command.
CliResult cli(const fs::path& dir, const std::string& args, const std::string& env = "") {
  const fs::path err_file = dir / "stderr.txt";
  const std::string cmd = "cd '" + dir.string() + "' && " + env + " '" + POLYFS_CLI_PATH + "' " + args +
                          " > /dev/null 2> '" + err_file.string() + "'";
  const int status = std::system(cmd.c_str());
  CliResult r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  std::ifstream in(err_file);
  r.err.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
  return r;
}

json error_line(const CliResult& r) {
  const auto nl = r.err.find('\n');
  return json::parse(r.err.substr(0, nl));
}

class CliTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    root_ = fs::temp_directory_path() / "polyfs_cli_test";
    fs::remove_all(root_);
    fs::create_directories(root_);
  }
  static void TearDownTestSuite() { fs::remove_all(root_); }
  static fs::path root_;
};

fs::path CliTest::root_;

}  // namespace

TEST_F(CliTest, HelpForEverySubcommand) {
  EXPECT_EQ(cli(root_, "--help").code, 0);
  for (const char* sub : {"prep-sources", "gen-sed", "extract-clips", "featurize", "train-base", "train-dfsl", "eval",
                          "report", "synth-world"}) {
    EXPECT_EQ(cli(root_, std::string(sub) + " --help").code, 0) << sub;
  }
}

TEST_F(CliTest, UsageAndInputErrors) {
  auto r = cli(root_, "");
  EXPECT_EQ(r.code, 2);
  EXPECT_EQ(error_line(r).at("error"), "usage");

  r = cli(root_, "eval --out e");
  EXPECT_EQ(r.code, 2);

  r = cli(root_, "eval --base nope.ckpt --novel a.emb --base-test b.emb --out e");
  EXPECT_EQ(r.code, 4);
  const json e = error_line(r);
  EXPECT_EQ(e.at("error"), "not_found");
  EXPECT_EQ(e.at("subcommand"), "eval");
  EXPECT_NE(e.at("message").get<std::string>().find("nope.ckpt"), std::string::npos);

  r = cli(root_, "prep-sources --out p");
  EXPECT_EQ(r.code, 3);
  EXPECT_EQ(error_line(r).at("error"), "invalid_argument");

  std::ofstream(root_ / "garbage.ckpt") << "not a checkpoint";
  r = cli(root_, "eval --base garbage.ckpt --novel a.emb --base-test b.emb --out e");
  EXPECT_EQ(r.code, 6);
}

TEST_F(CliTest, AudioPipelineEndToEnd) {
  const fs::path dir = root_ / "pipeline";
  fs::create_directories(dir);
  ASSERT_EQ(cli(dir, "prep-sources --demo-corpus --demo-classes 12 --demo-clips 20 --n-base 5 --n-val 2 --n-test 5 "
                     "--seed 3 --out src")
                .code,
            0);
  EXPECT_TRUE(fs::exists(dir / "src/split.json"));
  const json split = read_json(dir / "src/split.json");
  EXPECT_EQ(split.at("classes").at("base").size(), 5u);

  const std::string scene = " --sample-rate 16000 --duration 4 --manifest src/sources.csv --seed 4";
  ASSERT_EQ(cli(dir, "gen-sed --split base-train --n 6 --out scenes/train" + scene).code, 0);
  ASSERT_EQ(cli(dir, "gen-sed --split novel-test --n 6 --out scenes/novel" + scene).code, 0);
  ASSERT_EQ(cli(dir, "gen-sed --split base-test --n 3 --out scenes/test" + scene).code, 0);
  size_t wavs = 0;
  for (const auto& e : fs::directory_iterator(dir / "scenes/train")) wavs += e.path().extension() == ".wav";
  EXPECT_EQ(wavs, 6u);
  EXPECT_EQ(read_jsonl(dir / "scenes/train/index.jsonl").size(), 6u);

  for (const char* f : {"train", "novel", "test"}) {
    ASSERT_EQ(cli(dir, std::string("extract-clips --materialize --scenes scenes/") + f + " --out clips/" + f).code, 0);
    ASSERT_EQ(cli(dir, std::string("featurize --clips clips/") + f + "/clips.jsonl --out emb/" + f).code, 0);
  }
  const auto rows = read_jsonl(dir / "clips/train/clips.jsonl");
  ASSERT_FALSE(rows.empty());
  EXPECT_TRUE(fs::exists(dir / "clips/train" / rows[0].at("audio").get<std::string>()));
  const EmbeddingStore emb = load_store(dir / "emb/train/embeddings.emb");
  EXPECT_EQ(emb.size(), rows.size());
  EXPECT_EQ(emb.dim(), 128u);

  ASSERT_EQ(cli(dir, "train-base --train emb/train/embeddings.emb --epochs 5 --out model").code, 0);
  ASSERT_EQ(cli(dir, "train-dfsl --base model/base.ckpt --train emb/train/embeddings.emb --iters 5 --pseudo-novel 2 "
                     "--n 1 --out model")
                .code,
            0);

  // --iters comes from the environment
  const CliResult r = cli(dir,
                    "eval --method dfsl --base model/base.ckpt --dfsl model/dfsl.ckpt --novel emb/novel/embeddings.emb "
                    "--base-test emb/test/embeddings.emb --n 1 --out eval",
                    "POLYFS_ITERS=3");
  ASSERT_EQ(r.code, 0) << r.err;
  const json report = read_json(dir / "eval/report.json");
  EXPECT_EQ(report.at("iterations").size(), 3u);
  const json manifest = read_json(dir / "eval/eval.manifest.json");
  EXPECT_EQ(manifest.at("config").at("iters"), "3");
  EXPECT_FALSE(manifest.at("config").contains("jobs"));
  EXPECT_FALSE(manifest.at("artifacts").empty());
}

TEST_F(CliTest, WorldEvalAndReport) {
  const fs::path dir = root_ / "world";
  fs::create_directories(dir);
  ASSERT_EQ(cli(dir, "synth-world --dim 16 --n-base 6 --n-novel 3 --base-train-clips 300 --base-val-clips 60 "
                     "--base-test-clips 90 --novel-val-clips 90 --novel-test-clips 90 --seed 2 --out w")
                .code,
            0);
  ASSERT_EQ(cli(dir, "train-base --train w/base-train.emb --val w/base-val.emb --epochs 10 --out m").code, 0);
  const std::string stores = " --base m/base.ckpt --novel w/novel-test.emb --base-test w/base-test.emb"
                             " --base-train w/base-train.emb --iters 4";
  ASSERT_EQ(cli(dir, "eval --method proto --out e/proto" + stores).code, 0);
  const CliResult tuned = cli(dir, "eval --method lr --lr-negatives tune --tune-iters 2 --novel-val w/novel-val.emb "
                             "--base-val w/base-val.emb --svg --out e/lr" + stores);
  ASSERT_EQ(tuned.code, 0) << tuned.err;
  const json lr = read_json(dir / "e/lr/report.json");
  EXPECT_TRUE(lr.contains("lr_tuning"));
  EXPECT_TRUE(fs::exists(dir / "e/lr/plots/snr.svg"));

  EXPECT_EQ(cli(dir, "eval --method lr --lr-negatives lots --out e/bad" + stores).code, 3);
  ASSERT_EQ(cli(dir, "report --in e/proto/report.json e/lr/report.json --out r").code, 0);
  std::ifstream in(dir / "r/comparison.csv");
  size_t lines = 0;
  for (std::string line; std::getline(in, line);) ++lines;
  EXPECT_EQ(lines, 3u);
}
