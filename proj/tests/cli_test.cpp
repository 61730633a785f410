#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdio>
#include <filesystem>
#include <string>

#include <json.hpp>

#include "evlink/corpus.hpp"
#include "evlink/detail/io.hpp"
#include "fixtures.hpp"

namespace {

struct Run {
  int code = -1;
  std::string output;
};

// Runs the CLI with stderr folded into stdout.
Run evlink_cli(const std::string& args) {
  const std::string cmd = std::string(EVLINK_CLI_PATH) + " " + args + " 2>&1";
  Run r;
  FILE* pipe = ::popen(cmd.c_str(), "r");
  if (!pipe) return r;
  char buf[4096];
  std::size_t n;
  while ((n = std::fread(buf, 1, sizeof buf, pipe)) > 0) r.output.append(buf, n);
  const int status = ::pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string q(const std::string& path) { return "'" + path + "'"; }

class SynthDir : public ::testing::Test {
 protected:
  void SetUp() override {
    const auto r = evlink_cli("synth --seed 3 --docs 20 --dim 8 --out " + q(dir.file("data")));
    ASSERT_EQ(r.code, 0) << r.output;
  }
  std::string data(const std::string& name) const { return dir.file("data/" + name); }

  fixtures::TempDir dir;
};

}  // namespace

TEST(Cli, HelpExitsZero) {
  const auto r = evlink_cli("--help");
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.output.find("synth"), std::string::npos);
}

TEST(Cli, UsageErrorsExitOne) {
  EXPECT_EQ(evlink_cli("").code, 1);
  EXPECT_EQ(evlink_cli("frobnicate").code, 1);
  EXPECT_EQ(evlink_cli("score --corpus x.json").code, 1);
  EXPECT_EQ(evlink_cli("validate --corpus x.json --bogus").code, 1);
}

TEST(Cli, UnreadableFileExitsTwo) {
  fixtures::TempDir dir;
  const auto r = evlink_cli("validate --corpus " + q(dir.file("absent.json")));
  EXPECT_EQ(r.code, 2) << r.output;
  EXPECT_NE(r.output.find("evlink:"), std::string::npos);
}

TEST(Cli, MalformedCorpusExitsOneWithLocation) {
  fixtures::TempDir dir;
  const auto path = dir.write("bad.json", "{\"documents\": [ {\"doc_id\": 3} ]}\n");
  const auto r = evlink_cli("validate --corpus " + q(path));
  EXPECT_EQ(r.code, 1) << r.output;
  EXPECT_NE(r.output.find("doc_id"), std::string::npos) << r.output;
}

TEST_F(SynthDir, WritesAllFiles) {
  for (const char* f : {"train.json", "dev.json", "test.json", "embeddings.jsonl", "pipeline.cfg"}) {
    EXPECT_TRUE(std::filesystem::exists(data(f))) << f;
  }
}

TEST_F(SynthDir, ValidateReportsCompleteCoverage) {
  const auto r = evlink_cli("validate --corpus " + q(data("test.json")) + " --embeddings " +
                            q(data("embeddings.jsonl")) + " --dim 8");
  EXPECT_EQ(r.code, 0) << r.output;
  EXPECT_NE(r.output.find("coverage: complete"), std::string::npos) << r.output;
}

TEST_F(SynthDir, ValidateWrongDimExitsOne) {
  const auto r = evlink_cli("validate --corpus " + q(data("test.json")) + " --embeddings " +
                            q(data("embeddings.jsonl")) + " --dim 9");
  EXPECT_EQ(r.code, 1) << r.output;
}

TEST_F(SynthDir, ValidateMissingEmbeddingsExitsOne) {
  const auto lines = evlink::detail::read_file(data("embeddings.jsonl"));
  // Keep the header and one vector only.
  const auto first = lines.find('\n');
  const auto second = lines.find('\n', first + 1);
  const auto partial = dir.write("partial.jsonl", lines.substr(0, second + 1));
  const auto r = evlink_cli("validate --corpus " + q(data("test.json")) + " --embeddings " +
                            q(partial));
  EXPECT_EQ(r.code, 1) << r.output;
  EXPECT_NE(r.output.find("missing embeddings"), std::string::npos) << r.output;
}

TEST_F(SynthDir, ReportWritesOutputs) {
  const auto out = dir.file("run");
  const auto r = evlink_cli("report --config " + q(data("pipeline.cfg")) + " --out " + q(out));
  ASSERT_EQ(r.code, 0) << r.output;
  EXPECT_NE(r.output.find("tuned threshold"), std::string::npos) << r.output;
  for (const char* f : {"report.json", "report.txt", "system.jsonl", "model.ckpt.json"}) {
    EXPECT_TRUE(std::filesystem::exists(std::filesystem::path(out) / f)) << f;
  }
  const auto report = nlohmann::json::parse(evlink::detail::read_file(out + "/report.json"));
  EXPECT_TRUE(report.is_object());
}

TEST_F(SynthDir, BaselineClusterThenScore) {
  const auto sys = dir.file("lemma.jsonl");
  auto r = evlink_cli("cluster --corpus " + q(data("test.json")) + " --baseline lemma --out " +
                      q(sys));
  ASSERT_EQ(r.code, 0) << r.output;
  const auto json_path = dir.file("score.json");
  r = evlink_cli("score --corpus " + q(data("test.json")) + " --system " + q(sys) + " --out " +
                 q(json_path));
  ASSERT_EQ(r.code, 0) << r.output;
  EXPECT_NE(r.output.find("MUC"), std::string::npos);
  const auto j = nlohmann::json::parse(evlink::detail::read_file(json_path));
  for (const char* key : {"b3", "muc", "ceaf_e", "blanc", "conll_f1", "mode", "per_doc"}) {
    EXPECT_TRUE(j.contains(key)) << key;
  }
  EXPECT_EQ(j["mode"], "micro");
  const auto corpus = evlink::load_corpus(data("test.json"));
  EXPECT_EQ(j["per_doc"].size(), corpus.documents.size());
  const double f = j["conll_f1"];
  EXPECT_GE(f, 0.0);
  EXPECT_LE(f, 1.0);
}

TEST_F(SynthDir, TunePredictClusterScore) {
  const auto ckpt = dir.file("cos.ckpt.json");
  auto r = evlink_cli("tune-threshold --config " + q(data("pipeline.cfg")) + " --out " + q(ckpt));
  ASSERT_EQ(r.code, 0) << r.output;
  const auto decisions = dir.file("decisions.jsonl");
  r = evlink_cli("predict --model " + q(ckpt) + " --corpus " + q(data("test.json")) +
                 " --embeddings " + q(data("embeddings.jsonl")) + " --out " + q(decisions));
  ASSERT_EQ(r.code, 0) << r.output;
  const auto sys = dir.file("system.jsonl");
  r = evlink_cli("cluster --corpus " + q(data("test.json")) + " --decisions " + q(decisions) +
                 " --out " + q(sys));
  ASSERT_EQ(r.code, 0) << r.output;
  r = evlink_cli("score --corpus " + q(data("test.json")) + " --system " + q(sys));
  ASSERT_EQ(r.code, 0) << r.output;
  EXPECT_NE(r.output.find("CoNLL"), std::string::npos) << r.output;
}

TEST_F(SynthDir, ScoreRejectsForeignSystemOutput) {
  const auto sys = dir.write("foreign.jsonl", "{\"doc_id\": \"nope\", \"clusters\": [[\"x\"]]}\n");
  const auto r = evlink_cli("score --corpus " + q(data("test.json")) + " --system " + q(sys));
  EXPECT_EQ(r.code, 1) << r.output;
}

TEST_F(SynthDir, UnknownMethodInConfigExitsOne) {
  const auto cfg = dir.write("bad.cfg", "test_corpus = " + data("test.json") +
                                            "\ntest_embeddings = " + data("embeddings.jsonl") +
                                            "\nmethod = telepathy\n");
  const auto r = evlink_cli("report --config " + q(cfg));
  EXPECT_EQ(r.code, 1) << r.output;
}
