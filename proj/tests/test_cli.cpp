#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include "aefe/serialize.hpp"

namespace fs = std::filesystem;

namespace {

int run(const std::string& args) {
  const std::string cmd = std::string(AEFE_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

class Cli : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = fs::temp_directory_path() / "aefe_cli_test";
    fs::remove_all(dir_);
    fs::create_directories(dir_);
    const auto data = (dir_ / "clicks.csv").string();
    const std::string synth = std::string(AEFE_SYNTH_PATH) + " --out " + data +
                              " --rows 6000 --fields 5 --field-a 1 --field-b 3 --seed 4 >/dev/null 2>&1";
    ASSERT_EQ(std::system(synth.c_str()), 0);
    std::ofstream cfg(dir_ / "run.yaml");
    cfg << "data:\n  path: " << data << "\n"
        << "schema:\n  fields: [F0, F1, F2, F3, F4]\n  label: click\n  timestamp: ts\n"
        << "construction:\n  operators: [mean, count]\n  windows: [604800]\n"
        << "sampling:\n  rate: 0.5\n  seed: 3\n";
  }
  static void TearDownTestSuite() { fs::remove_all(dir_); }

  static std::string config() { return (dir_ / "run.yaml").string(); }
  static std::string out(const std::string& name) { return (dir_ / name).string(); }

  static fs::path dir_;
};

fs::path Cli::dir_;

}  // namespace

TEST_F(Cli, HelpAndUsage) {
  EXPECT_EQ(run("--help"), 0);
  EXPECT_EQ(run("frobnicate"), 1);
  EXPECT_EQ(run(""), 1);
  EXPECT_EQ(run("search"), 1);
  EXPECT_EQ(run("search --config " + out("missing.yaml")), 1);
}

TEST_F(Cli, SearchTransformTrainAnalyze) {
  const auto o = out("run");
  ASSERT_EQ(run("inspect --config " + config() + " --out " + o), 0);
  EXPECT_TRUE(fs::exists(fs::path(o) / "inspect.json"));
  ASSERT_EQ(run("search --config " + config() + " --out " + o), 0);
  ASSERT_TRUE(fs::exists(fs::path(o) / "template.json"));
  EXPECT_TRUE(fs::exists(fs::path(o) / "report.json"));
  ASSERT_EQ(run("transform --config " + config() + " --out " + o), 0);
  ASSERT_TRUE(fs::exists(fs::path(o) / "features.csv"));
  EXPECT_EQ(run("train --config " + config() + " --out " + o + " --features " + o + "/features.csv --model gbdt"), 0);
  EXPECT_TRUE(fs::exists(fs::path(o) / "eval_gbdt.json"));
  EXPECT_EQ(run("train --config " + config() + " --out " + o + " --baseline-auc 0.6"), 0);
  EXPECT_FALSE(aefe::read_json(o + "/eval_lr.json")["rela_impr_percent"].is_null());
  EXPECT_EQ(run("train --config " + config() + " --out " + o + " --baseline-auc 0.5"), 3);
  EXPECT_EQ(run("analyze --config " + config() + " --out " + o), 0);
  EXPECT_TRUE(fs::exists(fs::path(o) / "analysis" / "cs_aefe.csv"));
  EXPECT_TRUE(fs::exists(fs::path(o) / "analysis" / "search_curves.csv"));
}

TEST_F(Cli, DataAndTemplateErrors) {
  const auto o = out("errors");
  ASSERT_EQ(run("search --config " + config() + " --out " + o), 0);
  auto tpl = aefe::read_json(o + "/template.json");
  tpl["fingerprint"] = "0000000000000000";
  aefe::write_json(o + "/bad.json", tpl);
  EXPECT_EQ(run("transform --config " + config() + " --out " + o + " --template " + o + "/bad.json"), 2);
  EXPECT_EQ(run("train --config " + config() + " --out " + o + " --features " + o + "/nothing.csv"), 2);
  EXPECT_EQ(run("inspect --config " + config() + " --data " + o + "/nothing.csv"), 2);
}

TEST_F(Cli, OverridesApply) {
  const auto o = out("override");
  EXPECT_EQ(run("inspect --config " + config() + " --out " + o + " --set construction.operators=[mean]"), 0);
  const auto j = aefe::read_json(o + "/inspect.json");
  EXPECT_EQ(j["tasks"], 1);
  EXPECT_EQ(run("inspect --config " + config() + " --set sampling.rate=7"), 1);
  EXPECT_EQ(run("inspect --config " + config() + " --set nosuch.key=1"), 1);
}

TEST_F(Cli, SearchIsReproducible) {
  const auto a = out("rep_a"), b = out("rep_b");
  ASSERT_EQ(run("search --config " + config() + " --out " + a + " --parallelism 1"), 0);
  ASSERT_EQ(run("search --config " + config() + " --out " + b + " --parallelism 4"), 0);
  EXPECT_EQ(aefe::read_json(a + "/template.json"), aefe::read_json(b + "/template.json"));
  EXPECT_EQ(aefe::read_json(a + "/report.json"), aefe::read_json(b + "/report.json"));
}
