#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>
#include <json.hpp>

#include "pecl/datakit.hpp"

// End-to-end coverage of the installed command surface: every assertion here
// goes through the real binary, argv parsing and exit codes included.

namespace {

namespace fs = std::filesystem;
using Json = nlohmann::json;

struct RunResult {
  int code = -1;
  std::string out;
  std::string err;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

fs::path tmp_dir(const std::string& name) {
  auto p = fs::temp_directory_path() / ("pecl_cli_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

RunResult run_cli(const std::string& args, const fs::path& dir) {
  const fs::path out_p = dir / "_stdout.txt";
  const fs::path err_p = dir / "_stderr.txt";
  const std::string cmd = std::string(PECL_CLI_PATH) + " " + args + " > " +
                          out_p.string() + " 2> " + err_p.string();
  const int rc = std::system(cmd.c_str());
  RunResult r;
  r.code = WEXITSTATUS(rc);
  r.out = slurp(out_p);
  r.err = slurp(err_p);
  return r;
}

// Everything stays at the micro scale so the whole suite runs in seconds.
const char* kMicroExperiment = R"({
  "model": {"preset": "micro", "optim": {"epochs": 2, "batch": 4}},
  "synth": {
    "n_clips": 24,
    "seq_len": 4,
    "visual": {"frame_h": 8, "frame_w": 8, "frame_c": 1, "patch": 4, "inter_dim": 8},
    "audio": {"channels": [4, 8], "kernels": [10, 3], "strides": [5, 2]}
  }
})";

fs::path write_micro_config(const fs::path& dir) {
  const fs::path p = dir / "micro.json";
  std::ofstream(p) << kMicroExperiment;
  return p;
}

TEST(Cli, SynthTrainEvalPipeline) {
  auto dir = tmp_dir("pipeline");
  auto cfg = write_micro_config(dir);
  const std::string data = (dir / "data").string();
  const std::string run = (dir / "run").string();

  auto synth = run_cli("synth --config " + cfg.string() + " --out " + data, dir);
  ASSERT_EQ(synth.code, 0) << synth.err;
  EXPECT_TRUE(fs::exists(fs::path(data) / "manifest.jsonl"));

  auto train = run_cli(
      "train --config " + cfg.string() + " --data " + data + " --out " + run,
      dir);
  ASSERT_EQ(train.code, 0) << train.err;
  EXPECT_TRUE(fs::exists(fs::path(run) / "config.json"));
  EXPECT_TRUE(fs::exists(fs::path(run) / "fold1" / "model.ckpt"));
  EXPECT_TRUE(fs::exists(fs::path(run) / "fold1" / "train_log.jsonl"));
  EXPECT_TRUE(fs::exists(fs::path(run) / "fold1" / "metrics.json"));

  auto eval = run_cli("eval --config " + cfg.string() + " --checkpoint " +
                          (fs::path(run) / "fold1" / "model.ckpt").string() +
                          " --data " + data + " --out " + (dir / "ev").string(),
                      dir);
  ASSERT_EQ(eval.code, 0) << eval.err;

  // The eval of the saved model reproduces the final train-log metrics.
  Json trained = Json::parse(slurp(fs::path(run) / "fold1" / "metrics.json"));
  Json evald = Json::parse(slurp(dir / "ev" / "fold1" / "eval_metrics.json"));
  EXPECT_EQ(trained.at("metrics").dump(), evald.at("metrics").dump());

  // Both reports embed the fully resolved config and seed.
  for (const Json& rep : {trained, evald}) {
    EXPECT_EQ(rep.at("seed").get<int>(), 7);
    EXPECT_EQ(rep.at("config").at("model").at("dim").get<int>(), 16);
    EXPECT_EQ(rep.at("config").at("model").at("optim").at("epochs").get<int>(),
              2);
  }
}

TEST(Cli, RerunWritesIdenticalBytes) {
  auto dir = tmp_dir("rerun");
  auto cfg = write_micro_config(dir);
  const std::string data1 = (dir / "d1").string();
  const std::string data2 = (dir / "d2").string();
  ASSERT_EQ(run_cli("synth --config " + cfg.string() + " --out " + data1, dir)
                .code,
            0);
  ASSERT_EQ(run_cli("synth --config " + cfg.string() + " --out " + data2, dir)
                .code,
            0);
  EXPECT_EQ(slurp(fs::path(data1) / "manifest.jsonl"),
            slurp(fs::path(data2) / "manifest.jsonl"));
  EXPECT_EQ(slurp(fs::path(data1) / "media.json"),
            slurp(fs::path(data2) / "media.json"));

  // Same out path run twice: every artifact byte matches, checkpoint included.
  const std::string run = (dir / "run").string();
  const std::string train_args =
      "train --config " + cfg.string() + " --data " + data1 + " --out " + run;
  ASSERT_EQ(run_cli(train_args, dir).code, 0);
  std::map<std::string, std::string> first;
  for (const char* f :
       {"config.json", "fold1/model.ckpt", "fold1/train_log.jsonl",
        "fold1/metrics.json", "fold1/metrics.txt"}) {
    first[f] = slurp(fs::path(run) / f);
    ASSERT_FALSE(first[f].empty()) << f;
  }
  fs::remove_all(run);
  ASSERT_EQ(run_cli(train_args, dir).code, 0);
  for (const auto& [f, bytes] : first) {
    EXPECT_EQ(bytes, slurp(fs::path(run) / f)) << f;
  }
}

TEST(Cli, FlagsOverrideConfigFile) {
  auto dir = tmp_dir("override");
  auto cfg = write_micro_config(dir);
  const std::string data = (dir / "data").string();
  ASSERT_EQ(run_cli("synth --config " + cfg.string() + " --seed 9 --n-clips 8" +
                        " --out " + data,
                    dir)
                .code,
            0);
  Json echo = Json::parse(slurp(fs::path(data) / "synth_config.json"));
  EXPECT_EQ(echo.at("seed").get<int>(), 9);
  EXPECT_EQ(echo.at("config").at("synth").at("n_clips").get<int>(), 8);
  // The file value stays in force where no flag overrides it.
  EXPECT_EQ(echo.at("config").at("synth").at("seq_len").get<int>(), 4);
}

TEST(Cli, MissingDataExitsTwoAndNamesThePath) {
  auto dir = tmp_dir("missing");
  auto cfg = write_micro_config(dir);
  auto r = run_cli("train --config " + cfg.string() +
                       " --data /nonexistent/nowhere --out " +
                       (dir / "run").string(),
                   dir);
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("/nonexistent/nowhere"), std::string::npos) << r.err;
}

TEST(Cli, UsageErrorsExitTwo) {
  auto dir = tmp_dir("usage");
  EXPECT_EQ(run_cli("", dir).code, 2);
  EXPECT_EQ(run_cli("frobnicate", dir).code, 2);
  EXPECT_EQ(run_cli("eval --fusion warp --checkpoint x --data y", dir).code, 2);
  EXPECT_EQ(run_cli("--help", dir).code, 0);
}

TEST(Cli, EvalRejectsMismatchedConfigListingBoth) {
  auto dir = tmp_dir("mismatch");
  auto cfg = write_micro_config(dir);
  const std::string data = (dir / "data").string();
  const std::string run = (dir / "run").string();
  ASSERT_EQ(run_cli("synth --config " + cfg.string() + " --out " + data, dir)
                .code,
            0);
  ASSERT_EQ(run_cli("train --config " + cfg.string() + " --data " + data +
                        " --out " + run,
                    dir)
                .code,
            0);

  const fs::path desk_cfg = dir / "desk.json";
  std::ofstream(desk_cfg) << R"({"model": {"preset": "desk"}})";
  auto r = run_cli("eval --config " + desk_cfg.string() + " --checkpoint " +
                       (fs::path(run) / "fold1" / "model.ckpt").string(),
                   dir);
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("does not match"), std::string::npos) << r.err;
  EXPECT_NE(r.err.find("\"dim\":64"), std::string::npos) << r.err;
  EXPECT_NE(r.err.find("\"dim\":16"), std::string::npos) << r.err;
}

TEST(Cli, GradcheckListsParametersAndCatchesInjectedBug) {
  auto dir = tmp_dir("gradcheck");
  auto r = run_cli("gradcheck --out " + (dir / "rep").string(), dir);
  EXPECT_EQ(r.code, 0) << r.err;
  // Micro default covers every head path; spot names from each group.
  for (const char* name :
       {"head.visual.w", "head.audio.w", "head.fusion.w", "pavf0.w_p",
        "visual.layer0.adapter_attn.w1", "audio.layer1.adapter_ffn.w2",
        "visual.layer0.an1.g"}) {
    EXPECT_NE(r.out.find(name), std::string::npos) << name;
  }
  EXPECT_NE(r.out.find("gradient check passed"), std::string::npos);

  Json rep = Json::parse(slurp(dir / "rep" / "gradcheck.json"));
  EXPECT_TRUE(rep.at("pass").get<bool>());
  EXPECT_GT(rep.at("parameters").size(), 40u);

  auto bad = run_cli("gradcheck --inject-bug", dir);
  EXPECT_EQ(bad.code, 3);
  EXPECT_NE(bad.out.find("FAIL"), std::string::npos);
}

TEST(Cli, ParamsTextAndJsonAgree) {
  auto dir = tmp_dir("params");
  auto text = run_cli("params", dir);
  auto json = run_cli("params --json", dir);
  ASSERT_EQ(text.code, 0);
  ASSERT_EQ(json.code, 0);
  Json j = Json::parse(json.out);

  auto text_value = [&](const std::string& key) {
    auto pos = text.out.find(key);
    EXPECT_NE(pos, std::string::npos) << key;
    std::istringstream rest(text.out.substr(pos + key.size()));
    long long v = -1;
    rest >> v;
    return v;
  };
  EXPECT_EQ(text_value("trainable"), j.at("trainable").get<long long>());
  EXPECT_EQ(text_value("frozen"), j.at("frozen").get<long long>());
  EXPECT_EQ(text_value("total"), j.at("total").get<long long>());
  for (auto it = j.at("by_group").begin(); it != j.at("by_group").end(); ++it) {
    EXPECT_EQ(text_value(it.key()), it.value().get<long long>()) << it.key();
  }
}

TEST(Cli, SplitIsDeterministicUnderSeed) {
  auto dir = tmp_dir("split");
  auto cfg = write_micro_config(dir);
  const std::string data = (dir / "data").string();
  ASSERT_EQ(run_cli("synth --config " + cfg.string() + " --out " + data, dir)
                .code,
            0);
  const std::string manifest = (fs::path(data) / "manifest.jsonl").string();
  ASSERT_EQ(run_cli("split --manifest " + manifest + " --out " +
                        (dir / "s1").string(),
                    dir)
                .code,
            0);
  ASSERT_EQ(run_cli("split --manifest " + manifest + " --out " +
                        (dir / "s2").string(),
                    dir)
                .code,
            0);
  auto bytes = slurp(dir / "s1" / "splits.json");
  EXPECT_FALSE(bytes.empty());
  EXPECT_EQ(bytes, slurp(dir / "s2" / "splits.json"));

  Json s = Json::parse(bytes);
  for (const char* name :
       {"fold1", "fold2", "fold3", "short", "long", "male", "female"}) {
    EXPECT_TRUE(s.contains(name)) << name;
  }
}

TEST(Cli, KappaOnIdenticalAnnotatorsIsOne) {
  auto dir = tmp_dir("kappa");
  auto alphabet = pecl::FeatureAlphabet::standard();
  Json items = Json::object();
  for (int i = 0; i < 8; ++i) {
    Json row = Json::object();
    int bit = i % 2;
    for (const auto& f : alphabet.visual) row[f] = bit;
    for (const auto& f : alphabet.audio) row[f] = 1 - bit;
    items["clip_" + std::to_string(i)] = row;
  }
  for (const char* name : {"a", "b"}) {
    std::ofstream(dir / (std::string(name) + ".json"))
        << Json{{"name", name}, {"items", items}}.dump();
  }
  auto r = run_cli("kappa " + (dir / "a.json").string() + " " +
                       (dir / "b.json").string() + " --out " +
                       (dir / "rep").string(),
                   dir);
  ASSERT_EQ(r.code, 0) << r.err;
  Json rep = Json::parse(slurp(dir / "rep" / "kappa.json"));
  EXPECT_EQ(rep.at("report").at("overall").get<double>(), 1.0);

  EXPECT_EQ(run_cli("kappa " + (dir / "a.json").string(), dir).code, 2);
}

}  // namespace
