#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <nlohmann/json.hpp>

#include "tif/config.hpp"
#include "tif/errors.hpp"

using namespace tif;

TEST(Config, SeedRequired) {
  EXPECT_THROW(parse_run_config("{}"), ConfigError);
  const auto c = parse_run_config("{}", 7);
  EXPECT_EQ(c.seed, 7u);
  EXPECT_EQ(c.train.seed, 7u);
  EXPECT_EQ(c.provenance.at("seed"), "flag");
}

TEST(Config, FlagBeatsFile) {
  const auto c = parse_run_config(R"({"seed": 3, "alpha": 0.5})", 9);
  EXPECT_EQ(c.seed, 9u);
  EXPECT_EQ(c.train.weights.alpha, 0.5);
  EXPECT_EQ(c.provenance.at("alpha"), "file");
  EXPECT_EQ(c.provenance.at("beta"), "default");
}

TEST(Config, UnknownKeysRejected) {
  EXPECT_THROW(parse_run_config(R"({"seed": 1, "alpah": 1})"), ConfigError);
  EXPECT_THROW(parse_run_config(R"({"seed": 1, "continual": {"budget": 5}})"), ConfigError);
  EXPECT_THROW(parse_run_config(R"({"seed": 1, "fcs": {"step": 5}})"), ConfigError);
}

TEST(Config, ValidationErrors) {
  EXPECT_THROW(parse_run_config(R"({"seed": 1, "fcs": {"steps": 4}})"), ConfigError);
  EXPECT_THROW(parse_run_config(R"({"seed": 1, "method": "svm"})"), ConfigError);
  EXPECT_THROW(parse_run_config(R"({"seed": 1, "ablation": "mpc3"})"), ConfigError);
  EXPECT_THROW(parse_run_config(R"({"seed": 1, "alpha": "big"})"), ConfigError);
  EXPECT_THROW(parse_run_config("not json"), ConfigError);
  try {
    parse_run_config(R"({"seed": 1, "stage1_epochs": 30, "total_epochs": 20})");
    FAIL();
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("stage1_epochs"), std::string::npos);
    EXPECT_NE(msg.find("total_epochs"), std::string::npos);
  }
}

TEST(Config, FullConfig) {
  const auto c = parse_run_config(R"({
    "seed": 5, "method": "erm", "K": 3, "layer_widths": [32, 16], "ablation": "mpc1+iga",
    "granularity": "quarterly", "total_epochs": 8,
    "continual": {"f1_threshold": 0.8, "budget_per_update": 50, "retrain_mode": "stage2_only"},
    "fcs": {"steps": 16, "noise_runs": 2, "max_samples": 40}
  })");
  EXPECT_EQ(c.method, Method::erm);
  EXPECT_EQ(c.train.arch.proxies_per_class, 3u);
  EXPECT_EQ(c.train.arch.layer_widths, (std::vector<std::size_t>{32, 16}));
  EXPECT_TRUE(c.train.ablation.mpc1);
  EXPECT_FALSE(c.train.ablation.mpc2);
  EXPECT_EQ(c.train.resolved_stage1_epochs(), 4);
  EXPECT_EQ(c.continual.budget_per_update, 50u);
  EXPECT_EQ(c.continual.retrain_mode, RetrainMode::stage2_only);
  EXPECT_EQ(c.fcs.ig.steps, 16u);
  EXPECT_EQ(c.fcs.ig.seed, 5u);
  EXPECT_EQ(c.fcs.max_samples, 40u);
}

TEST(Config, ContentHash) {
  EXPECT_EQ(content_hash(""), "cbf29ce484222325");
  EXPECT_EQ(content_hash("a"), "af63dc4c8601ec8c");
  EXPECT_NE(content_hash("ab"), content_hash("ba"));
}

TEST(Config, ManifestWritten) {
  const auto dir = std::filesystem::temp_directory_path() / "tif_manifest_test";
  std::filesystem::create_directories(dir);
  RunManifest m;
  m.command = "train";
  m.config_hash = content_hash("{}");
  m.seed = 4;
  m.version = artifact_version();
  m.outputs = {"model.ckpt"};
  m.write(dir);
  const auto j = nlohmann::json::parse(read_text_file(dir / "manifest.json"));
  EXPECT_EQ(j.at("command"), "train");
  EXPECT_EQ(j.at("seed"), 4);
  EXPECT_EQ(j.at("outputs").size(), 1u);
  std::filesystem::remove_all(dir);
  EXPECT_THROW(read_text_file(dir / "missing"), ConfigError);
}
