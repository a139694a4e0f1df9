#include "tif/config.hpp"

#include <chrono>
#include <cstdio>
#include <fstream>
#include <nlohmann/json.hpp>
#include <set>
#include <sstream>

#include "tif/errors.hpp"

namespace tif {

using nlohmann::json;

namespace {

const std::set<std::string> kTopKeys = {
    "seed", "method", "alpha", "beta", "lambda_intra", "lambda_inter", "tau", "margin", "K",
    "layer_widths", "head_hidden", "stage1_epochs", "total_epochs", "batch_size_per_env",
    "learning_rate", "optimizer", "granularity", "ablation", "validation_fraction",
    "select_best", "train_months", "continual", "fcs", "stability", "discriminability"};

template <class T>
void read(const json& j, const char* key, T& into, RunConfig& cfg, const std::string& prefix = "") {
  const std::string name = prefix + key;
  if (!j.contains(key)) {
    cfg.provenance.emplace(name, "default");
    return;
  }
  try {
    into = j.at(key).get<T>();
  } catch (const std::exception& e) {
    throw ConfigError("config field '" + name + "': " + e.what());
  }
  cfg.provenance[name] = "file";
}

void reject_unknown(const json& j, const std::set<std::string>& allowed, const std::string& where) {
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!allowed.count(it.key())) throw ConfigError("unknown config key '" + where + it.key() + "'");
}

}  // namespace

RunConfig parse_run_config(const std::string& text, std::optional<std::uint64_t> seed_override) {
  json j;
  try {
    j = text.empty() ? json::object() : json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  reject_unknown(j, kTopKeys, "");

  RunConfig cfg;
  if (seed_override) {
    cfg.seed = *seed_override;
    cfg.provenance["seed"] = "flag";
  } else if (j.contains("seed")) {
    read(j, "seed", cfg.seed, cfg);
  } else {
    throw ConfigError("config field 'seed' is required");
  }

  std::string method = "tif", optimizer = "adam", granularity = "monthly", ablation = "full";
  read(j, "method", method, cfg);
  cfg.method = parse_method(method);

  TrainConfig& t = cfg.train;
  read(j, "alpha", t.weights.alpha, cfg);
  read(j, "beta", t.weights.beta, cfg);
  read(j, "lambda_intra", t.weights.lambda_intra, cfg);
  read(j, "lambda_inter", t.weights.lambda_inter, cfg);
  read(j, "tau", t.weights.tau, cfg);
  read(j, "margin", t.weights.margin, cfg);
  read(j, "K", t.arch.proxies_per_class, cfg);
  read(j, "layer_widths", t.arch.layer_widths, cfg);
  read(j, "head_hidden", t.arch.head_hidden, cfg);
  read(j, "stage1_epochs", t.stage1_epochs, cfg);
  read(j, "total_epochs", t.total_epochs, cfg);
  read(j, "batch_size_per_env", t.batch_size_per_env, cfg);
  read(j, "learning_rate", t.learning_rate, cfg);
  read(j, "optimizer", optimizer, cfg);
  read(j, "granularity", granularity, cfg);
  read(j, "ablation", ablation, cfg);
  read(j, "validation_fraction", t.validation_fraction, cfg);
  read(j, "select_best", t.select_best, cfg);
  read(j, "train_months", cfg.train_months, cfg);
  if (cfg.train_months < 1) throw ConfigError("train_months must be >= 1");
  t.optimizer = parse_optimizer(optimizer);
  t.granularity = Granularity::parse(granularity);
  t.ablation = Ablation::parse(ablation);
  t.seed = cfg.seed;
  if (t.arch.layer_widths.empty()) throw ConfigError("layer_widths must not be empty");

  if (j.contains("continual")) {
    const json& c = j.at("continual");
    reject_unknown(c, {"f1_threshold", "budget_per_update", "retrain_mode", "max_updates", "retrain_epochs"},
                   "continual.");
    std::string mode = "full_two_stage";
    read(c, "f1_threshold", cfg.continual.f1_threshold, cfg, "continual.");
    read(c, "budget_per_update", cfg.continual.budget_per_update, cfg, "continual.");
    read(c, "retrain_mode", mode, cfg, "continual.");
    read(c, "max_updates", cfg.continual.max_updates, cfg, "continual.");
    read(c, "retrain_epochs", cfg.continual.retrain_epochs, cfg, "continual.");
    cfg.continual.retrain_mode = parse_retrain_mode(mode);
  }
  if (j.contains("fcs")) {
    const json& f = j.at("fcs");
    reject_unknown(f, {"steps", "noise_runs", "flip_prob", "max_samples"}, "fcs.");
    read(f, "steps", cfg.fcs.ig.steps, cfg, "fcs.");
    read(f, "noise_runs", cfg.fcs.ig.noise_runs, cfg, "fcs.");
    read(f, "flip_prob", cfg.fcs.ig.flip_prob, cfg, "fcs.");
    read(f, "max_samples", cfg.fcs.max_samples, cfg, "fcs.");
  }
  if (j.contains("stability")) {
    const json& s = j.at("stability");
    reject_unknown(s, {"epsilon", "n0", "subsets"}, "stability.");
    read(s, "epsilon", cfg.stability.epsilon, cfg, "stability.");
    read(s, "n0", cfg.stability.n0, cfg, "stability.");
    read(s, "subsets", cfg.stability.random_subsets, cfg, "stability.");
  }
  if (j.contains("discriminability")) {
    const json& d = j.at("discriminability");
    reject_unknown(d, {"delta", "subsamples", "rate"}, "discriminability.");
    read(d, "delta", cfg.discriminability.delta, cfg, "discriminability.");
    read(d, "subsamples", cfg.discriminability.subsamples, cfg, "discriminability.");
    read(d, "rate", cfg.discriminability.rate, cfg, "discriminability.");
  }
  cfg.fcs.ig.seed = cfg.seed;
  cfg.stability.seed = cfg.seed;
  cfg.discriminability.seed = cfg.seed;

  t.validate();
  cfg.continual.validate();
  if (cfg.fcs.ig.steps < 8) throw ConfigError("fcs.steps must be >= 8");
  return cfg;
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string content_hash(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string dataset_hash(const std::filesystem::path& dir) {
  return content_hash(read_text_file(dir / "meta.json") + read_text_file(dir / "samples.jsonl"));
}

std::string artifact_version() { return "tif-0.1.0"; }

void RunManifest::write(const std::filesystem::path& out_dir) const {
  nlohmann::ordered_json j;
  j["command"] = command;
  j["config_hash"] = config_hash;
  j["dataset_hash"] = dataset_hash;
  j["seed"] = seed;
  j["version"] = version;
  j["outputs"] = outputs;
  j["provenance"] = provenance;
  const auto now = std::chrono::system_clock::now();
  j["created_unix"] = std::chrono::duration_cast<std::chrono::seconds>(now.time_since_epoch()).count();
  std::ofstream out(out_dir / "manifest.json", std::ios::binary);
  out << j.dump(2) << '\n';
}

}  // namespace tif
