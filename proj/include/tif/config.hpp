#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "tif/continual.hpp"
#include "tif/metrics.hpp"
#include "tif/trainer.hpp"

namespace tif {

/// Everything a run reads from its JSON config file.
struct RunConfig {
  std::uint64_t seed = 0;
  Method method = Method::tif;
  TrainConfig train;
  ContinualConfig continual;
  FcsOptions fcs;
  StabilityOptions stability;
  DiscriminabilityOptions discriminability;
  /// Calendar months from the dataset's first sample used for training; the
  /// rest of the dataset is the test stream.
  int train_months = 12;
  /// Key -> "default" | "file" | "flag", for the manifest.
  std::map<std::string, std::string> provenance;
};

/// Parses a run config. `seed` is required unless `seed_override` is given.
/// Unknown keys are rejected. Throws ConfigError.
RunConfig parse_run_config(const std::string& text,
                           std::optional<std::uint64_t> seed_override = std::nullopt);

/// Reads a file and returns its bytes. Throws ConfigError when unreadable.
std::string read_text_file(const std::filesystem::path& path);

/// 64-bit FNV-1a, hex encoded.
std::string content_hash(const std::string& bytes);

/// Hash over every file of a dataset directory (meta.json + samples.jsonl).
std::string dataset_hash(const std::filesystem::path& dir);

struct RunManifest {
  std::string command;
  std::string config_hash;
  std::string dataset_hash;
  std::uint64_t seed = 0;
  std::string version;
  std::vector<std::string> outputs;
  std::map<std::string, std::string> provenance;

  void write(const std::filesystem::path& out_dir) const;
};

/// Artifact version recorded in manifests.
std::string artifact_version();

}  // namespace tif
