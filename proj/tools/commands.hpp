#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace tif::cli {

namespace fs = std::filesystem;

struct GenerateArgs {
  fs::path config;  // generator spec JSON; empty for the default spec
  fs::path out;
  std::optional<std::uint64_t> seed;
};

struct TrainArgs {
  fs::path data;
  fs::path config;
  fs::path out;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> method;
  std::optional<std::string> ablation;
};

struct EvaluateArgs {
  fs::path model;
  fs::path data;
  fs::path config;  // optional
  fs::path out;
  std::optional<std::uint64_t> seed;
  /// "monthly" (every test month) or "monthly:<n>".
  std::string windows = "monthly";
};

struct AnalyzeArgs {
  fs::path model;
  fs::path data;
  fs::path config;  // optional
  fs::path out;
  std::optional<std::uint64_t> seed;
};

struct ContinualArgs {
  fs::path model;
  fs::path data;
  fs::path config;
  fs::path out;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> method;
};

struct ReportArgs {
  std::vector<fs::path> runs;
  fs::path out;  // optional
};

void cmd_generate(const GenerateArgs& args);
void cmd_train(const TrainArgs& args);
void cmd_evaluate(const EvaluateArgs& args);
void cmd_analyze(const AnalyzeArgs& args);
void cmd_continual(const ContinualArgs& args);
void cmd_report(const ReportArgs& args);

/// Parses argv, runs one command and maps errors to exit codes: 2 config,
/// 3 dataset or schema, 4 numerical, 1 anything else.
int run(int argc, char** argv);

}  // namespace tif::cli
