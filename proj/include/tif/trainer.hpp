#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "tif/dataset.hpp"
#include "tif/envsplit.hpp"
#include "tif/losses.hpp"
#include "tif/model.hpp"
#include "tif/optimizer.hpp"

namespace tif {

/// Which contrastive/invariance terms are active. mpc1: per-environment MPC
/// in stage 1; mpc2: MPC over the union batch in stage 2; iga: invariant
/// gradient alignment in stage 2.
struct Ablation {
  bool mpc1 = true;
  bool mpc2 = true;
  bool iga = true;

  bool all_off() const { return !mpc1 && !mpc2 && !iga; }
  /// "full", "none", or a '+'-joined subset such as "mpc1+iga".
  std::string to_string() const;
  static Ablation parse(const std::string& text);
};

/// Loss values of one evaluation of the training objective.
struct ObjectiveTerms {
  double cls = 0.0;
  double alignment = 0.0;
  double intra = 0.0;
  double inter = 0.0;
  double iga = 0.0;
  double total = 0.0;
};

/// The per-step objective. stage 0: mean BCE over the union batch. stage 1:
/// mean over environments of (BCE + alpha * alignment) plus the proxy
/// regularisers. stage 2: BCE and alignment over the union plus beta * IGA
/// over the environment partition. Terms disabled by `ablation` are skipped.
/// Runs the forward pass into `cache`; when `grad` is non-empty the exact
/// gradient is added to it.
ObjectiveTerms evaluate_objective(const ModelState& state, const BatchByEnv& batch, int stage,
                                  const LossWeights& weights, const Ablation& ablation,
                                  ForwardCache& cache, std::span<double> grad = {});

struct TrainConfig {
  LossWeights weights;
  Architecture arch;  // dim is taken from the dataset
  int stage1_epochs = -1;  // -1: total_epochs / 2
  int total_epochs = 20;
  int batch_size_per_env = 32;
  double learning_rate = 1e-3;
  OptimizerKind optimizer = OptimizerKind::adam;
  Granularity granularity = Granularity::monthly();
  std::uint64_t seed = 1;
  Ablation ablation;
  /// Fraction of every (month, class) cell held out for validation.
  double validation_fraction = 0.2;
  /// Return the best-validation checkpoint from the final quarter of the
  /// last stage instead of the final parameters.
  bool select_best = true;

  int resolved_stage1_epochs() const {
    return stage1_epochs < 0 ? total_epochs / 2 : stage1_epochs;
  }
  /// Throws ConfigError naming the offending fields.
  void validate() const;
};

struct EpochRecord {
  int epoch = 0;  // 1-based across both stages
  int stage = 1;
  double cls = 0.0;
  double alignment = 0.0;
  double intra = 0.0;
  double inter = 0.0;
  double iga = 0.0;
  double total = 0.0;
  double val_macro_f1 = 0.0;  // NaN when no validation set
};

struct TrainReport {
  std::string method;  // "tif" or "erm"
  std::vector<EpochRecord> stage1;
  std::vector<EpochRecord> stage2;
  double wall_seconds = 0.0;
  std::size_t env_count = 0;
  std::vector<std::size_t> merged_envs;
  int selected_epoch = 0;
  std::vector<std::string> warnings;

  /// Epoch records of both stages in order.
  std::vector<EpochRecord> epochs() const;
  /// report.json body (loss curves, config echo, seed).
  std::string to_json(const TrainConfig& config) const;
};

struct TrainResult {
  ModelState state;
  TrainReport report;
};

/// Temporal-stratified holdout: within every (calendar month, label) cell a
/// seeded random validation_fraction of samples is held out.
struct TrainValSplit {
  TemporalDataset fit;
  TemporalDataset validation;
};

TrainValSplit temporal_holdout(const TemporalDataset& ds, double fraction, std::uint64_t seed);

struct TrainOptions {
  /// Start from these parameters instead of a fresh init (continual updates).
  const ModelState* initial = nullptr;
  /// Validation set for per-epoch macro-F1 and checkpoint selection.
  const TemporalDataset* validation = nullptr;
  /// Called between the stages, after the optimizer reset.
  std::function<void(const ModelState&, const Optimizer&)> on_stage_boundary;
};

/// Two-stage invariant training on `fit` with environments `assignment`
/// (computed on `fit`). Single-class environments are merged first.
TrainResult train_tif(const TemporalDataset& fit, const EnvironmentAssignment& assignment,
                      const TrainConfig& config, const TrainOptions& options = {});

/// Empirical risk minimisation: mean BCE over shuffled mini-batches of
/// batch_size_per_env * (environment count) samples.
TrainResult train_erm(const TemporalDataset& fit, const TrainConfig& config,
                      const TrainOptions& options = {});

/// Holdout split, environment split and training in one call.
TrainResult fit_tif(const TemporalDataset& train, const TrainConfig& config);
TrainResult fit_erm(const TemporalDataset& train, const TrainConfig& config);

}  // namespace tif
