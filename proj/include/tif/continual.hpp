#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "tif/dataset.hpp"
#include "tif/model.hpp"
#include "tif/trainer.hpp"

namespace tif {

enum class RetrainMode { full_two_stage, stage2_only };
enum class Method { tif, erm };

std::string to_string(RetrainMode mode);
RetrainMode parse_retrain_mode(const std::string& text);
std::string to_string(Method method);
Method parse_method(const std::string& text);

struct ContinualConfig {
  double f1_threshold = 0.90;
  std::size_t budget_per_update = 100;
  RetrainMode retrain_mode = RetrainMode::full_two_stage;
  int max_updates = 1000;
  /// Epochs per retraining; -1 keeps the training config's total_epochs.
  int retrain_epochs = -1;

  void validate() const;
};

/// Decides whether a month's evaluation should trigger an update. The
/// shipped rule compares macro-F1 with a threshold.
class UpdateTrigger {
 public:
  virtual ~UpdateTrigger() = default;
  virtual bool fire(double month_macro_f1) const = 0;
};

class F1BelowThreshold final : public UpdateTrigger {
 public:
  explicit F1BelowThreshold(double threshold) : threshold_(threshold) {}
  bool fire(double f1) const override { return f1 < threshold_; }

 private:
  double threshold_;
};

struct ContinualMonth {
  std::string window;  // YYYY-MM
  double macro_f1 = 0.0;
  bool updated = false;
  std::size_t labeled = 0;
  std::size_t cumulative_cost = 0;
};

struct ContinualReport {
  std::string method;
  std::vector<ContinualMonth> months;
  std::size_t update_count = 0;
  int first_update_month = -1;  // index into months, -1 if none
  std::size_t label_cost = 0;
  std::vector<std::string> warnings;

  std::string to_json() const;
};

/// Positions of the `budget` samples whose predicted probability is closest
/// to 0.5, ties broken by position. Returns all positions if budget >= size.
std::vector<std::size_t> lowest_confidence(std::span<const double> logits, std::size_t budget);

/// Month-by-month evaluation and drift-triggered retraining. `train` is the
/// original training period; labelled stream samples join its latest
/// environment. Retraining warm-starts from the current model with `method`.
ContinualReport run_continual(const ModelState& initial, const TemporalDataset& train,
                              const std::vector<TemporalDataset>& stream, Method method,
                              const TrainConfig& train_config, const ContinualConfig& config,
                              const UpdateTrigger* trigger = nullptr);

}  // namespace tif
