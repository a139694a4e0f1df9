#include "tif/continual.hpp"

#include <algorithm>
#include <cmath>
#include <nlohmann/json.hpp>
#include <numeric>

#include "tif/errors.hpp"
#include "tif/log.hpp"
#include "tif/metrics.hpp"

namespace tif {

std::string to_string(RetrainMode mode) {
  return mode == RetrainMode::full_two_stage ? "full_two_stage" : "stage2_only";
}

RetrainMode parse_retrain_mode(const std::string& text) {
  if (text == "full_two_stage") return RetrainMode::full_two_stage;
  if (text == "stage2_only") return RetrainMode::stage2_only;
  throw ConfigError("unknown retrain_mode '" + text + "'");
}

std::string to_string(Method method) { return method == Method::tif ? "tif" : "erm"; }

Method parse_method(const std::string& text) {
  if (text == "tif") return Method::tif;
  if (text == "erm") return Method::erm;
  throw ConfigError("unknown method '" + text + "' (expected tif or erm)");
}

void ContinualConfig::validate() const {
  if (!(f1_threshold >= 0.0 && f1_threshold <= 1.0))
    throw ConfigError("f1_threshold must lie in [0, 1]");
  if (budget_per_update < 1) throw ConfigError("budget_per_update must be >= 1");
  if (max_updates < 0) throw ConfigError("max_updates must be >= 0");
}

std::string ContinualReport::to_json() const {
  nlohmann::ordered_json j;
  j["method"] = method;
  j["update_count"] = update_count;
  j["first_update_month"] = first_update_month;
  j["label_cost"] = label_cost;
  j["months"] = nlohmann::json::array();
  for (const auto& m : months) {
    nlohmann::ordered_json row;
    row["window"] = m.window;
    row["macro_f1"] = m.macro_f1;
    row["updated"] = m.updated;
    row["labeled"] = m.labeled;
    row["cumulative_cost"] = m.cumulative_cost;
    j["months"].push_back(row);
  }
  j["warnings"] = warnings;
  return j.dump(2);
}

std::vector<std::size_t> lowest_confidence(std::span<const double> logits, std::size_t budget) {
  std::vector<std::size_t> order(logits.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  auto margin = [&](std::size_t i) { return std::abs(sigmoid(logits[i]) - 0.5); };
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return margin(a) < margin(b); });
  if (order.size() > budget) order.resize(budget);
  std::sort(order.begin(), order.end());
  return order;
}

namespace {

std::string month_label(const Date& d) { return format_date(d).substr(0, 7); }

}  // namespace

ContinualReport run_continual(const ModelState& initial, const TemporalDataset& train,
                              const std::vector<TemporalDataset>& stream, Method method,
                              const TrainConfig& train_config, const ContinualConfig& config,
                              const UpdateTrigger* trigger) {
  config.validate();
  for (std::size_t m = 1; m < stream.size(); ++m)
    if (!stream[m].empty() && !stream[m - 1].empty() && !(stream[m - 1].t_max() < stream[m].t_min()))
      throw ConfigError("stream windows must be strictly time-ordered");
  if (!stream.empty() && !stream.front().empty() && !train.empty() &&
      !(train.t_max() < stream.front().t_min()))
    throw ConfigError("stream must start after the training period");

  const F1BelowThreshold default_trigger(config.f1_threshold);
  if (!trigger) trigger = &default_trigger;

  TrainConfig retrain = train_config;
  if (config.retrain_epochs >= 0) {
    retrain.total_epochs = config.retrain_epochs;
    retrain.stage1_epochs = std::min(retrain.resolved_stage1_epochs(), retrain.total_epochs);
    if (train_config.stage1_epochs < 0) retrain.stage1_epochs = -1;
  }
  if (config.retrain_mode == RetrainMode::stage2_only) retrain.stage1_epochs = 0;

  const TrainValSplit parts = temporal_holdout(train, train_config.validation_fraction, train_config.seed);
  const EnvironmentAssignment base_envs = split(parts.fit, train_config.granularity);

  ContinualReport report;
  report.method = to_string(method);
  ModelState state = initial;
  TemporalDataset labeled(train.dim(), {});

  for (std::size_t m = 0; m < stream.size(); ++m) {
    const TemporalDataset& window = stream[m];
    ContinualMonth row;
    row.window = window.empty() ? "" : month_label(window.t_min());
    if (window.empty()) {
      row.cumulative_cost = report.label_cost;
      report.months.push_back(row);
      continue;
    }
    const auto logits = predict_logits(state, window);
    std::vector<Label> truth, pred;
    for (std::size_t i = 0; i < window.size(); ++i) {
      truth.push_back(window[i].label);
      pred.push_back(predicted_label(logits[i]));
    }
    row.macro_f1 = macro_f1(truth, pred);

    if (trigger->fire(row.macro_f1) && report.update_count < static_cast<std::size_t>(config.max_updates)) {
      if (config.budget_per_update > window.size())
        warn("labelling budget exceeds month " + row.window + " size; taking all samples");
      // the trainer drains the buffer, so collect ours first
      for (auto& w : drain_warnings()) report.warnings.push_back(std::move(w));
      const auto picked = lowest_confidence(logits, config.budget_per_update);
      labeled = labeled.merged_with(window.subset(picked));

      // Labelled samples all postdate training, so they sort to the end of
      // the augmented set and join the latest environment.
      const TemporalDataset augmented = parts.fit.merged_with(labeled);
      EnvironmentAssignment envs = base_envs;
      envs.env_of_sample.resize(augmented.size(), base_envs.env_count - 1);

      TrainOptions opts;
      opts.initial = &state;
      opts.validation = &parts.validation;
      TrainResult res = method == Method::tif ? train_tif(augmented, envs, retrain, opts)
                                              : train_erm(augmented, retrain, opts);
      state = std::move(res.state);
      for (auto& w : res.report.warnings) report.warnings.push_back(std::move(w));

      row.updated = true;
      row.labeled = picked.size();
      report.label_cost += picked.size();
      ++report.update_count;
      if (report.first_update_month < 0) report.first_update_month = static_cast<int>(m);
    }
    row.cumulative_cost = report.label_cost;
    report.months.push_back(row);
  }
  for (auto& w : drain_warnings()) report.warnings.push_back(std::move(w));
  return report;
}

}  // namespace tif
