#include "tif/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <nlohmann/json.hpp>
#include <numeric>

#include "tif/errors.hpp"
#include "tif/log.hpp"
#include "tif/metrics.hpp"
#include "tif/rng.hpp"

namespace tif {

std::string Ablation::to_string() const {
  if (mpc1 && mpc2 && iga) return "full";
  if (all_off()) return "none";
  std::string out;
  auto add = [&](bool on, const char* name) {
    if (!on) return;
    if (!out.empty()) out += '+';
    out += name;
  };
  add(mpc1, "mpc1");
  add(mpc2, "mpc2");
  add(iga, "iga");
  return out;
}

Ablation Ablation::parse(const std::string& text) {
  if (text == "full") return {};
  if (text == "none") return {false, false, false};
  Ablation a{false, false, false};
  std::size_t start = 0;
  while (start <= text.size()) {
    const std::size_t end = std::min(text.find('+', start), text.size());
    const std::string term = text.substr(start, end - start);
    if (term == "mpc1")
      a.mpc1 = true;
    else if (term == "mpc2")
      a.mpc2 = true;
    else if (term == "iga")
      a.iga = true;
    else
      throw ConfigError("unknown ablation term '" + term +
                        "' (expected full, none or a '+'-list of mpc1, mpc2, iga)");
    start = end + 1;
  }
  return a;
}

void TrainConfig::validate() const {
  weights.validate();
  if (total_epochs < 0) throw ConfigError("total_epochs must be >= 0");
  if (stage1_epochs > total_epochs)
    throw ConfigError("stage1_epochs (" + std::to_string(stage1_epochs) +
                      ") exceeds total_epochs (" + std::to_string(total_epochs) + ")");
  if (stage1_epochs < -1) throw ConfigError("stage1_epochs must be >= 0");
  if (batch_size_per_env < 2) throw ConfigError("batch_size_per_env must be >= 2");
  if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be positive");
  if (!(validation_fraction >= 0.0 && validation_fraction < 1.0))
    throw ConfigError("validation_fraction must lie in [0, 1)");
  if (arch.proxies_per_class < 1) throw ConfigError("K must be >= 1");
}

std::vector<EpochRecord> TrainReport::epochs() const {
  std::vector<EpochRecord> all = stage1;
  all.insert(all.end(), stage2.begin(), stage2.end());
  return all;
}

namespace {

nlohmann::ordered_json epoch_json(const EpochRecord& e) {
  nlohmann::ordered_json j;
  j["epoch"] = e.epoch;
  j["stage"] = e.stage;
  j["cls"] = e.cls;
  j["pal"] = e.alignment;
  j["intra"] = e.intra;
  j["inter"] = e.inter;
  j["iga"] = e.iga;
  j["total"] = e.total;
  if (std::isnan(e.val_macro_f1))
    j["val_macro_f1"] = nullptr;
  else
    j["val_macro_f1"] = e.val_macro_f1;
  return j;
}

}  // namespace

std::string TrainReport::to_json(const TrainConfig& c) const {
  nlohmann::ordered_json j;
  j["method"] = method;
  j["seed"] = c.seed;
  nlohmann::ordered_json cfg;
  cfg["alpha"] = c.weights.alpha;
  cfg["beta"] = c.weights.beta;
  cfg["lambda_intra"] = c.weights.lambda_intra;
  cfg["lambda_inter"] = c.weights.lambda_inter;
  cfg["tau"] = c.weights.tau;
  cfg["margin"] = c.weights.margin;
  cfg["K"] = c.arch.proxies_per_class;
  cfg["layer_widths"] = c.arch.layer_widths;
  cfg["head_hidden"] = c.arch.head_hidden;
  cfg["stage1_epochs"] = c.resolved_stage1_epochs();
  cfg["total_epochs"] = c.total_epochs;
  cfg["batch_size_per_env"] = c.batch_size_per_env;
  cfg["learning_rate"] = c.learning_rate;
  cfg["optimizer"] = to_string(c.optimizer);
  cfg["granularity"] = c.granularity.to_string();
  cfg["ablation"] = c.ablation.to_string();
  cfg["validation_fraction"] = c.validation_fraction;
  cfg["select_best"] = c.select_best;
  j["config"] = cfg;
  j["env_count"] = env_count;
  j["merged_envs"] = merged_envs;
  j["selected_epoch"] = selected_epoch;
  j["wall_seconds"] = wall_seconds;
  j["stage1"] = nlohmann::json::array();
  for (const auto& e : stage1) j["stage1"].push_back(epoch_json(e));
  j["stage2"] = nlohmann::json::array();
  for (const auto& e : stage2) j["stage2"].push_back(epoch_json(e));
  j["warnings"] = warnings;
  return j.dump(2);
}

ObjectiveTerms evaluate_objective(const ModelState& state, const BatchByEnv& batch, int stage,
                                  const LossWeights& w, const Ablation& ablation,
                                  ForwardCache& cache, std::span<double> grad) {
  forward(state, batch.inputs, cache);
  const std::size_t n = batch.labels.size();
  const bool want = !grad.empty();
  const bool mpc = (stage == 1 && ablation.mpc1) || (stage == 2 && ablation.mpc2);
  const bool iga = stage == 2 && ablation.iga;
  std::vector<double> dlogits(n, 0.0);
  Matrix demb;
  if (mpc && want) demb.resize(n, state.arch.embedding_dim());

  LossGrad g;
  if (want) {
    g.dlogits = dlogits;
    g.dembedding = mpc ? &demb : nullptr;
    g.dproxies = ParamLayout::view(grad, ParamLayout(state.arch).all_proxies());
  }
  const ProxyView proxies = proxies_of(state);

  ObjectiveTerms out;
  if (stage == 1) {
    const double inv = 1.0 / static_cast<double>(batch.env_rows.size());
    for (const auto& rows : batch.env_rows) {
      LossGrad ge = g;
      ge.scale = inv;
      out.cls += inv * cls_loss(cache.logits, batch.labels, rows, ge);
      if (mpc) {
        ge.scale = inv * w.alpha;
        out.alignment +=
            inv * proxy_alignment_loss(cache.embedding, batch.labels, rows, proxies, w.tau, ge);
      }
    }
  } else {
    std::vector<std::size_t> all(n);
    std::iota(all.begin(), all.end(), std::size_t{0});
    out.cls = cls_loss(cache.logits, batch.labels, all, g);
    if (mpc) {
      LossGrad ga = g;
      ga.scale = w.alpha;
      out.alignment = proxy_alignment_loss(cache.embedding, batch.labels, all, proxies, w.tau, ga);
    }
    if (iga) {
      LossGrad gi = g;
      gi.scale = w.beta;
      out.iga = iga_penalty(cache.logits, batch.labels, batch.env_rows, gi);
    }
  }
  if (mpc) {
    // The proxy regularisers do not depend on the batch; per-environment
    // averaging in stage 1 leaves them with weight alpha.
    LossGrad gr = g;
    gr.scale = w.alpha * w.lambda_intra;
    out.intra = intra_diversity_loss(proxies, gr);
    gr.scale = w.alpha * w.lambda_inter;
    out.inter = inter_separation_loss(proxies, w.margin, gr);
  }
  out.total = out.cls +
              (mpc ? w.alpha * (out.alignment + w.lambda_intra * out.intra +
                                w.lambda_inter * out.inter)
                   : 0.0) +
              (iga ? w.beta * out.iga : 0.0);
  if (want) backward(state, batch.inputs, cache, dlogits, mpc ? &demb : nullptr, grad);
  return out;
}

TrainValSplit temporal_holdout(const TemporalDataset& ds, double fraction, std::uint64_t seed) {
  if (ds.empty() || fraction <= 0.0) return {ds, TemporalDataset(ds.dim(), {}, ds.roles())};
  const Date origin = first_of_month(ds.t_min());
  // cells[(month, label)] -> positions
  std::vector<std::vector<std::size_t>> cells;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const auto cell = static_cast<std::size_t>(months_between(origin, ds[i].timestamp)) * 2 +
                      static_cast<std::size_t>(to_int(ds[i].label));
    if (cell >= cells.size()) cells.resize(cell + 1);
    cells[cell].push_back(i);
  }
  Rng rng = make_rng(seed, 0x5A11);
  std::vector<char> held(ds.size(), 0);
  for (auto& cell : cells) {
    const auto take = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(cell.size())));
    for (std::size_t i = 0; i < take; ++i) {
      std::swap(cell[i], cell[i + uniform_index(rng, cell.size() - i)]);
      held[cell[i]] = 1;
    }
  }
  std::vector<std::size_t> fit, val;
  for (std::size_t i = 0; i < ds.size(); ++i) (held[i] ? val : fit).push_back(i);
  return {ds.subset(fit), ds.subset(val)};
}

namespace {

/// Cycles through a shuffled environment; draws with replacement when the
/// environment is smaller than one batch.
class EnvSampler {
 public:
  explicit EnvSampler(std::vector<std::size_t> members) : members_(std::move(members)), order_(members_) {}

  std::size_t size() const { return members_.size(); }

  void draw(Rng& rng, std::size_t count, std::vector<std::size_t>& out) {
    if (members_.size() < count) {
      for (std::size_t i = 0; i < count; ++i) out.push_back(members_[uniform_index(rng, members_.size())]);
      return;
    }
    for (std::size_t i = 0; i < count; ++i) {
      if (cursor_ == 0) shuffle(rng);
      out.push_back(order_[cursor_]);
      cursor_ = (cursor_ + 1) % order_.size();
    }
  }

 private:
  void shuffle(Rng& rng) {
    for (std::size_t i = order_.size(); i > 1; --i) std::swap(order_[i - 1], order_[uniform_index(rng, i)]);
  }
  std::vector<std::size_t> members_;
  std::vector<std::size_t> order_;
  std::size_t cursor_ = 0;
};

void add_terms(ObjectiveTerms& sum, const ObjectiveTerms& o) {
  sum.cls += o.cls;
  sum.alignment += o.alignment;
  sum.intra += o.intra;
  sum.inter += o.inter;
  sum.iga += o.iga;
  sum.total += o.total;
}

using Batch = BatchByEnv;

class Engine {
 public:
  Engine(const TemporalDataset& fit, const TrainConfig& config, const TrainOptions& options,
         std::string method)
      : fit_(fit), config_(config), options_(options), rng_(make_rng(config.seed, 2)) {
    Architecture arch = config.arch;
    arch.dim = fit.dim();
    if (options.initial) {
      if (options.initial->arch.dim != fit.dim())
        throw SchemaError("initial model dim does not match the dataset");
      state_ = *options.initial;
    } else {
      state_ = init_model(arch, config.seed);
    }
    grad_.assign(state_.params.size(), 0.0);
    optimizer_ = std::make_unique<Optimizer>(config.optimizer, config.learning_rate, state_.params.size());
    report_.method = std::move(method);
    best_ = state_;
  }

  ModelState& state() { return state_; }
  Optimizer& optimizer() { return *optimizer_; }
  TrainReport& report() { return report_; }
  Rng& rng() { return rng_; }

  Batch assemble(const std::vector<std::vector<std::size_t>>& groups) {
    Batch b;
    b.inputs = SparseBatch(fit_.dim());
    for (const auto& g : groups) {
      std::vector<std::size_t> rows;
      for (std::size_t p : g) {
        rows.push_back(b.labels.size());
        b.inputs.add_row(fit_[p].features);
        b.labels.push_back(fit_[p].label);
      }
      b.env_rows.push_back(std::move(rows));
    }
    return b;
  }

  /// Forward, losses, backward, update. stage 0 = plain ERM objective.
  ObjectiveTerms step(const Batch& batch, int stage, int epoch) {
    std::fill(grad_.begin(), grad_.end(), 0.0);
    const ObjectiveTerms out =
        evaluate_objective(state_, batch, stage, config_.weights, config_.ablation, cache_, grad_);
    if (!std::isfinite(out.total))
      throw NumericalError("non-finite loss at epoch " + std::to_string(epoch), epoch);
    optimizer_->step(state_.params, grad_);
    project_proxies(state_);
    return out;
  }

  double validation_f1() {
    if (!options_.validation || options_.validation->empty())
      return std::numeric_limits<double>::quiet_NaN();
    const auto logits = predict_logits(state_, *options_.validation);
    std::vector<Label> truth, pred;
    for (std::size_t i = 0; i < logits.size(); ++i) {
      truth.push_back((*options_.validation)[i].label);
      pred.push_back(predicted_label(logits[i]));
    }
    return macro_f1(truth, pred);
  }

  /// Close an epoch: record means and track the best checkpoint.
  void finish_epoch(EpochRecord rec, std::vector<EpochRecord>& into, bool selectable) {
    rec.val_macro_f1 = validation_f1();
    if (selectable && config_.select_best && !std::isnan(rec.val_macro_f1) &&
        (best_epoch_ == 0 || rec.val_macro_f1 > best_f1_)) {
      best_f1_ = rec.val_macro_f1;
      best_epoch_ = rec.epoch;
      best_ = state_;
    }
    into.push_back(rec);
  }

  TrainResult finish(std::chrono::steady_clock::time_point start) {
    report_.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const auto all = report_.epochs();
    report_.selected_epoch = all.empty() ? 0 : all.back().epoch;
    if (best_epoch_ > 0) {
      report_.selected_epoch = best_epoch_;
      state_ = best_;
    }
    auto w = drain_warnings();
    report_.warnings.insert(report_.warnings.end(), w.begin(), w.end());
    return {state_, report_};
  }

 private:
  const TemporalDataset& fit_;
  const TrainConfig& config_;
  const TrainOptions& options_;
  Rng rng_;
  ModelState state_;
  std::vector<double> grad_;
  std::unique_ptr<Optimizer> optimizer_;
  ForwardCache cache_;
  TrainReport report_;
  ModelState best_;
  double best_f1_ = -1.0;
  int best_epoch_ = 0;
};

EpochRecord mean_record(const ObjectiveTerms& sum, std::size_t steps, int epoch, int stage) {
  const double inv = steps ? 1.0 / static_cast<double>(steps) : 0.0;
  EpochRecord r;
  r.epoch = epoch;
  r.stage = stage;
  r.cls = sum.cls * inv;
  r.alignment = sum.alignment * inv;
  r.intra = sum.intra * inv;
  r.inter = sum.inter * inv;
  r.iga = sum.iga * inv;
  r.total = sum.total * inv;
  return r;
}

/// First epoch (1-based) eligible for checkpoint selection in a stage
/// spanning epochs [first, last].
int selection_start(int first, int last) {
  const int len = last - first + 1;
  const int quarter = std::max(1, (len + 3) / 4);
  return last - quarter + 1;
}

TrainResult run_erm(const TemporalDataset& fit, std::size_t env_count, const TrainConfig& config,
                    const TrainOptions& options, const std::string& method) {
  const auto start = std::chrono::steady_clock::now();
  Engine engine(fit, config, options, method);
  engine.report().env_count = env_count;
  const std::size_t batch = static_cast<std::size_t>(config.batch_size_per_env) * std::max<std::size_t>(env_count, 1);
  std::vector<std::size_t> order(fit.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const int first_selectable = selection_start(1, config.total_epochs);
  for (int epoch = 1; epoch <= config.total_epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i)
      std::swap(order[i - 1], order[uniform_index(engine.rng(), i)]);
    ObjectiveTerms sum;
    std::size_t steps = 0;
    for (std::size_t s = 0; s < order.size(); s += batch) {
      const std::size_t e = std::min(order.size(), s + batch);
      const std::vector<std::vector<std::size_t>> groups{
          std::vector<std::size_t>(order.begin() + static_cast<std::ptrdiff_t>(s),
                                   order.begin() + static_cast<std::ptrdiff_t>(e))};
      add_terms(sum, engine.step(engine.assemble(groups), 0, epoch));
      ++steps;
    }
    engine.finish_epoch(mean_record(sum, steps, epoch, 1), engine.report().stage1,
                        epoch >= first_selectable);
  }
  return engine.finish(start);
}

}  // namespace

TrainResult train_tif(const TemporalDataset& fit, const EnvironmentAssignment& assignment,
                      const TrainConfig& config, const TrainOptions& options) {
  config.validate();
  if (assignment.env_of_sample.size() != fit.size())
    throw ConfigError("environment assignment does not cover the training set");
  std::vector<std::size_t> merged;
  const EnvironmentAssignment envs = merge_single_class_envs(fit, assignment, &merged);
  for (std::size_t e : merged)
    warn("environment " + std::to_string(e) + " holds a single class; merged into its neighbour");

  if (config.ablation.all_off()) {
    // Neither stage has an environment-dependent term left, so the schedule
    // collapses to the ERM control.
    TrainResult res = run_erm(fit, envs.env_count, config, options, "tif");
    res.report.merged_envs = merged;
    return res;
  }
  if (config.ablation.iga && config.resolved_stage1_epochs() < config.total_epochs && envs.env_count < 2)
    throw ConfigError("invariant gradient alignment needs at least two environments");

  const auto start = std::chrono::steady_clock::now();
  Engine engine(fit, config, options, "tif");
  engine.report().env_count = envs.env_count;
  engine.report().merged_envs = merged;

  std::vector<EnvSampler> samplers;
  for (auto& members : envs.members()) samplers.emplace_back(std::move(members));
  const auto bs = static_cast<std::size_t>(config.batch_size_per_env);
  for (std::size_t e = 0; e < samplers.size(); ++e)
    if (samplers[e].size() < bs)
      warn("environment " + std::to_string(e) + " has " + std::to_string(samplers[e].size()) +
           " samples, fewer than batch_size_per_env; sampling with replacement");
  const std::size_t steps_per_epoch = std::max<std::size_t>(
      1, (fit.size() + bs * samplers.size() - 1) / (bs * samplers.size()));

  const int n1 = config.resolved_stage1_epochs();
  const int total = config.total_epochs;
  auto run_stage = [&](int stage, int first, int last, std::vector<EpochRecord>& into) {
    const int first_selectable = stage == 2 || n1 == total ? selection_start(first, last) : last + 1;
    for (int epoch = first; epoch <= last; ++epoch) {
      ObjectiveTerms sum;
      for (std::size_t s = 0; s < steps_per_epoch; ++s) {
        std::vector<std::vector<std::size_t>> groups(samplers.size());
        for (std::size_t e = 0; e < samplers.size(); ++e) samplers[e].draw(engine.rng(), bs, groups[e]);
        add_terms(sum, engine.step(engine.assemble(groups), stage, epoch));
      }
      engine.finish_epoch(mean_record(sum, steps_per_epoch, epoch, stage), into,
                          epoch >= first_selectable);
    }
  };

  run_stage(1, 1, n1, engine.report().stage1);
  if (total > n1) {
    engine.optimizer().reset();
    if (options.on_stage_boundary) options.on_stage_boundary(engine.state(), engine.optimizer());
    run_stage(2, n1 + 1, total, engine.report().stage2);
  }
  return engine.finish(start);
}

TrainResult train_erm(const TemporalDataset& fit, const TrainConfig& config, const TrainOptions& options) {
  config.validate();
  std::size_t env_count = 1;
  if (!fit.empty()) env_count = merge_single_class_envs(fit, split(fit, config.granularity)).env_count;
  return run_erm(fit, env_count, config, options, "erm");
}

TrainResult fit_tif(const TemporalDataset& train, const TrainConfig& config) {
  const TrainValSplit parts = temporal_holdout(train, config.validation_fraction, config.seed);
  const auto assignment = split(parts.fit, config.granularity);
  TrainOptions opts;
  opts.validation = &parts.validation;
  return train_tif(parts.fit, assignment, config, opts);
}

TrainResult fit_erm(const TemporalDataset& train, const TrainConfig& config) {
  const TrainValSplit parts = temporal_holdout(train, config.validation_fraction, config.seed);
  TrainOptions opts;
  opts.validation = &parts.validation;
  return train_erm(parts.fit, config, opts);
}

}  // namespace tif
