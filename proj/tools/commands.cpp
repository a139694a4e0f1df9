#include "commands.hpp"

#include <CLI11.hpp>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <nlohmann/json.hpp>
#include <sstream>

#include "tif/config.hpp"
#include "tif/continual.hpp"
#include "tif/datagen.hpp"
#include "tif/errors.hpp"
#include "tif/log.hpp"
#include "tif/metrics.hpp"
#include "tif/trainer.hpp"

namespace tif::cli {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

constexpr const char* kMetricsHeader =
    "window,macro_f1,precision_mal,recall_mal,fcs_total,cosine_mean_mal";

std::string num(double v) {
  if (std::isnan(v)) return "nan";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

bool has_seed(const std::string& text) {
  if (text.empty()) return false;
  try {
    const json j = json::parse(text);
    return j.is_object() && j.contains("seed");
  } catch (const json::parse_error&) {
    return false;  // parse_run_config reports it
  }
}

/// Flag, then file, then `fallback` (the checkpoint's seed) when given.
RunConfig load_config(const fs::path& path, std::optional<std::uint64_t> seed,
                      std::optional<std::uint64_t> fallback = std::nullopt) {
  const std::string text = path.empty() ? std::string() : read_text_file(path);
  std::optional<std::uint64_t> override = seed;
  if (!override && !has_seed(text)) override = fallback;
  RunConfig cfg = parse_run_config(text, override);
  if (!seed && override) cfg.provenance["seed"] = "checkpoint";
  return cfg;
}

std::string hash_of(const fs::path& config) {
  return config.empty() ? content_hash("") : content_hash(read_text_file(config));
}

void finish(const std::string& command, const fs::path& out, const fs::path& config,
            const fs::path& data, std::uint64_t seed, std::vector<std::string> outputs,
            std::map<std::string, std::string> provenance) {
  RunManifest m;
  m.command = command;
  m.config_hash = hash_of(config);
  m.dataset_hash = data.empty() ? std::string() : dataset_hash(data);
  m.seed = seed;
  m.version = artifact_version();
  m.outputs = std::move(outputs);
  m.provenance = std::move(provenance);
  m.write(out);
}

struct Split {
  TemporalDataset train;
  TemporalDataset test;
  Date test_start;
};

Split split_dataset(const TemporalDataset& ds, int train_months) {
  if (ds.empty()) throw SchemaError("dataset is empty");
  Split s;
  const Date origin = first_of_month(ds.t_min());
  s.test_start = add_months(origin, train_months);
  s.train = ds.slice(origin, s.test_start);
  s.test = ds.slice(s.test_start, add_months(ds.t_max(), 1));
  if (s.train.empty()) throw ConfigError("train_months selects no training samples");
  return s;
}

int test_month_count(const Split& s) {
  return s.test.empty() ? 0 : months_between(s.test_start, s.test.t_max()) + 1;
}

int parse_window_spec(const std::string& spec, int available) {
  if (spec == "monthly") return available;
  if (spec.rfind("monthly:", 0) == 0) {
    try {
      std::size_t used = 0;
      const int n = std::stoi(spec.substr(8), &used);
      if (used == spec.size() - 8 && n >= 1) return n;
    } catch (const std::exception&) {
    }
  }
  throw ConfigError("window spec must be 'monthly' or 'monthly:<n>', got '" + spec + "'");
}

std::string role_of(const TemporalDataset& ds, std::uint32_t j) {
  if (!ds.roles()) return "unknown";
  const auto& r = *ds.roles();
  auto in = [j](const std::vector<std::uint32_t>& v) {
    return std::find(v.begin(), v.end(), j) != v.end();
  };
  if (in(r.stable)) return "stable";
  if (in(r.unstable)) return "unstable";
  if (in(r.family)) return "family";
  return "noise";
}

TemporalDataset malware_of(const TemporalDataset& ds) {
  std::vector<std::size_t> pos;
  for (std::size_t i = 0; i < ds.size(); ++i)
    if (ds[i].label == Label::malware) pos.push_back(i);
  return ds.subset(pos);
}

}  // namespace

void cmd_generate(const GenerateArgs& args) {
  const std::string text = args.config.empty() ? std::string() : read_text_file(args.config);
  if (!args.seed && !has_seed(text)) throw ConfigError("config field 'seed' is required");
  GeneratorSpec spec;
  try {
    spec = text.empty() ? default_generator_spec() : generator_spec_from_json(text);
  } catch (const SpecError& e) {
    throw ConfigError(e.what());
  }
  if (args.seed) spec.seed = *args.seed;
  const TemporalDataset ds = generate(spec);
  write_dataset(ds, args.out);
  write_file(args.out / "generator.json", generator_spec_to_json(spec) + "\n");
  info("generated " + std::to_string(ds.size()) + " samples in " + args.out.string());
  finish("generate", args.out, args.config, args.out, spec.seed,
         {"meta.json", "samples.jsonl", "generator.json"},
         {{"seed", args.seed ? "flag" : "file"}});
}

void cmd_train(const TrainArgs& args) {
  RunConfig cfg = load_config(args.config, args.seed);
  if (args.method) {
    cfg.method = parse_method(*args.method);
    cfg.provenance["method"] = "flag";
  }
  if (args.ablation) {
    cfg.train.ablation = Ablation::parse(*args.ablation);
    cfg.provenance["ablation"] = "flag";
  }
  const TemporalDataset ds = read_dataset(args.data);
  const Split s = split_dataset(ds, cfg.train_months);
  fs::create_directories(args.out);

  const TrainValSplit parts = temporal_holdout(s.train, cfg.train.validation_fraction, cfg.seed);
  const EnvironmentAssignment envs = split(parts.fit, cfg.train.granularity);
  TrainOptions opts;
  opts.validation = &parts.validation;
  const TrainResult res = cfg.method == Method::tif ? train_tif(parts.fit, envs, cfg.train, opts)
                                                    : train_erm(parts.fit, cfg.train, opts);
  save_checkpoint(res.state, args.out / "model.ckpt");
  write_file(args.out / "report.json", res.report.to_json(cfg.train) + "\n");
  write_file(args.out / "environments.json",
             merge_single_class_envs(parts.fit, envs).to_json(parts.fit) + "\n");
  const auto& last = res.report.epochs().back();
  info(to_string(cfg.method) + " trained: " + std::to_string(res.report.epochs().size()) +
       " epochs, final loss " + num(last.total) + ", selected epoch " +
       std::to_string(res.report.selected_epoch));
  finish("train", args.out, args.config, args.data, cfg.seed,
         {"model.ckpt", "report.json", "environments.json"}, cfg.provenance);
}

void cmd_evaluate(const EvaluateArgs& args) {
  const ModelState state = load_checkpoint(args.model);
  const RunConfig cfg = load_config(args.config, args.seed, state.seed);
  const TemporalDataset ds = read_dataset(args.data);
  if (ds.dim() != state.arch.dim)
    throw SchemaError("dataset dim " + std::to_string(ds.dim()) + " != model dim " +
                      std::to_string(state.arch.dim));
  const Split s = split_dataset(ds, cfg.train_months);
  const int count = parse_window_spec(args.windows, test_month_count(s));
  const auto windows = monthly_windows(ds, s.test_start, count);
  const auto reference = temporal_holdout(s.train, cfg.train.validation_fraction, cfg.seed).validation;
  const SimilaritySeries sim = representation_similarity_variance(state, reference, windows);

  fs::create_directories(args.out);
  std::ostringstream csv;
  csv << kMetricsHeader << '\n';
  std::vector<double> f1;
  for (std::size_t w = 0; w < windows.size(); ++w) {
    const auto& win = windows[w];
    const std::string label = format_date(add_months(s.test_start, static_cast<int>(w))).substr(0, 7);
    if (win.empty()) {
      csv << label << ",nan,nan,nan,nan,nan\n";
      continue;
    }
    const auto logits = predict_logits(state, win);
    std::vector<Label> truth, pred;
    for (std::size_t i = 0; i < win.size(); ++i) {
      truth.push_back(win[i].label);
      pred.push_back(predicted_label(logits[i]));
    }
    const auto rep = classify_report(truth, pred);
    const auto f = fcs(state, win, cfg.fcs);
    f1.push_back(rep.macro_f1);
    csv << label << ',' << num(rep.macro_f1) << ',' << num(rep.precision_malware) << ','
        << num(rep.recall_malware) << ',' << num(f.total) << ',' << num(sim.cosine[w]) << '\n';
  }
  write_file(args.out / "metrics.csv", csv.str());

  ordered_json summary;
  summary["windows"] = windows.size();
  summary["aut_macro_f1"] = f1.size() >= 2 ? json(aut(f1)) : json(nullptr);
  summary["cosine_variance"] = sim.variance;
  write_file(args.out / "summary.json", summary.dump(2) + "\n");
  info("AUT(macro-F1) over " + std::to_string(f1.size()) + " windows: " +
       (f1.size() >= 2 ? num(aut(f1)) : std::string("n/a")));
  finish("evaluate", args.out, args.config, args.data, cfg.seed, {"metrics.csv", "summary.json"},
         cfg.provenance);
}

void cmd_analyze(const AnalyzeArgs& args) {
  const ModelState state = load_checkpoint(args.model);
  const RunConfig cfg = load_config(args.config, args.seed, state.seed);
  const TemporalDataset ds = read_dataset(args.data);
  if (ds.dim() != state.arch.dim)
    throw SchemaError("dataset dim " + std::to_string(ds.dim()) + " != model dim " +
                      std::to_string(state.arch.dim));
  const Split s = split_dataset(ds, cfg.train_months);
  const TemporalDataset malware = malware_of(ds);
  const std::size_t d = ds.dim();

  std::vector<StabilityResult> stab(d);
  std::vector<DiscriminabilityResult> disc(d);
  const bool can_check = malware.size() >= cfg.stability.n0 && !malware.empty();
  if (!can_check) warn("fewer malware samples than stability n0; stability left unset");
  const auto gaps = class_gaps(ds);
  parallel_for(d, [&](std::size_t j) {
    const auto f = static_cast<std::uint32_t>(j);
    if (can_check) stab[j] = stability_check(malware, f, cfg.stability);
    DiscriminabilityOptions o = cfg.discriminability;
    // subsampling can only lower the gap; skip it for features already below delta
    if (gaps[j] < o.delta) o.subsamples = 0;
    disc[j] = discriminability_check(ds, f, o);
  });
  const TemporalDataset& scored = s.test.empty() ? s.train : s.test;
  const FcsResult f = fcs(state, scored, cfg.fcs);

  fs::create_directories(args.out);
  std::ostringstream csv;
  csv << "index,role,gap,stable,discriminative,fcs\n";
  for (std::size_t j = 0; j < d; ++j)
    csv << j << ',' << role_of(ds, static_cast<std::uint32_t>(j)) << ',' << num(disc[j].gap) << ','
        << (can_check ? (stab[j].stable ? "1" : "0") : "") << ',' << (disc[j].discriminative ? 1 : 0)
        << ',' << num(f.score[j]) << '\n';
  write_file(args.out / "features.csv", csv.str());

  const auto windows = monthly_windows(ds, s.test_start, test_month_count(s));
  const auto reference = temporal_holdout(s.train, cfg.train.validation_fraction, cfg.seed).validation;
  const SimilaritySeries sim = representation_similarity_variance(state, reference, windows);
  std::ostringstream sc;
  sc << "window,cosine_mean_mal\n";
  for (std::size_t w = 0; w < windows.size(); ++w)
    sc << format_date(add_months(s.test_start, static_cast<int>(w))).substr(0, 7) << ','
       << num(sim.cosine[w]) << '\n';
  write_file(args.out / "similarity.csv", sc.str());
  info("cosine variance " + num(sim.variance) + ", FCS total " + num(f.total));
  finish("analyze", args.out, args.config, args.data, cfg.seed, {"features.csv", "similarity.csv"},
         cfg.provenance);
}

void cmd_continual(const ContinualArgs& args) {
  const ModelState state = load_checkpoint(args.model);
  RunConfig cfg = load_config(args.config, args.seed, state.seed);
  if (args.method) {
    cfg.method = parse_method(*args.method);
    cfg.provenance["method"] = "flag";
  }
  const TemporalDataset ds = read_dataset(args.data);
  const Split s = split_dataset(ds, cfg.train_months);
  const auto stream = monthly_windows(ds, s.test_start, test_month_count(s));
  const ContinualReport rep = run_continual(state, s.train, stream, cfg.method, cfg.train, cfg.continual);
  fs::create_directories(args.out);
  write_file(args.out / "continual_report.json", rep.to_json() + "\n");
  info(std::to_string(rep.update_count) + " updates, label cost " + std::to_string(rep.label_cost));
  finish("continual", args.out, args.config, args.data, cfg.seed, {"continual_report.json"},
         cfg.provenance);
}

void cmd_report(const ReportArgs& args) {
  if (args.runs.empty()) throw ConfigError("report needs at least one run directory");
  ordered_json all = json::array();
  for (const auto& dir : args.runs) {
    ordered_json row;
    row["run"] = dir.string();
    if (fs::exists(dir / "metrics.csv")) {
      std::istringstream in(read_text_file(dir / "metrics.csv"));
      std::string line;
      std::getline(in, line);
      if (line != kMetricsHeader) throw SchemaError(dir.string() + "/metrics.csv: unexpected header");
      std::vector<double> f1, fcs_total, cos;
      while (std::getline(in, line)) {
        std::vector<std::string> cells;
        std::stringstream ls(line);
        for (std::string c; std::getline(ls, c, ',');) cells.push_back(c);
        if (cells.size() != 6) throw SchemaError(dir.string() + "/metrics.csv: bad row '" + line + "'");
        if (cells[1] == "nan") continue;
        f1.push_back(std::stod(cells[1]));
        fcs_total.push_back(std::stod(cells[4]));
        if (cells[5] != "nan") cos.push_back(std::stod(cells[5]));
      }
      row["windows"] = f1.size();
      row["aut_macro_f1"] = f1.size() >= 2 ? json(aut(f1)) : json(nullptr);
      if (f1.size() >= 6) row["aut6_macro_f1"] = aut(std::span<const double>(f1).first(6));
      row["cosine_variance"] = variance(cos);
    }
    if (fs::exists(dir / "continual_report.json")) {
      const json c = json::parse(read_text_file(dir / "continual_report.json"));
      row["updates"] = c.at("update_count");
      row["first_update_month"] = c.at("first_update_month");
      row["label_cost"] = c.at("label_cost");
    }
    all.push_back(row);
  }
  const std::string text = all.dump(2) + "\n";
  std::cout << text;
  if (!args.out.empty()) {
    fs::create_directories(args.out);
    write_file(args.out / "report.json", text);
  }
}

int run(int argc, char** argv) {
  CLI::App app{"tif: temporal invariant training for drifting malware data"};
  app.require_subcommand(1);
  bool quiet_flag = false;
  app.add_flag("--quiet", quiet_flag, "suppress progress and warnings on stderr");

  std::optional<std::uint64_t> seed;
  auto common = [&](CLI::App* sub, fs::path& config, fs::path& out, bool config_required) {
    auto* c = sub->add_option("--config", config, "run config (JSON)");
    if (config_required) c->required();
    sub->add_option("--out", out, "output directory")->required();
    sub->add_option("--seed", seed, "overrides the config seed");
    sub->add_flag("--quiet", quiet_flag, "suppress progress and warnings on stderr");
  };

  GenerateArgs gen;
  auto* g = app.add_subcommand("generate", "write a synthetic drifting dataset");
  common(g, gen.config, gen.out, false);

  TrainArgs tr;
  auto* t = app.add_subcommand("train", "train a model on the training months");
  common(t, tr.config, tr.out, true);
  t->add_option("--data", tr.data, "dataset directory")->required();
  t->add_option("--method", tr.method, "tif or erm");
  t->add_option("--ablation", tr.ablation, "full, none or e.g. mpc1+iga");

  EvaluateArgs ev;
  auto* e = app.add_subcommand("evaluate", "per-month metrics on the test months");
  common(e, ev.config, ev.out, false);
  e->add_option("--model", ev.model, "checkpoint")->required();
  e->add_option("--data", ev.data, "dataset directory")->required();
  e->add_option("--windows", ev.windows, "monthly or monthly:<n>");

  AnalyzeArgs an;
  auto* a = app.add_subcommand("analyze", "feature diagnostics and representation similarity");
  common(a, an.config, an.out, false);
  a->add_option("--model", an.model, "checkpoint")->required();
  a->add_option("--data", an.data, "dataset directory")->required();

  ContinualArgs co;
  auto* c = app.add_subcommand("continual", "drift-triggered update loop over the test months");
  common(c, co.config, co.out, false);
  c->add_option("--model", co.model, "checkpoint")->required();
  c->add_option("--data", co.data, "dataset directory")->required();
  c->add_option("--method", co.method, "tif or erm");

  ReportArgs re;
  auto* r = app.add_subcommand("report", "summarise evaluate and continual outputs");
  r->add_option("runs", re.runs, "run directories")->required();
  r->add_option("--out", re.out, "also write report.json here");
  r->add_flag("--quiet", quiet_flag, "suppress progress and warnings on stderr");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int code = app.exit(err);
    return code == 0 ? 0 : 2;
  }
  set_quiet(quiet_flag);
  gen.seed = tr.seed = ev.seed = an.seed = co.seed = seed;

  auto fail = [](int code, const char* kind, const std::string& msg) {
    std::cerr << "tif: error: " << kind << ": " << msg << '\n';
    return code;
  };
  try {
    if (g->parsed()) cmd_generate(gen);
    else if (t->parsed()) cmd_train(tr);
    else if (e->parsed()) cmd_evaluate(ev);
    else if (a->parsed()) cmd_analyze(an);
    else if (c->parsed()) cmd_continual(co);
    else if (r->parsed()) cmd_report(re);
  } catch (const ConfigError& err) {
    return fail(2, "config", err.what());
  } catch (const SchemaError& err) {
    return fail(3, "schema", err.what());
  } catch (const ParseError& err) {
    return fail(3, "dataset", err.what());
  } catch (const NumericalError& err) {
    return fail(4, "numerical", "epoch " + std::to_string(err.epoch()) + ": " + err.what());
  } catch (const std::exception& err) {
    return fail(1, "internal", err.what());
  }
  return 0;
}

}  // namespace tif::cli
