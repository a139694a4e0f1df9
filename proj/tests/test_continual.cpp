#include <gtest/gtest.h>

#include "support.hpp"
#include "tif/continual.hpp"
#include "tif/datagen.hpp"
#include "tif/errors.hpp"
#include "tif/log.hpp"
#include "tif/metrics.hpp"

using namespace tif;

namespace {

struct Setup {
  GeneratorSpec spec;
  TemporalDataset data;
  TemporalDataset train;
  std::vector<TemporalDataset> stream;
  TrainConfig cfg;
  ModelState initial;
};

Setup make_setup(std::uint64_t seed = 2) {
  Setup s{};
  s.spec = generator_spec_from_json(R"({"seed": )" + std::to_string(seed) +
                                    R"(, "n_train_months": 4, "n_test_months": 4, "samples_per_month": 150})");
  s.data = generate(s.spec);
  s.train = s.data.slice(s.spec.start, s.spec.test_start());
  s.stream = monthly_windows(s.data, s.spec.test_start(), s.spec.n_test_months);
  s.cfg.arch.layer_widths = {16, 16};
  s.cfg.arch.head_hidden = 8;
  s.cfg.total_epochs = 2;
  s.cfg.seed = seed;
  s.initial = fit_erm(s.train, s.cfg).state;
  return s;
}

const Setup& shared() {
  static const Setup s = make_setup();
  return s;
}

}  // namespace

TEST(Continual, LowestConfidence) {
  const std::vector<double> z{3.0, -0.1, 0.2, -5.0, 0.1, 0.0};
  EXPECT_EQ(lowest_confidence(z, 3), (std::vector<std::size_t>{1, 4, 5}));
  EXPECT_EQ(lowest_confidence(z, 1), (std::vector<std::size_t>{5}));
  EXPECT_EQ(lowest_confidence(z, 10).size(), z.size());
  // ties keep the earlier position
  const std::vector<double> t{0.5, -0.5, 0.5};
  EXPECT_EQ(lowest_confidence(t, 2), (std::vector<std::size_t>{0, 1}));
}

TEST(Continual, ZeroThresholdNeverUpdates) {
  const auto& s = shared();
  ContinualConfig c;
  c.f1_threshold = 0.0;
  const auto r = run_continual(s.initial, s.train, s.stream, Method::tif, s.cfg, c);
  EXPECT_EQ(r.update_count, 0u);
  EXPECT_EQ(r.first_update_month, -1);
  EXPECT_EQ(r.label_cost, 0u);
  ASSERT_EQ(r.months.size(), s.stream.size());
  for (std::size_t m = 0; m < r.months.size(); ++m) {
    EXPECT_FALSE(r.months[m].updated);
    EXPECT_EQ(r.months[m].window, format_date(s.stream[m].t_min()).substr(0, 7));
  }
}

TEST(Continual, FullThresholdUpdatesUntilCap) {
  const auto& s = shared();
  ContinualConfig c;
  c.f1_threshold = 1.0;
  c.budget_per_update = 20;
  c.max_updates = 3;
  c.retrain_epochs = 1;
  for (Method m : {Method::tif, Method::erm}) {
    const auto r = run_continual(s.initial, s.train, s.stream, m, s.cfg, c);
    EXPECT_EQ(r.update_count, 3u);
    EXPECT_EQ(r.first_update_month, 0);
    EXPECT_EQ(r.label_cost, r.update_count * c.budget_per_update);
    std::size_t cost = 0;
    for (std::size_t k = 0; k < r.months.size(); ++k) {
      EXPECT_EQ(r.months[k].updated, k < 3);
      cost += r.months[k].labeled;
      EXPECT_EQ(r.months[k].cumulative_cost, cost);
    }
  }
}

TEST(Continual, OversizedBudgetTakesWholeMonth) {
  const auto& s = shared();
  ContinualConfig c;
  c.f1_threshold = 1.0;
  c.budget_per_update = 100000;
  c.max_updates = 1;
  c.retrain_epochs = 1;
  drain_warnings();
  const auto r = run_continual(s.initial, s.train, s.stream, Method::erm, s.cfg, c);
  EXPECT_EQ(r.months[0].labeled, s.stream[0].size());
  EXPECT_EQ(r.label_cost, s.stream[0].size());
  ASSERT_FALSE(r.warnings.empty());
  EXPECT_NE(r.warnings[0].find("budget"), std::string::npos);
}

TEST(Continual, Deterministic) {
  const auto& s = shared();
  ContinualConfig c;
  c.f1_threshold = 0.97;
  c.budget_per_update = 30;
  c.retrain_epochs = 1;
  c.retrain_mode = RetrainMode::stage2_only;
  const auto a = run_continual(s.initial, s.train, s.stream, Method::tif, s.cfg, c);
  const auto b = run_continual(s.initial, s.train, s.stream, Method::tif, s.cfg, c);
  EXPECT_EQ(a.to_json(), b.to_json());
}

TEST(Continual, StreamOrderingChecked) {
  const auto& s = shared();
  ContinualConfig c;
  std::vector<TemporalDataset> reversed(s.stream.rbegin(), s.stream.rend());
  EXPECT_THROW(run_continual(s.initial, s.train, reversed, Method::erm, s.cfg, c), ConfigError);
  const std::vector<TemporalDataset> overlapping{s.train};
  EXPECT_THROW(run_continual(s.initial, s.train, overlapping, Method::erm, s.cfg, c), ConfigError);
}

TEST(Continual, ConfigAndNames) {
  ContinualConfig c;
  c.f1_threshold = 1.5;
  EXPECT_THROW(c.validate(), ConfigError);
  c.f1_threshold = 0.9;
  c.budget_per_update = 0;
  EXPECT_THROW(c.validate(), ConfigError);
  EXPECT_EQ(parse_retrain_mode(to_string(RetrainMode::stage2_only)), RetrainMode::stage2_only);
  EXPECT_EQ(parse_method("erm"), Method::erm);
  EXPECT_THROW(parse_method("svm"), ConfigError);
  EXPECT_TRUE(F1BelowThreshold(0.9).fire(0.89));
  EXPECT_FALSE(F1BelowThreshold(0.9).fire(0.9));
}
