#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>

#include "oracles.hpp"
#include "support.hpp"
#include "tif/errors.hpp"
#include "tif/log.hpp"
#include "tif/model.hpp"
#include "tif/trainer.hpp"

using namespace tif;

namespace {

double norm(std::span<const double> v) {
  double s = 0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

/// Numerical rank by Gram-Schmidt with a relative tolerance.
std::size_t numerical_rank(const Matrix& m) {
  std::vector<std::vector<double>> basis;
  for (std::size_t i = 0; i < m.rows; ++i) {
    std::vector<double> v(m.row(i).begin(), m.row(i).end());
    for (const auto& b : basis) {
      double d = 0;
      for (std::size_t t = 0; t < v.size(); ++t) d += v[t] * b[t];
      for (std::size_t t = 0; t < v.size(); ++t) v[t] -= d * b[t];
    }
    const double n = norm(v);
    if (n > 1e-8) {
      for (auto& x : v) x /= n;
      basis.push_back(v);
    }
  }
  return basis.size();
}

Architecture default_arch(std::size_t dim) {
  Architecture a;
  a.dim = dim;
  return a;
}

}  // namespace

TEST(Model, EmbeddingsHaveUnitNorm) {
  const auto s = init_model(default_arch(300), 1);
  Rng rng = make_rng(1, 1);
  const auto batch = fixtures::random_batch(rng, 300, 64, 0.05);
  ForwardCache c;
  forward(s, batch, c);
  for (std::size_t i = 0; i < 64; ++i) EXPECT_NEAR(norm(c.embedding.row(i)), 1.0, 1e-6);
  EXPECT_GT(numerical_rank(c.embedding), 1u);
}

TEST(Model, EmbedMatchesBatchForwardAndIsDeterministic) {
  const auto s = init_model(default_arch(50), 2);
  const std::vector<std::uint32_t> x{1, 7, 30};
  const auto e1 = embed(s, x), e2 = embed(s, x);
  EXPECT_EQ(e1, e2);
  SparseBatch b(50);
  b.add_row(x);
  ForwardCache c;
  forward(s, b, c);
  for (std::size_t t = 0; t < e1.size(); ++t) EXPECT_DOUBLE_EQ(e1[t], c.embedding(0, t));
  EXPECT_DOUBLE_EQ(logit(s, x), c.logits[0]);
}

TEST(Model, ZeroInputUsesEpsilonGuard) {
  const auto s = init_model(fixtures::tiny_arch(), 3);
  ModelState z = s;
  const ParamLayout L(z.arch);
  for (std::size_t l = 0; l < L.encoder_layers(); ++l)
    for (auto& b : z.block(L.encoder_bias(l))) b = -1.0;
  const auto e = embed(z, std::vector<std::uint32_t>{});
  for (double v : e) EXPECT_EQ(v, 0.0);
  EXPECT_TRUE(std::isfinite(logit(z, std::vector<std::uint32_t>{})));
}

TEST(Model, ZeroHeadGivesHalfProbability) {
  auto s = init_model(fixtures::tiny_arch(), 4);
  const ParamLayout L(s.arch);
  for (auto& w : s.block(L.head_out_weight())) w = 0.0;
  for (auto& w : s.block(L.head_out_bias())) w = 0.0;
  const double z = logit(s, std::vector<std::uint32_t>{0, 3});
  EXPECT_EQ(z, 0.0);
  EXPECT_EQ(sigmoid(z), 0.5);
  EXPECT_EQ(predicted_label(z), Label::malware);
}

TEST(Model, OutputBiasShiftsEveryLogit) {
  auto s = init_model(fixtures::tiny_arch(), 5);
  Rng rng = make_rng(5, 0);
  const auto batch = fixtures::random_batch(rng, 12, 10);
  ForwardCache before, after;
  forward(s, batch, before);
  const ParamLayout L(s.arch);
  s.block(L.head_out_bias())[0] += 0.75;
  forward(s, batch, after);
  for (std::size_t i = 0; i < 10; ++i) EXPECT_NEAR(after.logits[i] - before.logits[i], 0.75, 1e-12);
}

TEST(Model, InitShapesSeedsAndProxyNorms) {
  const auto a = init_model(default_arch(100), 9);
  const auto b = init_model(default_arch(100), 9);
  const auto c = init_model(default_arch(100), 10);
  EXPECT_EQ(a, b);
  EXPECT_NE(a.params, c.params);
  const ParamLayout L(a.arch);
  for (int cls = 0; cls < 2; ++cls) {
    EXPECT_EQ(L.proxies(cls).size, 4u * 200u);
    for (std::size_t k = 0; k < 4; ++k) EXPECT_NEAR(norm(a.proxy(cls, k)), 1.0, 1e-12);
  }
}

TEST(Model, WarnsWhenProxiesReachEmbeddingDim) {
  drain_warnings();
  set_quiet(true);
  init_model(fixtures::tiny_arch(12, 4, 4), 1);
  set_quiet(false);
  EXPECT_EQ(drain_warnings().size(), 1u);
}

TEST(Model, ProjectionRestoresUnitProxies) {
  auto s = init_model(fixtures::tiny_arch(), 6);
  const ParamLayout L(s.arch);
  for (auto& v : s.block(L.all_proxies())) v *= 3.0;
  project_proxies(s);
  for (int cls = 0; cls < 2; ++cls)
    for (std::size_t k = 0; k < 2; ++k) EXPECT_NEAR(norm(s.proxy(cls, k)), 1.0, 1e-12);
}

TEST(Model, InputGradientMatchesFiniteDifference) {
  const auto s = init_model(fixtures::tiny_arch(), 7);
  SparseBatch b(12);
  const std::vector<std::uint32_t> idx{1, 4, 9};
  const std::vector<double> vals{0.3, 0.8, 0.55};
  b.add_row(idx, vals);
  ForwardCache c;
  forward(s, b, c);
  std::vector<double> ig;
  const std::vector<double> one{1.0};
  backward(s, b, c, one, nullptr, {}, &ig);
  ASSERT_EQ(ig.size(), 3u);
  for (std::size_t j = 0; j < 3; ++j) {
    auto at = [&](double d) {
      auto v = vals;
      v[j] += d;
      SparseBatch p(12);
      p.add_row(idx, v);
      ForwardCache cc;
      forward(s, p, cc);
      return cc.logits[0];
    };
    EXPECT_NEAR(ig[j], (at(1e-6) - at(-1e-6)) / 2e-6, 1e-6);
  }
}

TEST(Model, CheckpointRoundTripIsBitExact) {
  const auto s = init_model(default_arch(77), 11);
  const auto path = std::filesystem::temp_directory_path() / "tif_ckpt.bin";
  save_checkpoint(s, path);
  const auto back = load_checkpoint(path);
  EXPECT_EQ(back, s);
  std::filesystem::resize_file(path, 100);
  EXPECT_ANY_THROW(load_checkpoint(path));
}

TEST(Model, DimensionMismatchIsSchemaError) {
  const auto s = init_model(fixtures::tiny_arch(), 1);
  SparseBatch b(13);
  b.add_row(std::vector<std::uint32_t>{0});
  ForwardCache c;
  EXPECT_THROW(forward(s, b, c), SchemaError);
}

TEST(Model, SeparableToyDataIsFitExactly) {
  // two informative features; label = feature 0 present
  std::vector<Sample> samples;
  Rng rng = make_rng(3, 3);
  for (int i = 0; i < 200; ++i) {
    Sample s;
    s.id = "t" + std::to_string(1000 + i);
    s.timestamp = add_months(parse_date("2014-01-01"), i % 4);
    const bool mal = uniform01(rng) < 0.5;
    s.label = mal ? Label::malware : Label::benign;
    if (mal) s.family = "f";
    s.features = mal ? std::vector<std::uint32_t>{0} : std::vector<std::uint32_t>{1};
    samples.push_back(s);
  }
  const TemporalDataset ds(2, samples);
  TrainConfig cfg;
  cfg.arch = fixtures::tiny_arch(2);
  cfg.total_epochs = 30;
  cfg.batch_size_per_env = 8;
  const auto r = train_erm(ds, cfg);
  const auto z = predict_logits(r.state, ds);
  for (std::size_t i = 0; i < ds.size(); ++i) EXPECT_EQ(predicted_label(z[i]), ds[i].label);
}
