#include <gtest/gtest.h>

#include <cmath>

#include "tif/errors.hpp"
#include "tif/optimizer.hpp"

using namespace tif;

TEST(Optimizer, AdamMatchesClosedForm) {
  Optimizer opt(OptimizerKind::adam, 0.1, 2);
  std::vector<double> p{1.0, -2.0};
  const std::vector<double> g{0.5, -4.0};
  opt.step(p, g);
  // first step of Adam moves every coordinate by lr * sign(g) (up to eps)
  EXPECT_NEAR(p[0], 1.0 - 0.1 * 0.5 / (0.5 + 1e-8), 1e-12);
  EXPECT_NEAR(p[1], -2.0 + 0.1 * 4.0 / (4.0 + 1e-8), 1e-12);
  EXPECT_EQ(opt.steps(), 1);

  // second step against a hand-rolled reference
  double m = 0.1 * 0.5, v = 0.001 * 0.25, q = p[0];
  const double g2 = 0.2;
  opt.step(p, std::vector<double>{g2, 0.0});
  m = 0.9 * m + 0.1 * g2;
  v = 0.999 * v + 0.001 * g2 * g2;
  const double mh = m / (1 - 0.81), vh = v / (1 - 0.999 * 0.999);
  EXPECT_NEAR(p[0], q - 0.1 * mh / (std::sqrt(vh) + 1e-8), 1e-12);
}

TEST(Optimizer, ResetZeroesState) {
  Optimizer opt(OptimizerKind::adam, 0.01, 3);
  std::vector<double> p(3, 1.0);
  opt.step(p, std::vector<double>{1, 2, 3});
  opt.reset();
  EXPECT_EQ(opt.steps(), 0);
  for (double x : opt.first_moment()) EXPECT_EQ(x, 0.0);
  for (double x : opt.second_moment()) EXPECT_EQ(x, 0.0);
  // after a reset the next step behaves like a first step again
  std::vector<double> q(3, 1.0);
  Optimizer fresh(OptimizerKind::adam, 0.01, 3);
  std::vector<double> p2 = p;
  opt.step(p2, std::vector<double>{0.3, -0.3, 1});
  fresh.step(q, std::vector<double>{0.3, -0.3, 1});
  for (int i = 0; i < 3; ++i) EXPECT_DOUBLE_EQ(p2[i] - p[i], q[i] - 1.0);
}

TEST(Optimizer, SgdStep) {
  Optimizer opt(OptimizerKind::sgd, 0.5, 2);
  std::vector<double> p{1.0, 1.0};
  opt.step(p, std::vector<double>{2.0, -1.0});
  EXPECT_EQ(p, (std::vector<double>{0.0, 1.5}));
}

TEST(Optimizer, Parse) {
  EXPECT_EQ(parse_optimizer("adam"), OptimizerKind::adam);
  EXPECT_EQ(parse_optimizer("sgd"), OptimizerKind::sgd);
  EXPECT_THROW(parse_optimizer("rmsprop"), ConfigError);
}
