#include "support.hpp"

#include <gtest/gtest.h>

using namespace mvr;

TEST(Adam, FirstStepIsSignTimesLearningRate) {
  AdamState<double> s(3, 0.01);
  VecX<double> p = VecX<double>::Zero(3);
  VecX<double> g(3);
  g << 2.0, -0.5, 1e-3;
  ASSERT_TRUE(adam_step(s, p, g));
  // m_hat = g, v_hat = g^2, so the step is lr * g / (|g| + eps)
  for (int i = 0; i < 3; ++i) EXPECT_NEAR(p[i], -0.01 * g[i] / (std::abs(g[i]) + 1e-8), 1e-15);
  EXPECT_EQ(s.step, 1);
}

TEST(Adam, ZeroGradientLeavesParameters) {
  AdamState<double> s(2, 0.1);
  VecX<double> p(2);
  p << 1.0, -2.0;
  for (int i = 0; i < 5; ++i) ASSERT_TRUE(adam_step(s, p, VecX<double>(VecX<double>::Zero(2))));
  EXPECT_EQ(p, Vec2<double>(1.0, -2.0));
}

TEST(Adam, MatchesTextbookRecurrence) {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> gauss;
  const int n = 7;
  AdamState<double> s(n, 3e-3, AdamHyper{0.8, 0.99, 1e-6});
  VecX<double> p = VecX<double>::Zero(n);
  std::vector<double> q(n, 0.0), m(n, 0.0), v(n, 0.0);
  for (int t = 1; t <= 100; ++t) {
    VecX<double> g(n);
    for (int i = 0; i < n; ++i) g[i] = gauss(rng) + 0.1 * q[i];
    ASSERT_TRUE(adam_step(s, p, g));
    for (int i = 0; i < n; ++i) {
      m[i] = 0.8 * m[i] + 0.2 * g[i];
      v[i] = 0.99 * v[i] + 0.01 * g[i] * g[i];
      const double mh = m[i] / (1 - std::pow(0.8, t)), vh = v[i] / (1 - std::pow(0.99, t));
      q[i] -= 3e-3 * mh / (std::sqrt(vh) + 1e-6);
    }
  }
  for (int i = 0; i < n; ++i) EXPECT_NEAR(p[i], q[i], 1e-10);
}

TEST(Adam, MinimizesQuadratic) {
  AdamState<double> s(1, 0.05);
  VecX<double> p = VecX<double>::Constant(1, 3.0);
  for (int i = 0; i < 2000; ++i) adam_step(s, p, VecX<double>(2.0 * (p.array() - 1.0)));
  EXPECT_NEAR(p[0], 1.0, 1e-3);
}

TEST(Adam, NonFiniteGradientRejectsGroup) {
  AdamState<float> s(6, 0.1f, {}, "vertices");
  std::vector<Vec3<float>> p(2, Vec3<float>::Ones());
  std::vector<Vec3<float>> g(2, Vec3<float>::Ones());
  g[1].y() = std::numeric_limits<float>::infinity();
  std::vector<std::string> warnings;
  const auto old = log::set_sink([&](const std::string& w) { warnings.push_back(w); });
  EXPECT_FALSE(adam_step(s, p, g));
  log::set_sink(old);
  EXPECT_EQ(s.step, 0);
  EXPECT_EQ(p[0], Vec3<float>::Ones());
  EXPECT_TRUE((s.m.array() == 0.0f).all());
  ASSERT_EQ(warnings.size(), 1u);
  EXPECT_NE(warnings[0].find("vertices"), std::string::npos);
}

TEST(Adam, SizeMismatchThrows) {
  AdamState<double> s(2, 0.1);
  VecX<double> p = VecX<double>::Zero(3);
  EXPECT_THROW(adam_step(s, p, VecX<double>(VecX<double>::Zero(3))), Error);
  s.reset(3);
  EXPECT_NO_THROW(adam_step(s, p, VecX<double>(VecX<double>::Zero(3))));
}

TEST(Adam, ResultDoesNotDependOnBufferAddress) {
  const int n = 3001;
  std::mt19937_64 rng(1);
  std::normal_distribution<float> g;
  std::vector<float> p0(n), g0(n);
  for (int i = 0; i < n; ++i) {
    p0[i] = g(rng);
    g0[i] = 1e-3f * g(rng);
  }
  alignas(64) static float params[n + 16];
  std::vector<float> first;
  for (int offset = 0; offset < 16; ++offset) {
    float* p = params + offset;
    std::copy(p0.begin(), p0.end(), p);
    AdamState<float> s(n, 1e-3);
    for (int k = 0; k < 3; ++k) ASSERT_TRUE(adam_step(s, p, g0.data(), n));
    const std::vector<float> out(p, p + n);
    if (offset == 0) first = out;
    EXPECT_EQ(out, first) << "offset " << offset;
  }
}
