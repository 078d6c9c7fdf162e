#include "support.hpp"

#include <gtest/gtest.h>

using namespace mvr;
using fixtures::rel_error;

namespace {

ShadeBatch<double> random_batch(int n, std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  ShadeBatch<double> b;
  b.x.resize(3, n);
  b.n.resize(3, n);
  b.v.resize(3, n);
  for (int i = 0; i < n; ++i) {
    b.x.col(i) = 0.4 * Vec3<double>(g(rng), g(rng), g(rng));
    b.n.col(i) = Vec3<double>(g(rng), g(rng), g(rng)).normalized();
    b.v.col(i) = Vec3<double>(g(rng), g(rng), g(rng)).normalized();
  }
  return b;
}

struct Variant {
  const char* name;
  EncodingKind kind;
  Activation activation;
};

const Variant kVariants[] = {{"pe_relu", EncodingKind::positional, Activation::relu},
                             {"gff_relu", EncodingKind::gaussian_fourier, Activation::relu},
                             {"none_relu", EncodingKind::none, Activation::relu},
                             {"pe_sine", EncodingKind::positional, Activation::sine}};

ShaderParams<double> variant_params(const Variant& v, std::uint64_t seed) {
  ShaderArchitecture a = fixtures::tiny_shader();
  a.zero_final = false;
  a.activation = v.activation;
  a.siren_omega = 3.0;
  EncodingConfig e;
  e.kind = v.kind;
  e.gff_features = 8;
  return init_params<double>(a, e, seed);
}

}  // namespace

TEST(Encoding, PositionalLayout) {
  EncodingConfig e;
  e.octaves = 4;
  EXPECT_EQ(e.dimension(), 27);
  const VecX<double> z = encode(Vec3<double>(Vec3<double>::Zero()), e);
  ASSERT_EQ(z.size(), 27);
  for (int j = 0; j < 4; ++j)
    for (int k = 0; k < 3; ++k) {
      EXPECT_EQ(z[3 + 6 * j + k], 0.0);      // sin 0
      EXPECT_EQ(z[3 + 6 * j + 3 + k], 1.0);  // cos 0
    }
  const Vec3<double> x(0.1, -0.2, 0.3);
  const VecX<double> ex = encode(x, e);
  for (int j = 0; j < 4; ++j)
    for (int k = 0; k < 3; ++k) {
      EXPECT_NEAR(ex[3 + 6 * j + k], std::sin(std::pow(2.0, j) * kPi * x[k]), 1e-15);
      EXPECT_NEAR(ex[3 + 6 * j + 3 + k], std::cos(std::pow(2.0, j) * kPi * x[k]), 1e-15);
    }
  e.passthrough = false;
  EXPECT_EQ(e.dimension(), 24);
}

TEST(Encoding, NoneAndGaussianFourier) {
  EncodingConfig none;
  none.kind = EncodingKind::none;
  EXPECT_EQ(encode(Vec3<double>(1, 2, 3), none), Vec3<double>(1, 2, 3));

  EncodingConfig g;
  g.kind = EncodingKind::gaussian_fourier;
  g.gff_features = 5;
  g.gff_seed = 3;
  EXPECT_THROW(g.validate(), Error);
  g.finalize();
  g.validate();
  EXPECT_EQ(g.dimension(), 13);
  EncodingConfig again = g;
  again.finalize();
  EXPECT_EQ(again.gff_matrix, g.gff_matrix);
  const Vec3<double> x(0.3, 0.1, -0.5);
  const VecX<double> ex = encode(x, g);
  for (int r = 0; r < 5; ++r) {
    const double arg = 2.0 * kPi * g.gff_matrix.row(r).dot(x);
    EXPECT_NEAR(ex[3 + r], std::sin(arg), 1e-14);
    EXPECT_NEAR(ex[8 + r], std::cos(arg), 1e-14);
  }
}

TEST(Encoding, GaussianMatrixStatistics) {
  EncodingConfig g;
  g.kind = EncodingKind::gaussian_fourier;
  g.gff_features = 4000;
  g.gff_scale = 2.0;
  g.finalize();
  const double mean = g.gff_matrix.mean();
  const double var = (g.gff_matrix.array() - mean).square().mean();
  EXPECT_NEAR(mean, 0.0, 0.06);
  EXPECT_NEAR(std::sqrt(var), 2.0, 0.05);
}

TEST(Encoding, BackwardMatchesFiniteDifferences) {
  for (EncodingKind kind : {EncodingKind::positional, EncodingKind::gaussian_fourier, EncodingKind::none}) {
    EncodingConfig e;
    e.kind = kind;
    e.gff_features = 6;
    e.finalize();
    std::mt19937_64 rng(2);
    MatX<double> X = MatX<double>::Random(3, 4) * 0.5;
    MatX<double> up = MatX<double>::Random(e.dimension(), 4);
    const MatX<double> G = encode_backward(X, encode(X, e), up, e);
    for (int i = 0; i < 12; ++i) {
      const double fd = fixtures::central_difference(
          [&](double t) {
            MatX<double> Y = X;
            Y.data()[i] += t;
            return (encode(Y, e).array() * up.array()).sum();
          },
          1e-6);
      EXPECT_LT(rel_error(G.data()[i], fd), 1e-7) << to_string(kind) << " entry " << i;
    }
  }
}

TEST(Encoding, ParseNames) {
  EXPECT_EQ(parse_encoding_kind("pe"), EncodingKind::positional);
  EXPECT_EQ(parse_encoding_kind("gff"), EncodingKind::gaussian_fourier);
  EXPECT_EQ(parse_encoding_kind("none"), EncodingKind::none);
  EXPECT_THROW(parse_encoding_kind("fourier"), Error);
}

TEST(Shader, LayoutSizes) {
  ShaderArchitecture a;  // 3 x 256 positional layers, 2 x 256 head layers
  const auto layout = shader_layout(a, 27);
  const std::size_t expected = (27 * 256 + 256) + 2 * (256 * 256 + 256) + (262 * 256 + 256) + (256 * 256 + 256) + (256 * 3 + 3);
  EXPECT_EQ(layout.size, expected);
  EXPECT_EQ(layout.h.size(), 3u);
  EXPECT_EQ(layout.c.size(), 3u);
  EXPECT_EQ(layout.c[0].in, 262);
}

TEST(Shader, ZeroFinalLayerGivesHalfGray) {
  const auto p = init_params<double>(fixtures::tiny_shader(), EncodingConfig{}, 4);
  std::mt19937_64 rng(1);
  const auto rgb = shade(p, random_batch(10, rng));
  EXPECT_TRUE((rgb.array() == 0.5).all());
}

TEST(Shader, InitBounds) {
  ShaderArchitecture a = fixtures::tiny_shader();
  a.zero_final = false;
  const auto p = init_params<double>(a, EncodingConfig{}, 9);
  for (const auto* list : {&p.layout.h, &p.layout.c})
    for (std::size_t l = 0; l < list->size(); ++l) {
      const auto& s = (*list)[l];
      const bool last = list == &p.layout.c && l + 1 == list->size();
      const double bound = last ? std::sqrt(3.0 / s.in) : std::sqrt(6.0 / s.in);
      EXPECT_LE(p.weight(s).cwiseAbs().maxCoeff(), bound);
      EXPECT_GT(p.weight(s).cwiseAbs().maxCoeff(), 0.5 * bound);
      EXPECT_EQ(p.bias(s).cwiseAbs().maxCoeff(), 0.0);
    }
  const auto again = init_params<double>(a, EncodingConfig{}, 9);
  EXPECT_EQ(again.theta, p.theta);
  EXPECT_NE(init_params<double>(a, EncodingConfig{}, 10).theta, p.theta);
}

TEST(Shader, ViewDependence) {
  ShaderArchitecture a = fixtures::tiny_shader();
  a.zero_final = false;
  const auto p = init_params<double>(a, EncodingConfig{}, 2);
  std::mt19937_64 rng(3);
  auto b = random_batch(1, rng);
  const auto before = shade(p, b);
  b.v.col(0) = -b.v.col(0);
  EXPECT_GT((shade(p, b) - before).norm(), 1e-6);
}

TEST(Shader, BackwardMatchesFiniteDifferences) {
  for (const auto& variant : kVariants) {
    const auto p = variant_params(variant, 7);
    std::mt19937_64 rng(3);
    const auto b = random_batch(5, rng);
    MatX<double> up(3, 5);
    std::normal_distribution<double> g;
    for (int i = 0; i < 15; ++i) up.data()[i] = g(rng);
    ShadeCache<double> cache;
    shade_forward(p, b, cache);
    const auto grads = shade_backward(p, b, cache, up);
    auto loss = [&](const ShaderParams<double>& pp, const ShadeBatch<double>& bb) { return (shade(pp, bb).array() * up.array()).sum(); };

    // theta along random directions
    for (int k = 0; k < 5; ++k) {
      VecX<double> dir(p.theta.size());
      for (Eigen::Index i = 0; i < dir.size(); ++i) dir[i] = g(rng);
      const double fd = fixtures::central_difference(
          [&](double t) {
            auto q = p;
            q.theta += t * dir;
            return loss(q, b);
          },
          1e-5);
      EXPECT_LT(rel_error(grads.theta.dot(dir), fd), 1e-5) << variant.name;
    }
    // every input entry
    for (int which = 0; which < 3; ++which)
      for (int i = 0; i < 15; ++i) {
        const double fd = fixtures::central_difference(
            [&](double t) {
              auto bb = b;
              (which == 0 ? bb.x : which == 1 ? bb.n : bb.v).data()[i] += t;
              return loss(p, bb);
            },
            1e-5);
        const double an = (which == 0 ? grads.x : which == 1 ? grads.n : grads.v).data()[i];
        EXPECT_LT(std::abs(an - fd), 1e-5 * std::max(1.0, std::abs(fd))) << variant.name << " input " << which;
      }
  }
}

TEST(Shader, NonFiniteInputNamesTheColumn) {
  const auto p = init_params<double>(fixtures::tiny_shader(), EncodingConfig{}, 1);
  std::mt19937_64 rng(3);
  auto b = random_batch(4, rng);
  b.x(1, 2) = std::nan("");
  try {
    shade(p, b);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::non_finite);
    EXPECT_NE(std::string(e.what()).find("2"), std::string::npos);
  }
}

TEST(Shader, HeadRejectsWrongFeatureSize) {
  const auto p = init_params<double>(fixtures::tiny_shader(), EncodingConfig{}, 1);
  const MatX<double> F = MatX<double>::Zero(5, 2), N = MatX<double>::Zero(3, 2);
  EXPECT_THROW(shade_head(p, F, N, N), Error);
}

TEST(Shader, FeaturesThenHeadEqualsShade) {
  ShaderArchitecture a = fixtures::tiny_shader();
  a.zero_final = false;
  const auto p = init_params<double>(a, EncodingConfig{}, 5);
  std::mt19937_64 rng(8);
  const auto b = random_batch(6, rng);
  const MatX<double> split = shade_head(p, extract_positional_features(p, b.x), b.n, b.v);
  EXPECT_EQ(split, shade(p, b));
}
