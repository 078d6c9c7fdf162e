#include "support.hpp"

#include <gtest/gtest.h>

using namespace mvr;
using fixtures::rel_error;

namespace {

View<double> flat_view(int w, int h, float mask_value) {
  View<double> v;
  v.camera.K = intrinsics(30.0, w, h);
  v.camera.width = w;
  v.camera.height = h;
  v.image = Image(w, h, 3, 0.0f);
  v.mask = Image(w, h, 1, mask_value);
  return v;
}

LossWeights only(double shading, double silhouette, double laplacian, double normal) {
  LossWeights w;
  w.shading = shading;
  w.silhouette = silhouette;
  w.laplacian = laplacian;
  w.normal = normal;
  return w;
}

ShaderParams<double> live_shader(std::uint64_t seed) {
  ShaderArchitecture a = fixtures::tiny_shader();
  a.zero_final = false;
  return init_params<double>(a, EncodingConfig{}, seed);
}

}  // namespace

TEST(SamplePixels, CountOrderAndDeterminism) {
  std::vector<int> tri(200, -1);
  Image mask(20, 10, 1, 0.0f);
  for (int p = 0; p < 150; ++p) tri[p] = 0;
  for (int p = 50; p < 200; ++p) mask.data[p] = 1.0f;  // 100 eligible: 50..149
  std::mt19937_64 a(5), b(5), c(6);
  const auto s = sample_pixels(tri, mask, 0.75, a);
  ASSERT_EQ(s.size(), 75u);
  EXPECT_TRUE(std::is_sorted(s.begin(), s.end()));
  EXPECT_EQ(std::adjacent_find(s.begin(), s.end()), s.end());
  for (auto p : s) {
    EXPECT_GE(p, 50u);
    EXPECT_LT(p, 150u);
  }
  EXPECT_EQ(sample_pixels(tri, mask, 0.75, b), s);
  EXPECT_NE(sample_pixels(tri, mask, 0.75, c), s);
  std::mt19937_64 d(0);
  EXPECT_EQ(sample_pixels(tri, mask, 1.0, d).size(), 100u);
  EXPECT_THROW(sample_pixels(tri, mask, 0.0, d), Error);
  EXPECT_THROW(sample_pixels(tri, mask, 1.5, d), Error);
}

TEST(SamplePixels, RoundsUpWithoutFloatingPointDrift) {
  std::vector<int> tri(10, 0);
  Image mask(10, 1, 1, 1.0f);
  std::mt19937_64 rng(1);
  EXPECT_EQ(sample_pixels(tri, mask, 0.3, rng).size(), 3u);
  EXPECT_EQ(sample_pixels(tri, mask, 0.31, rng).size(), 4u);
  EXPECT_EQ(sample_pixels(tri, mask, 0.01, rng).size(), 1u);
}

TEST(Objective, SilhouetteHalfFrame) {
  for (float input : {0.0f, 1.0f}) {
    View<double> view = flat_view(32, 24, input);
    const double W = 32, H = 24;
    Mesh<double> m;
    m.vertices = {unproject(view.camera, Vec2<double>(16, -10 * H), 1.0), unproject(view.camera, Vec2<double>(16, 10 * H), 1.0),
                  unproject(view.camera, Vec2<double>(-10 * W, 0.5 * H), 1.0)};
    m.faces = {{0, 1, 2}};
    const auto cache = build_connectivity(m);
    std::mt19937_64 rng(0);
    std::vector<ViewFrame<double>> frames{prepare_view(m, cache, view, 1.0, rng, false)};
    const auto shader = init_params<double>(fixtures::tiny_shader(), EncodingConfig{}, 0);
    const auto r = evaluate_objective(m, cache, shader, frames, only(0, 2.0, 0, 0));
    EXPECT_NEAR(r.terms.silhouette, 2.0 * 0.5, 1e-9);
  }
}

TEST(Objective, SilhouetteFullMismatchIsLambda) {
  View<double> view = flat_view(16, 16, 0.0f);
  Mesh<double> m;
  m.vertices = {unproject(view.camera, Vec2<double>(-100, -100), 1.0), unproject(view.camera, Vec2<double>(300, -100), 1.0),
                unproject(view.camera, Vec2<double>(-100, 300), 1.0)};
  m.faces = {{0, 2, 1}};
  const auto cache = build_connectivity(m);
  std::mt19937_64 rng(0);
  std::vector<ViewFrame<double>> frames{prepare_view(m, cache, view, 1.0, rng, false)};
  const auto shader = init_params<double>(fixtures::tiny_shader(), EncodingConfig{}, 0);
  EXPECT_NEAR(evaluate_objective(m, cache, shader, frames, only(0, 3.0, 0, 0)).terms.silhouette, 3.0, 1e-12);
}

TEST(Objective, ShadingTermMatchesDirectSum) {
  const auto& scene = fixtures::small_sphere_scene();
  const auto m = fixtures::jittered_sphere(2, 0.5, 0.01, 1);
  const auto cache = build_connectivity(m);
  const auto shader = live_shader(3);
  std::mt19937_64 rng(2);
  std::vector<ViewFrame<double>> frames{prepare_view(m, cache, scene.views[0], 0.5, rng)};
  const auto r = evaluate_objective(m, cache, shader, frames, only(1.5, 0, 0, 0));

  const auto& f = frames[0];
  const auto attrs = interpolate_pixels(m, vertex_normals(m).normals, scene.views[0].camera, f.samples, f.visibility.triangle);
  double sum = 0.0;
  for (std::size_t i = 0; i < f.samples.size(); ++i) {
    ShadeBatch<double> b;
    b.x = attrs.position[i];
    b.n = attrs.normal[i];
    b.v = attrs.view_dir[i];
    const MatX<double> rgb = shade(shader, b);
    for (int c = 0; c < 3; ++c)
      sum += std::abs(f.silhouette.mask[f.samples[i]] * rgb(c, 0) - scene.views[0].image.data[3 * f.samples[i] + c]);
  }
  EXPECT_NEAR(r.terms.shading, 1.5 * sum / (3.0 * double(f.samples.size())), 1e-12);
  EXPECT_EQ(r.shaded_pixels, f.samples.size());
}

TEST(Objective, AppearanceAveragedGeometryOnce) {
  const auto& scene = fixtures::small_sphere_scene();
  const auto m = fixtures::jittered_sphere(2, 0.5, 0.01, 1);
  const auto cache = build_connectivity(m);
  const auto shader = live_shader(3);
  std::mt19937_64 rng(2);
  const auto frame = prepare_view(m, cache, scene.views[1], 0.75, rng);
  const LossWeights w;
  const auto one = evaluate_objective(m, cache, shader, std::vector<ViewFrame<double>>{frame}, w);
  const auto two = evaluate_objective(m, cache, shader, std::vector<ViewFrame<double>>{frame, frame}, w);
  EXPECT_NEAR(two.terms.shading, one.terms.shading, 1e-12);
  EXPECT_NEAR(two.terms.silhouette, one.terms.silhouette, 1e-12);
  EXPECT_EQ(two.terms.laplacian, one.terms.laplacian);
  EXPECT_EQ(two.terms.normal, one.terms.normal);
  EXPECT_NEAR(one.terms.laplacian, 40.0 * laplacian_loss(m, cache).value, 1e-15);
  for (std::size_t i = 0; i < m.num_vertices(); ++i) EXPECT_LT((two.grad_vertices[i] - one.grad_vertices[i]).norm(), 1e-10);
}

TEST(Objective, GradientMatchesFiniteDifferences) {
  const auto& scene = fixtures::small_sphere_scene();
  for (std::uint64_t seed = 0; seed < 4; ++seed) {
    const auto m = fixtures::jittered_sphere(2, 0.48, 0.01, seed);
    const auto cache = build_connectivity(m);
    const auto shader = live_shader(seed);
    std::mt19937_64 rng(seed);
    std::vector<ViewFrame<double>> frames;
    for (int v : {0, 3}) frames.push_back(prepare_view(m, cache, scene.views[v], 0.75, rng));
    const LossWeights w;
    const auto r = evaluate_objective(m, cache, shader, frames, w);

    const auto dir = fixtures::random_field(m.num_vertices(), rng, 1e-2);
    const double fd_v = fixtures::central_difference(
        [&](double t) { return evaluate_objective(fixtures::displaced(m, dir, t), cache, shader, frames, w, false).terms.total(); },
        1e-6);
    EXPECT_LT(rel_error(fixtures::dot(r.grad_vertices, dir), fd_v), 1e-3) << "vertices, seed " << seed;

    VecX<double> tdir = VecX<double>::Random(shader.theta.size());
    const double fd_t = fixtures::central_difference(
        [&](double t) {
          auto s = shader;
          s.theta += t * tdir;
          return evaluate_objective(m, cache, s, frames, w, false).terms.total();
        },
        1e-6);
    EXPECT_LT(rel_error(r.grad_theta.dot(tdir), fd_t), 1e-3) << "theta, seed " << seed;
  }
}

TEST(Objective, DisjointMasksSkipShadingWithWarning) {
  auto view = fixtures::small_sphere_scene().views[0];
  std::fill(view.mask.data.begin(), view.mask.data.end(), 0.0f);
  const auto m = icosphere<double>(2, 0.5);
  const auto cache = build_connectivity(m);
  std::mt19937_64 rng(1);
  std::vector<ViewFrame<double>> frames{prepare_view(m, cache, view, 0.75, rng)};
  std::vector<std::string> warnings;
  const auto old = log::set_sink([&](const std::string& w) { warnings.push_back(w); });
  const auto r = evaluate_objective(m, cache, live_shader(0), frames, LossWeights{});
  log::set_sink(old);
  EXPECT_EQ(r.terms.shading, 0.0);
  EXPECT_GT(r.terms.silhouette, 0.0);
  ASSERT_EQ(warnings.size(), 1u);
}

TEST(Objective, PhaseTimesAreFilled) {
  const auto& scene = fixtures::small_sphere_scene();
  const auto m = icosphere<double>(2, 0.5);
  const auto cache = build_connectivity(m);
  std::mt19937_64 rng(1);
  PhaseTimes t;
  total_objective(m, cache, live_shader(0), {&scene.views[0]}, LossWeights{}, 0.75, rng, &t);
  for (Phase p : {Phase::rasterize, Phase::shade, Phase::losses, Phase::backward}) EXPECT_GT(t[p], 0.0);
  EXPECT_EQ(t[Phase::step], 0.0);
}

TEST(Objective, RejectsNegativeWeights) {
  EXPECT_THROW(only(-1, 0, 0, 0).validate(), Error);
}
