#include "support.hpp"

#include <gtest/gtest.h>

using namespace mvr;
using fixtures::rel_error;

namespace {

Camera<double> frontal(int w, int h, double focal) {
  Camera<double> c;
  c.K = intrinsics(focal, w, h);
  c.width = w;
  c.height = h;
  return c;
}

// triangle at depth 1 whose right edge is the vertical line u = edge_u
Mesh<double> half_frame_triangle(const Camera<double>& cam, double edge_u) {
  const double W = cam.width, H = cam.height;
  Mesh<double> m;
  m.vertices = {unproject(cam, Vec2<double>(edge_u, -10 * H), 1.0), unproject(cam, Vec2<double>(edge_u, 10 * H), 1.0),
                unproject(cam, Vec2<double>(-10 * W, 0.5 * H), 1.0)};
  m.faces = {{0, 1, 2}};
  return m;
}

double mean(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / double(v.size());
}

}  // namespace

TEST(Camera, ProjectsPrincipalPointAndUnprojects) {
  const auto cam = orbit_camera<double>(30, 20, 3, Vec3<double>(0.1, 0.2, 0.3), 64, 48, 80);
  validate(cam);
  const auto p = project(cam, Vec3<double>(0.1, 0.2, 0.3));
  EXPECT_NEAR(p.pixel.x(), 32.0, 1e-12);
  EXPECT_NEAR(p.pixel.y(), 24.0, 1e-12);
  EXPECT_NEAR(p.depth, 3.0, 1e-12);
  const Vec3<double> x = unproject(cam, Vec2<double>(10.5, 7.25), 2.5);
  EXPECT_LT((project(cam, x).pixel - Vec2<double>(10.5, 7.25)).norm(), 1e-12);
  EXPECT_TRUE(project(cam, Vec3<double>(cam.center() - cam.R.row(2).transpose())).behind);
}

TEST(Camera, OrbitKeepsWorldUpOnImageUp) {
  const auto cam = orbit_camera<double>(0, 10, 2, Vec3<double>::Zero(), 32, 32, 40);
  EXPECT_LT(project(cam, Vec3<double>(0, 0, 0.3)).pixel.y(), 16.0);
  EXPECT_LT((cam.center() - 2.0 * Vec3<double>(std::cos(10 * kPi / 180), 0, std::sin(10 * kPi / 180))).norm(), 1e-12);
}

TEST(Camera, JacobianMatchesFiniteDifferences) {
  std::mt19937_64 rng(5);
  for (int i = 0; i < 20; ++i) {
    auto cam = orbit_camera<double>(double(rng() % 360), double(rng() % 120) - 60.0, 2.5, Vec3<double>::Zero(), 64, 64, 70);
    cam.K(0, 1) = 0.3;  // skew exercises the full K
    const Vec3<double> x = fixtures::random_field(1, rng, 0.3)[0];
    const Vec3<double> d = fixtures::random_field(1, rng)[0];
    const Vec3<double> analytic = project_jacobian(cam, x) * d;
    for (int r = 0; r < 3; ++r) {
      const double fd = fixtures::central_difference(
          [&](double t) {
            const auto p = project(cam, Vec3<double>(x + t * d));
            return r < 2 ? p.pixel[r] : p.depth;
          },
          1e-6);
      EXPECT_LT(rel_error(analytic[r], fd), 1e-6) << "row " << r;
    }
  }
}

TEST(Camera, ValidateRejectsBadRotation) {
  auto cam = frontal(8, 8, 10);
  cam.R(0, 0) = 2;
  EXPECT_THROW(validate(cam), Error);
  cam = frontal(0, 8, 10);
  EXPECT_THROW(validate(cam), Error);
}

TEST(Rasterizer, VisibilityMatchesBruteForceDepth) {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> u(-0.6, 0.6), z(0.5, 1.5);
  const auto cam = orbit_camera<double>(0, 0, 3, Vec3<double>::Zero(), 40, 40, 50);
  for (int scene = 0; scene < 10; ++scene) {
    Mesh<double> m;
    for (int k = 0; k < 6; ++k) m.vertices.emplace_back(z(rng) - 1.0, u(rng), u(rng));
    m.faces = {{0, 1, 2}, {3, 4, 5}};
    const auto vis = rasterize_visibility(m, cam);
    const Mat3<double> Kinv = cam.K.inverse();
    for (int y = 0; y < cam.height; ++y)
      for (int x = 0; x < cam.width; ++x) {
        const Vec3<double> d = pixel_ray(cam, Kinv, x + 0.5, y + 0.5);
        int best = -1;
        double best_t = std::numeric_limits<double>::infinity();
        for (int f = 0; f < 2; ++f) {
          // barycentric solve of o + t d = v0 + u e1 + v e2
          const auto& F = m.faces[f];
          Mat3<double> A;
          A << -d, m.vertices[F[1]] - m.vertices[F[0]], m.vertices[F[2]] - m.vertices[F[0]];
          const Vec3<double> s = A.fullPivLu().solve(cam.center() - m.vertices[F[0]]);
          if (s[1] >= 0 && s[2] >= 0 && s[1] + s[2] <= 1 && s[0] > 0 && s[0] < best_t) {
            best_t = s[0];
            best = f;
          }
        }
        const int got = vis.triangle[static_cast<std::size_t>(y) * cam.width + x];
        EXPECT_EQ(got, best) << "scene " << scene << " pixel " << x << "," << y;
      }
  }
}

TEST(Rasterizer, AttributesPartitionOfUnityAndReprojection) {
  const auto m = fixtures::jittered_sphere(2, 0.5, 0.02, 1);
  const auto cam = orbit_camera<double>(40, 25, 2.5, Vec3<double>::Zero(), 64, 64, 90);
  const auto vis = rasterize_visibility(m, cam);
  const auto vn = vertex_normals(m);
  const auto pix = covered_pixels(vis);
  ASSERT_GT(pix.size(), 500u);
  const auto a = interpolate_pixels(m, vn.normals, cam, pix, vis.triangle);
  for (std::size_t i = 0; i < pix.size(); ++i) {
    EXPECT_NEAR(a.bary[i].sum(), 1.0, 1e-12);
    const Vec2<double> center(double(pix[i] % 64) + 0.5, double(pix[i] / 64) + 0.5);
    EXPECT_LT((project(cam, a.position[i]).pixel - center).norm(), 1e-6);
    EXPECT_NEAR(a.normal[i].norm(), 1.0, 1e-12);
    EXPECT_GT(a.view_dir[i].dot(a.normal[i]), -0.5);
  }
}

TEST(Rasterizer, GBufferAtVertexAndFlatQuad) {
  const auto cam = frontal(32, 32, 40);
  Mesh<double> quad;
  quad.vertices = {unproject(cam, Vec2<double>(4.5, 4.5), 2.0), unproject(cam, Vec2<double>(28, 4.5), 2.0),
                   unproject(cam, Vec2<double>(28, 28), 2.0), unproject(cam, Vec2<double>(4.5, 28), 2.0)};
  quad.faces = {{0, 2, 1}, {0, 3, 2}};
  const auto cache = build_connectivity(quad);
  const auto gb = rasterize(quad, cache, cam);
  const std::size_t corner = 4 * 32 + 4;
  ASSERT_TRUE(gb.covered(corner));
  EXPECT_LT((gb.position[corner] - quad.vertices[0]).norm(), 1e-5);
  for (std::size_t p = 0; p < gb.pixel_count(); ++p)
    if (gb.covered(p)) EXPECT_LT((gb.normal[p] - Vec3<double>(0, 0, -1)).norm(), 1e-12);
}

TEST(Rasterizer, InterpolationBackwardMatchesFiniteDifferences) {
  const auto cam = orbit_camera<double>(20, 30, 2.5, Vec3<double>::Zero(), 64, 64, 100);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto m = fixtures::jittered_sphere(2, 0.5, 0.02, seed);
    const auto vis = rasterize_visibility(m, cam);
    std::vector<std::size_t> pix;
    for (std::size_t p = seed; p < vis.triangle.size(); p += 29)
      if (vis.covered(p)) pix.push_back(p);
    const auto vn = vertex_normals(m);
    const auto attrs = interpolate_pixels(m, vn.normals, cam, pix, vis.triangle);
    std::mt19937_64 rng(seed);
    const auto gp = fixtures::random_field(pix.size(), rng), gn = fixtures::random_field(pix.size(), rng),
               gw = fixtures::random_field(pix.size(), rng);
    const auto dir = fixtures::random_field(m.num_vertices(), rng, 1e-2);
    std::vector<Vec3<double>> gv(m.num_vertices(), Vec3<double>::Zero()), gvn = gv;
    interpolate_pixels_backward(m, vn.normals, cam, attrs, &gp, &gn, &gw, gv, gvn);
    vertex_normals_backward(m, vn, gvn, gv);
    const double fd = fixtures::central_difference(
        [&](double t) {
          const auto mm = fixtures::displaced(m, dir, t);
          const auto a = interpolate_pixels(mm, vertex_normals(mm).normals, cam, pix, vis.triangle);
          return fixtures::dot(a.position, gp) + fixtures::dot(a.normal, gn) + fixtures::dot(a.view_dir, gw);
        },
        1e-6);
    EXPECT_LT(rel_error(fixtures::dot(gv, dir), fd), 1e-4) << "seed " << seed;
  }
}

TEST(Silhouette, MaskIsBinaryOutsideTheBand) {
  const auto m = icosphere<double>(2, 0.5);
  const auto cam = orbit_camera<double>(10, 20, 2.5, Vec3<double>::Zero(), 64, 64, 90);
  const auto cache = build_connectivity(m);
  const auto vis = rasterize_visibility(m, cam);
  const auto sil = silhouette_mask(m, cache, cam, vis);
  int band = 0;
  for (std::size_t p = 0; p < sil.mask.size(); ++p) {
    if (sil.pixel_edge[p] < 0) {
      EXPECT_TRUE(sil.mask[p] == 0.0 || sil.mask[p] == 1.0);
      EXPECT_EQ(sil.mask[p], vis.covered(p) ? 1.0 : 0.0);
    } else {
      ++band;
      EXPECT_GT(sil.mask[p], 0.0);
      EXPECT_LT(sil.mask[p], 1.0);
    }
  }
  EXPECT_GT(band, 50);
}

TEST(Silhouette, HalfFrameAndHalfPixelShift) {
  const auto cam = frontal(32, 24, 30);
  const auto m = half_frame_triangle(cam, 16.0);
  const auto cache = build_connectivity(m);
  const auto sil = silhouette_mask(m, cache, cam, rasterize_visibility(m, cam));
  EXPECT_DOUBLE_EQ(mean(sil.mask), 0.5);

  const auto moved = half_frame_triangle(cam, 16.5);
  const auto sil2 = silhouette_mask(moved, cache, cam, rasterize_visibility(moved, cam));
  const double oracle = fixtures::projected_coverage(moved, cam, 16, 0, 0, 32, 24) / (32.0 * 24.0) -
                        fixtures::projected_coverage(m, cam, 16, 0, 0, 32, 24) / (32.0 * 24.0);
  EXPECT_NEAR(oracle, 0.5 * 24.0 / (32.0 * 24.0), 1e-12);
  EXPECT_NEAR(mean(sil2.mask) - mean(sil.mask), oracle, 1e-9);
}

TEST(Silhouette, InteriorVertexHasNoGradient) {
  const auto m = icosphere<double>(2, 0.5);
  const auto cam = orbit_camera<double>(0, 0, 2.5, Vec3<double>::Zero(), 64, 64, 90);
  const auto cache = build_connectivity(m);
  const auto sil = silhouette_mask(m, cache, cam, rasterize_visibility(m, cam));
  std::vector<Vec3<double>> grad(m.num_vertices(), Vec3<double>::Zero());
  silhouette_mask_backward(m, cam, sil, std::vector<double>(sil.mask.size(), 1.0), grad);
  // the vertex facing the camera is far from the outline
  int front = 0;
  for (std::size_t i = 0; i < m.num_vertices(); ++i)
    if (m.vertices[i].x() > m.vertices[front].x()) front = static_cast<int>(i);
  EXPECT_LT(grad[front].norm(), 1e-8);
}

TEST(Silhouette, GradientMatchesSupersampledOracle) {
  const auto m = icosahedron<double>(0.5);
  const auto cam = orbit_camera<double>(20, 30, 2.5, Vec3<double>::Zero(), 128, 128, 200);
  const auto probes = fixtures::silhouette_probes(m, cam, 4);
  ASSERT_EQ(probes.size(), 4u);
  for (const auto& p : probes) EXPECT_LT(rel_error(p.analytic, p.oracle), 5e-2) << "vertex " << p.vertex;
}

TEST(Silhouette, FrozenMaskMatchesLiveMaskAtAssignment) {
  const auto m = fixtures::jittered_sphere(1, 0.5, 0.02, 3);
  const auto cam = orbit_camera<double>(60, -20, 2.5, Vec3<double>::Zero(), 48, 48, 70);
  const auto cache = build_connectivity(m);
  const auto sil = silhouette_mask(m, cache, cam, rasterize_visibility(m, cam));
  const auto frozen = silhouette_mask_frozen(m, cam, sil);
  for (std::size_t p = 0; p < frozen.size(); ++p) EXPECT_NEAR(frozen[p], sil.mask[p], 1e-12);
}
