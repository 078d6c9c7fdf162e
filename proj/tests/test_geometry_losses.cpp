#include "support.hpp"

#include <gtest/gtest.h>

using namespace mvr;
using fixtures::rel_error;

namespace {

// (1/n) sum |v_i - mean(neighbors)|^2, written from the definition
double laplacian_oracle(const Mesh<double>& m) {
  std::vector<std::set<int>> nb(m.num_vertices());
  for (const auto& f : m.faces)
    for (int k = 0; k < 3; ++k) {
      nb[f[k]].insert(f[(k + 1) % 3]);
      nb[f[k]].insert(f[(k + 2) % 3]);
    }
  double s = 0.0;
  for (std::size_t i = 0; i < m.num_vertices(); ++i) {
    if (nb[i].empty()) continue;
    Vec3<double> mean = Vec3<double>::Zero();
    for (int j : nb[i]) mean += m.vertices[j];
    s += (m.vertices[i] - mean / double(nb[i].size())).squaredNorm();
  }
  return s / double(m.num_vertices());
}

Mesh<double> hinge(double angle) {
  Mesh<double> m;
  m.vertices = {{0, 0, 0}, {1, 0, 0}, {0.5, 1, 0}, {0.5, std::cos(angle), std::sin(angle)}};
  m.faces = {{0, 1, 2}, {1, 0, 3}};
  return m;
}

template <class Loss>
double directional_fd_error(const Mesh<double>& m, Loss loss, std::uint64_t seed) {
  const auto cache = build_connectivity(m);
  std::mt19937_64 rng(seed);
  const auto dir = fixtures::random_field(m.num_vertices(), rng);
  const double analytic = fixtures::dot(loss(m, cache).grad, dir);
  const double fd =
      fixtures::central_difference([&](double t) { return loss(fixtures::displaced(m, dir, t), cache).value; }, 1e-6);
  return rel_error(analytic, fd);
}

}  // namespace

TEST(DifferentialCoords, OneRing) {
  Mesh<double> m;
  m.vertices = {{0, 0, 0.3}, {1, 0, 0}, {0, 1, 0}, {-1, 0, 0}, {0, -1, 0}};
  m.faces = {{0, 1, 2}, {0, 2, 3}, {0, 3, 4}, {0, 4, 1}};
  const auto d = differential_coords(m, build_connectivity(m));
  EXPECT_LT((d[0] - Vec3<double>(0, 0, 0.3)).norm(), 1e-15);
  EXPECT_NEAR(laplacian_loss(m, build_connectivity(m)).value, laplacian_oracle(m), 1e-15);
}

TEST(DifferentialCoords, RegularTetrahedronIsSymmetric) {
  Mesh<double> m;
  m.vertices = {{1, 1, 1}, {1, -1, -1}, {-1, 1, -1}, {-1, -1, 1}};
  m.faces = {{0, 1, 2}, {0, 3, 1}, {0, 2, 3}, {1, 3, 2}};
  const auto d = differential_coords(m, build_connectivity(m));
  for (int i = 0; i < 4; ++i) {
    Vec3<double> opposite = Vec3<double>::Zero();
    for (int j = 0; j < 4; ++j)
      if (j != i) opposite += m.vertices[j] / 3.0;
    EXPECT_LT((d[i] - (m.vertices[i] - opposite)).norm(), 1e-15);
    EXPECT_NEAR(d[i].norm(), d[0].norm(), 1e-15);
  }
}

TEST(DifferentialCoords, IsolatedVertexWarns) {
  Mesh<double> m = icosahedron<double>();
  m.vertices.emplace_back(5, 5, 5);
  std::vector<std::string> warnings;
  const auto old = log::set_sink([&](const std::string& w) { warnings.push_back(w); });
  const auto d = differential_coords(m, build_connectivity(m));
  log::set_sink(old);
  EXPECT_EQ(d.back(), Vec3<double>::Zero());
  ASSERT_EQ(warnings.size(), 1u);
  EXPECT_NE(warnings[0].find("isolated"), std::string::npos);
}

TEST(LaplacianLoss, ZeroOnGridInterior) {
  const auto m = grid_plane<double>(8, 6, 0.25);
  const auto cache = build_connectivity(m);
  const auto d = differential_coords(m, cache);
  const auto loss = laplacian_loss(m, cache);
  for (int j = 0; j <= 6; ++j)
    for (int i = 0; i <= 8; ++i) {
      const int v = j * 9 + i;
      if (i > 0 && j > 0 && i < 8 && j < 6) EXPECT_LT(d[v].norm(), 1e-15);
      if (i > 1 && j > 1 && i < 7 && j < 5) EXPECT_LT(loss.grad[v].norm(), 1e-14);  // whole 2-ring interior
    }
  EXPECT_NEAR(loss.value, laplacian_oracle(m), 1e-14);
}

TEST(LaplacianLoss, MatchesOracleAndFiniteDifferences) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto m = fixtures::jittered_sphere(2, 0.5, 0.05, seed);
    const auto cache = build_connectivity(m);
    EXPECT_NEAR(laplacian_loss(m, cache).value, laplacian_oracle(m), 1e-15);
    EXPECT_LT(directional_fd_error(m, [](const auto& mm, const auto& c) { return laplacian_loss(mm, c); }, seed), 1e-5);
  }
}

TEST(FaceNormals, WindingAndDegeneracy) {
  Mesh<double> m;
  m.vertices = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {2, 0, 0}};
  m.faces = {{0, 1, 2}, {0, 2, 1}, {0, 1, 3}};
  const auto fn = face_normals(m);
  EXPECT_EQ(fn.normals[0], Vec3<double>(0, 0, 1));
  EXPECT_EQ(fn.normals[1], Vec3<double>(0, 0, -1));
  EXPECT_EQ(fn.normals[2], Vec3<double>::Zero());
  EXPECT_TRUE(fn.degenerate[2]);
  EXPECT_FALSE(fn.degenerate[0]);
}

TEST(VertexNormals, SphereAndGrid) {
  const auto s = icosphere<double>(3, 1.0);
  const auto vn = vertex_normals(s);
  for (std::size_t i = 0; i < s.num_vertices(); ++i)
    EXPECT_GT(vn.normals[i].dot(s.vertices[i].normalized()), std::cos(2.0 * kPi / 180.0));
  const auto g = grid_plane<double>(4, 4);
  for (const auto& n : vertex_normals(g).normals) EXPECT_LT((n - Vec3<double>::UnitZ()).norm(), 1e-15);
}

TEST(VertexNormals, BackwardMatchesFiniteDifferences) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto m = fixtures::jittered_sphere(1, 0.5, 0.05, seed);
    std::mt19937_64 rng(seed + 100);
    const auto up = fixtures::random_field(m.num_vertices(), rng);
    const auto dir = fixtures::random_field(m.num_vertices(), rng);
    const auto vn = vertex_normals(m);
    std::vector<Vec3<double>> grad(m.num_vertices(), Vec3<double>::Zero());
    vertex_normals_backward(m, vn, up, grad);
    const double fd = fixtures::central_difference(
        [&](double t) { return fixtures::dot(vertex_normals(fixtures::displaced(m, dir, t)).normals, up); }, 1e-6);
    EXPECT_LT(rel_error(fixtures::dot(grad, dir), fd), 1e-5);
  }
}

TEST(NormalConsistency, ClosedForms) {
  const auto grid = grid_plane<double>(5, 5);
  EXPECT_EQ(normal_consistency_loss(grid, build_connectivity(grid)).value, 0.0);
  const auto h = hinge(kPi / 2.0);
  EXPECT_NEAR(normal_consistency_loss(h, build_connectivity(h)).value, 1.0, 1e-15);
  // opposite normals: (1 - (-1))^2
  const auto folded = hinge(0.0);
  const auto c = build_connectivity(folded);
  EXPECT_NEAR(normal_consistency_loss(folded, c).value, 4.0, 1e-12);
}

TEST(NormalConsistency, HingeFiniteDifferences) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.3, 2.8);
  for (int i = 0; i < 20; ++i) {
    auto m = hinge(u(rng));
    for (auto& v : m.vertices) v += fixtures::random_field(1, rng, 0.05)[0];
    EXPECT_LT(directional_fd_error(m, [](const auto& mm, const auto& c) { return normal_consistency_loss(mm, c); }, i), 1e-5);
  }
}

TEST(NormalConsistency, SkipsDegenerateFaces) {
  Mesh<double> m;
  m.vertices = {{0, 0, 0}, {1, 0, 0}, {0.5, 1, 0}, {0.5, 0, 0}};
  m.faces = {{0, 1, 2}, {1, 0, 3}};
  const auto r = normal_consistency_loss(m, build_connectivity(m));
  EXPECT_EQ(r.value, 0.0);
  for (const auto& g : r.grad) EXPECT_TRUE(g.allFinite());
}

TEST(GeometryLosses, RigidInvariance) {
  const auto m = fixtures::jittered_sphere(2, 0.5, 0.05, 9);
  const auto cache = build_connectivity(m);
  const Mat3<double> R = Eigen::AngleAxisd(0.7, Vec3<double>(1, 2, 3).normalized()).toRotationMatrix();
  Mesh<double> moved = m;
  for (auto& v : moved.vertices) v = R * v + Vec3<double>(0.3, -1, 2);
  EXPECT_LT(rel_error(laplacian_loss(moved, cache).value, laplacian_loss(m, cache).value), 1e-9);
  EXPECT_LT(rel_error(normal_consistency_loss(moved, cache).value, normal_consistency_loss(m, cache).value), 1e-9);
}
