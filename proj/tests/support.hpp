#pragma once

#include "mvr/mvr.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <set>

namespace mvr::fixtures {

inline double rel_error(double analytic, double numeric, double floor = 1e-12) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

inline double central_difference(const std::function<double(double)>& f, double h) {
  return (f(h) - f(-h)) / (2.0 * h);
}

inline std::vector<Vec3<double>> random_field(std::size_t n, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> g(0.0, scale);
  std::vector<Vec3<double>> out(n);
  for (auto& v : out) v = Vec3<double>(g(rng), g(rng), g(rng));
  return out;
}

inline double dot(const std::vector<Vec3<double>>& a, const std::vector<Vec3<double>>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i].dot(b[i]);
  return s;
}

inline Mesh<double> displaced(const Mesh<double>& m, const std::vector<Vec3<double>>& d, double t) {
  Mesh<double> out = m;
  for (std::size_t i = 0; i < d.size(); ++i) out.vertices[i] += t * d[i];
  return out;
}

/// Icosphere with every vertex jittered, so no symmetry hides a wrong term.
inline Mesh<double> jittered_sphere(int subdivisions, double radius, double jitter, std::uint64_t seed) {
  Mesh<double> m = icosphere<double>(subdivisions, radius);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-jitter, jitter);
  for (auto& v : m.vertices) v += Vec3<double>(u(rng), u(rng), u(rng));
  return m;
}

/// Area (in pixels) of the union of projected triangles, estimated with
/// ss x ss point samples per pixel inside [x0, x1) x [y0, y1).
inline double projected_coverage(const Mesh<double>& m, const Camera<double>& cam, int ss, int x0, int y0, int x1, int y1) {
  std::vector<std::array<Vec2<double>, 3>> tris;
  std::vector<Vec2<double>> lo, hi;
  for (const auto& f : m.faces) {
    std::array<Vec2<double>, 3> t{project(cam, m.vertices[f[0]]).pixel, project(cam, m.vertices[f[1]]).pixel,
                                  project(cam, m.vertices[f[2]]).pixel};
    tris.push_back(t);
    lo.push_back(t[0].cwiseMin(t[1]).cwiseMin(t[2]));
    hi.push_back(t[0].cwiseMax(t[1]).cwiseMax(t[2]));
  }
  auto edge = [](const Vec2<double>& a, const Vec2<double>& b, const Vec2<double>& p) {
    return (b.x() - a.x()) * (p.y() - a.y()) - (b.y() - a.y()) * (p.x() - a.x());
  };
  long hits = 0;
  for (int y = y0; y < y1; ++y)
    for (int x = x0; x < x1; ++x)
      for (int sy = 0; sy < ss; ++sy)
        for (int sx = 0; sx < ss; ++sx) {
          const Vec2<double> p(x + (sx + 0.5) / ss, y + (sy + 0.5) / ss);
          for (std::size_t i = 0; i < tris.size(); ++i) {
            if ((p.array() < lo[i].array()).any() || (p.array() > hi[i].array()).any()) continue;
            const auto& t = tris[i];
            const double w0 = edge(t[1], t[2], p), w1 = edge(t[2], t[0], p), w2 = edge(t[0], t[1], p);
            if ((w0 >= 0 && w1 >= 0 && w2 >= 0) || (w0 <= 0 && w1 <= 0 && w2 <= 0)) {
              ++hits;
              break;
            }
          }
        }
  return static_cast<double>(hits) / (ss * ss);
}

struct SilhouetteProbe {
  int vertex = -1;
  double analytic = 0.0;  // d(sum of mask) / d(step along dir)
  double oracle = 0.0;    // supersampled central difference
};

/// Moves silhouette vertices in the image plane, away from the projected
/// centroid, and compares the mask-sum gradient with supersampled coverage.
inline std::vector<SilhouetteProbe> silhouette_probes(const Mesh<double>& m, const Camera<double>& cam, int max_probes,
                                                      int ss = 16) {
  const auto cache = build_connectivity(m);
  const auto vis = rasterize_visibility(m, cam);
  const auto sil = silhouette_mask(m, cache, cam, vis);
  std::vector<Vec3<double>> grad(m.num_vertices(), Vec3<double>::Zero());
  silhouette_mask_backward(m, cam, sil, std::vector<double>(sil.mask.size(), 1.0), grad);

  Vec2<double> centroid = Vec2<double>::Zero();
  for (const auto& v : m.vertices) centroid += project(cam, v).pixel;
  centroid /= static_cast<double>(m.num_vertices());
  std::set<int> verts;
  for (const auto& e : sil.edges) {
    verts.insert(e.a);
    verts.insert(e.b);
  }
  const Vec3<double> right = cam.R.row(0).transpose(), down = cam.R.row(1).transpose();
  std::vector<SilhouetteProbe> out;
  for (int v : verts) {
    if (static_cast<int>(out.size()) >= max_probes) break;
    const auto pr = project(cam, m.vertices[v]);
    const Vec2<double> c = (pr.pixel - centroid).normalized();
    const Vec3<double> dir = right * c.x() + down * c.y();
    const double h = 0.25 * pr.depth / cam.K(0, 0);  // a quarter pixel
    Mesh<double> mp = m, mm = m;
    mp.vertices[v] += h * dir;
    mm.vertices[v] -= h * dir;
    // only faces around v move; coverage elsewhere cancels
    Vec2<double> lo = Vec2<double>::Constant(1e30), hi = -lo;
    for (const Mesh<double>* mesh : {&mp, &mm})
      for (int f : cache.vertex_faces[v])
        for (int k : mesh->faces[f]) {
          const Vec2<double> p = project(cam, mesh->vertices[k]).pixel;
          lo = lo.cwiseMin(p);
          hi = hi.cwiseMax(p);
        }
    const int x0 = std::max(0, int(std::floor(lo.x())) - 1), y0 = std::max(0, int(std::floor(lo.y())) - 1);
    const int x1 = std::min(cam.width, int(std::ceil(hi.x())) + 1), y1 = std::min(cam.height, int(std::ceil(hi.y())) + 1);
    SilhouetteProbe p;
    p.vertex = v;
    p.analytic = grad[v].dot(dir);
    p.oracle = (projected_coverage(mp, cam, ss, x0, y0, x1, y1) - projected_coverage(mm, cam, ss, x0, y0, x1, y1)) / (2.0 * h);
    out.push_back(p);
  }
  return out;
}

/// A small synthetic scene, rendered once per process.
inline const SyntheticScene& small_sphere_scene() {
  static const SyntheticScene scene = [] {
    SyntheticSceneSpec spec;
    spec.resolution = 48;
    spec.focal = 75.0;
    spec.camera_count = 8;
    spec.supersampling = 2;
    return generate_synthetic_scene(spec, 0);
  }();
  return scene;
}

inline ShaderArchitecture tiny_shader() {
  ShaderArchitecture a;
  a.h_layers = 2;
  a.h_width = 16;
  a.c_layers = 1;
  a.c_width = 16;
  return a;
}

}  // namespace mvr::fixtures
