#pragma once

#include "mvr/camera.hpp"
#include "mvr/geometry_losses.hpp"

#include <limits>

namespace mvr {

/// Per-pixel geometry buffer. Pixel p = y * width + x.
template <class T>
struct GBuffer {
  int width = 0;
  int height = 0;
  std::vector<int> triangle;  // -1 for background
  std::vector<T> depth;       // camera-space z of the visible surface
  std::vector<Vec3<T>> bary;
  std::vector<Vec3<T>> position;
  std::vector<Vec3<T>> normal;
  std::vector<Vec3<T>> view_dir;  // unit, surface toward camera
  std::vector<T> mask;            // coverage with silhouette antialiasing
  Vec3<T> camera_center = Vec3<T>::Zero();

  std::size_t pixel_count() const { return static_cast<std::size_t>(width) * height; }
  bool covered(std::size_t p) const { return triangle[p] >= 0; }
};

/// Triangle ids and depths only.
struct Visibility {
  int width = 0;
  int height = 0;
  std::vector<int> triangle;
  std::vector<double> depth;

  bool covered(std::size_t p) const { return triangle[p] >= 0; }
};

namespace detail {

/// Edge function with the two endpoints taken in a fixed (vertex id) order so
/// a pixel center on a shared edge gets the bit-identical value from both
/// triangles. Returns the value for the edge directed a -> b.
inline double edge_function(int ia, const Vec2<double>& a, int ib, const Vec2<double>& b, const Vec2<double>& p) {
  if (ia > ib) return -edge_function(ib, b, ia, a, p);
  return (b.x() - a.x()) * (p.y() - a.y()) - (b.y() - a.y()) * (p.x() - a.x());
}

/// Ray o + t d against triangle (v0, v1, v2): returns (t, u, v) with the hit
/// at v0 + u (v1 - v0) + v (v2 - v0); all NaN when the ray is parallel.
template <class T>
Vec3<T> ray_triangle(const Vec3<T>& o, const Vec3<T>& d, const Vec3<T>& v0, const Vec3<T>& v1, const Vec3<T>& v2) {
  const Vec3<T> e1 = v1 - v0, e2 = v2 - v0, s = o - v0;
  const Vec3<T> p = d.cross(e2);
  const T det = e1.dot(p);
  if (det == T(0)) return Vec3<T>::Constant(std::numeric_limits<T>::quiet_NaN());
  const Vec3<T> q = s.cross(e1);
  return Vec3<T>(e2.dot(q), s.dot(p), d.dot(q)) / det;
}

/// Sutherland-Hodgman clip of a camera-space polygon against z >= near.
inline std::vector<Vec3<double>> clip_near(const std::array<Vec3<double>, 3>& tri, double near) {
  std::vector<Vec3<double>> out;
  for (int i = 0; i < 3; ++i) {
    const Vec3<double>& a = tri[i];
    const Vec3<double>& b = tri[(i + 1) % 3];
    const bool ina = a.z() >= near, inb = b.z() >= near;
    if (ina) out.push_back(a);
    if (ina != inb) out.push_back(a + (b - a) * ((near - a.z()) / (b.z() - a.z())));
  }
  return out;
}

}  // namespace detail

/// World-space direction (unnormalized) of the ray through the center of
/// pixel (x, y).
template <class T>
Vec3<T> pixel_center_ray(const Camera<T>& cam, const Mat3<T>& K_inv, int x, int y) {
  return pixel_ray(cam, K_inv, T(x) + T(0.5), T(y) + T(0.5));
}

/// Visibility pass: nearest triangle at every pixel center. Coverage uses
/// inclusive edge functions, so pixels on shared edges are never dropped.
/// Depth ties go to the lower triangle id. Back faces are not culled.
/// Triangles crossing the near plane are clipped against it.
template <class T>
Visibility rasterize_visibility(const Mesh<T>& mesh, const Camera<T>& camera) {
  const Camera<double> cam = camera.template cast<double>();
  Visibility vis;
  vis.width = cam.width;
  vis.height = cam.height;
  vis.triangle.assign(static_cast<std::size_t>(cam.width) * cam.height, -1);
  vis.depth.assign(vis.triangle.size(), std::numeric_limits<double>::infinity());
  const Mat3<double> K_inv = cam.K.inverse();

  std::vector<Vec3<double>> pc(mesh.vertices.size());
  std::vector<Vec2<double>> px(mesh.vertices.size());
  for (std::size_t i = 0; i < pc.size(); ++i) {
    pc[i] = cam.R * mesh.vertices[i].template cast<double>() + cam.t;
    const Vec3<double> h = cam.K * pc[i];
    px[i] = Vec2<double>(h.x() / h.z(), h.y() / h.z());
  }

  auto write = [&](std::size_t p, int f, double z) {
    if (z < vis.depth[p]) {  // strict: earlier (lower) id keeps ties
      vis.depth[p] = z;
      vis.triangle[p] = f;
    }
  };

  for (int f = 0; f < static_cast<int>(mesh.faces.size()); ++f) {
    const Face& face = mesh.faces[f];
    const std::array<Vec3<double>, 3> cv{pc[face[0]], pc[face[1]], pc[face[2]]};
    const bool all_front = cv[0].z() >= kNearPlane && cv[1].z() >= kNearPlane && cv[2].z() >= kNearPlane;
    const bool all_behind = cv[0].z() < kNearPlane && cv[1].z() < kNearPlane && cv[2].z() < kNearPlane;
    if (all_behind) continue;

    Vec2<double> lo(std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity());
    Vec2<double> hi = -lo;
    if (all_front) {
      for (int k = 0; k < 3; ++k) {
        lo = lo.cwiseMin(px[face[k]]);
        hi = hi.cwiseMax(px[face[k]]);
      }
    } else {
      for (const auto& q : detail::clip_near(cv, kNearPlane)) {
        const Vec3<double> h = cam.K * q;
        const Vec2<double> uv(h.x() / h.z(), h.y() / h.z());
        lo = lo.cwiseMin(uv);
        hi = hi.cwiseMax(uv);
      }
    }
    const int x0 = std::max(0, static_cast<int>(std::floor(lo.x() - 0.5)));
    const int y0 = std::max(0, static_cast<int>(std::floor(lo.y() - 0.5)));
    const int x1 = std::min(cam.width - 1, static_cast<int>(std::ceil(hi.x() - 0.5)));
    const int y1 = std::min(cam.height - 1, static_cast<int>(std::ceil(hi.y() - 0.5)));
    if (x0 > x1 || y0 > y1) continue;

    if (all_front) {
      const Vec2<double>&a = px[face[0]], &b = px[face[1]], &c = px[face[2]];
      const double area = detail::edge_function(face[0], a, face[1], b, c);
      if (area == 0.0) continue;
      const double sign = area > 0.0 ? 1.0 : -1.0;
      const double iz0 = 1.0 / cv[0].z(), iz1 = 1.0 / cv[1].z(), iz2 = 1.0 / cv[2].z();
      for (int y = y0; y <= y1; ++y)
        for (int x = x0; x <= x1; ++x) {
          const Vec2<double> p(x + 0.5, y + 0.5);
          const double w0 = sign * detail::edge_function(face[1], b, face[2], c, p);
          const double w1 = sign * detail::edge_function(face[2], c, face[0], a, p);
          const double w2 = sign * detail::edge_function(face[0], a, face[1], b, p);
          if (w0 < 0.0 || w1 < 0.0 || w2 < 0.0) continue;
          const double sum = w0 + w1 + w2;
          const double z = sum / (w0 * iz0 + w1 * iz1 + w2 * iz2);
          write(static_cast<std::size_t>(y) * cam.width + x, f, z);
        }
    } else {
      const Vec3<double> origin = cam.center();
      const Vec3<double> v0 = mesh.vertices[face[0]].template cast<double>();
      const Vec3<double> v1 = mesh.vertices[face[1]].template cast<double>();
      const Vec3<double> v2 = mesh.vertices[face[2]].template cast<double>();
      for (int y = y0; y <= y1; ++y)
        for (int x = x0; x <= x1; ++x) {
          const Vec3<double> d = pixel_center_ray(cam, K_inv, x, y);
          const Vec3<double> tuv = detail::ray_triangle(origin, d, v0, v1, v2);
          if (!(tuv.y() >= 0.0 && tuv.z() >= 0.0 && tuv.y() + tuv.z() <= 1.0)) continue;
          const double z = (cam.R * (origin + tuv.x() * d) + cam.t).z();
          if (z < kNearPlane) continue;
          write(static_cast<std::size_t>(y) * cam.width + x, f, z);
        }
    }
  }
  return vis;
}

/// Surface attributes at a list of pixels, with what the backward pass needs.
template <class T>
struct PixelAttributes {
  std::vector<std::size_t> pixels;
  std::vector<int> triangle;
  std::vector<Vec3<T>> bary;
  std::vector<Vec3<T>> position;
  std::vector<Vec3<T>> normal;
  std::vector<Vec3<T>> view_dir;
  std::vector<T> normal_length;  // |sum b_k n_k| before normalization
  std::vector<T> view_length;    // |c - x|
};

/// Perspective-correct attributes for the given covered pixels: barycentrics
/// come from intersecting the pixel-center ray with the assigned triangle, so
/// x is exactly the ray hit and n = normalize(sum b_k n_k).
template <class T>
PixelAttributes<T> interpolate_pixels(const Mesh<T>& mesh, const std::vector<Vec3<T>>& vertex_normals,
                                      const Camera<T>& cam, const std::vector<std::size_t>& pixels,
                                      const std::vector<int>& triangle_ids) {
  if (vertex_normals.size() != mesh.vertices.size())
    throw Error(ErrorCode::invalid_argument, "vertex normal count does not match the mesh");
  PixelAttributes<T> out;
  const std::size_t n = pixels.size();
  out.pixels = pixels;
  out.triangle.resize(n);
  out.bary.resize(n);
  out.position.resize(n);
  out.normal.resize(n);
  out.view_dir.resize(n);
  out.normal_length.resize(n);
  out.view_length.resize(n);
  const Mat3<T> K_inv = cam.K.inverse();
  const Vec3<T> origin = cam.center();
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t p = pixels[i];
    const int f = triangle_ids[p];
    if (f < 0 || f >= static_cast<int>(mesh.faces.size()))
      throw Error(ErrorCode::invalid_argument, "attribute interpolation requested at an uncovered pixel");
    const Face& face = mesh.faces[f];
    const int x = static_cast<int>(p % cam.width), y = static_cast<int>(p / cam.width);
    const Vec3<T> d = pixel_center_ray(cam, K_inv, x, y);
    const Vec3<T> tuv = detail::ray_triangle(origin, d, mesh.vertices[face[0]], mesh.vertices[face[1]], mesh.vertices[face[2]]);
    const Vec3<T> b(T(1) - tuv.y() - tuv.z(), tuv.y(), tuv.z());
    out.triangle[i] = f;
    out.bary[i] = b;
    Vec3<T> x_pos = Vec3<T>::Zero(), nn = Vec3<T>::Zero();
    for (int k = 0; k < 3; ++k) {
      x_pos += b[k] * mesh.vertices[face[k]];
      nn += b[k] * vertex_normals[face[k]];
    }
    out.position[i] = x_pos;
    out.normal_length[i] = nn.norm();
    out.normal[i] = out.normal_length[i] > T(0) ? Vec3<T>(nn / out.normal_length[i]) : Vec3<T>(Vec3<T>::UnitZ());
    const Vec3<T> to_cam = origin - x_pos;
    out.view_length[i] = to_cam.norm();
    out.view_dir[i] = to_cam / out.view_length[i];
  }
  return out;
}

/// Reverse pass of interpolate_pixels with the pixel-to-triangle assignment
/// held fixed. Adds into per-vertex position and vertex-normal gradients;
/// chain the latter through vertex_normals_backward. Null upstream spans are
/// treated as zero.
template <class T>
void interpolate_pixels_backward(const Mesh<T>& mesh, const std::vector<Vec3<T>>& vertex_normals, const Camera<T>& cam,
                                 const PixelAttributes<T>& attrs, const std::vector<Vec3<T>>* grad_position,
                                 const std::vector<Vec3<T>>* grad_normal, const std::vector<Vec3<T>>* grad_view_dir,
                                 std::vector<Vec3<T>>& grad_vertices, std::vector<Vec3<T>>& grad_vertex_normals) {
  const Mat3<T> K_inv = cam.K.inverse();
  const Vec3<T> origin = cam.center();
  for (std::size_t i = 0; i < attrs.pixels.size(); ++i) {
    const Face& face = mesh.faces[attrs.triangle[i]];
    const Vec3<T>& b = attrs.bary[i];
    Vec3<T> g_x = grad_position ? (*grad_position)[i] : Vec3<T>::Zero();
    if (grad_view_dir) {
      const Vec3<T>& w = attrs.view_dir[i];
      const Vec3<T>& g = (*grad_view_dir)[i];
      g_x -= (g - w * w.dot(g)) / attrs.view_length[i];
    }
    Vec3<T> g_b = Vec3<T>::Zero();
    if (grad_normal && attrs.normal_length[i] > T(0)) {
      const Vec3<T>& nrm = attrs.normal[i];
      const Vec3<T>& g = (*grad_normal)[i];
      const Vec3<T> g_nn = (g - nrm * nrm.dot(g)) / attrs.normal_length[i];
      for (int k = 0; k < 3; ++k) {
        grad_vertex_normals[face[k]] += b[k] * g_nn;
        g_b[k] += vertex_normals[face[k]].dot(g_nn);
      }
    }
    for (int k = 0; k < 3; ++k) {
      grad_vertices[face[k]] += b[k] * g_x;
      g_b[k] += mesh.vertices[face[k]].dot(g_x);
    }
    // b = (1 - u - v, u, v) with (u, v) from the fixed pixel ray.
    const T g_u = g_b[1] - g_b[0], g_v = g_b[2] - g_b[0];
    if (g_u == T(0) && g_v == T(0)) continue;
    const int x = static_cast<int>(attrs.pixels[i] % cam.width), y = static_cast<int>(attrs.pixels[i] / cam.width);
    const Vec3<T> d = pixel_center_ray(cam, K_inv, x, y);
    const Vec3<T>& v0 = mesh.vertices[face[0]];
    const Vec3<T> e1 = mesh.vertices[face[1]] - v0, e2 = mesh.vertices[face[2]] - v0, s = origin - v0;
    const T det = e1.dot(d.cross(e2));
    const T u = b[1], v = b[2];
    const Vec3<T> d_x_e2 = d.cross(e2);
    const Vec3<T> e1_x_d = e1.cross(d);
    const T k_det = (g_u * u + g_v * v) / det;
    const Vec3<T> g_s = (g_u * d_x_e2 + g_v * e1_x_d) / det;
    const Vec3<T> g_e1 = -k_det * d_x_e2 + g_v * d.cross(s) / det;
    const Vec3<T> g_e2 = g_u * s.cross(d) / det - k_det * e1_x_d;
    grad_vertices[face[0]] -= g_s + g_e1 + g_e2;
    grad_vertices[face[1]] += g_e1;
    grad_vertices[face[2]] += g_e2;
  }
}

/// Covered pixels of a visibility buffer in raster order.
inline std::vector<std::size_t> covered_pixels(const Visibility& vis) {
  std::vector<std::size_t> out;
  for (std::size_t p = 0; p < vis.triangle.size(); ++p)
    if (vis.triangle[p] >= 0) out.push_back(p);
  return out;
}

/// Full-frame attribute maps for a visibility buffer.
template <class T>
void fill_attributes(GBuffer<T>& gb, const Mesh<T>& mesh, const std::vector<Vec3<T>>& vertex_normals, const Camera<T>& cam) {
  const std::size_t n = gb.pixel_count();
  gb.bary.assign(n, Vec3<T>::Zero());
  gb.position.assign(n, Vec3<T>::Zero());
  gb.normal.assign(n, Vec3<T>::Zero());
  gb.view_dir.assign(n, Vec3<T>::Zero());
  std::vector<std::size_t> pixels;
  for (std::size_t p = 0; p < n; ++p)
    if (gb.triangle[p] >= 0) pixels.push_back(p);
  const auto attrs = interpolate_pixels(mesh, vertex_normals, cam, pixels, gb.triangle);
  for (std::size_t i = 0; i < pixels.size(); ++i) {
    gb.bary[pixels[i]] = attrs.bary[i];
    gb.position[pixels[i]] = attrs.position[i];
    gb.normal[pixels[i]] = attrs.normal[i];
    gb.view_dir[pixels[i]] = attrs.view_dir[i];
  }
}

}  // namespace mvr
