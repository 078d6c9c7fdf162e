#pragma once

#include "mvr/connectivity.hpp"
#include "mvr/rasterizer.hpp"

namespace mvr {

/// A projected silhouette edge: mesh vertices a, b and the side its surface
/// lies on (sign of cross(b - a, p - a) for points p on the inside).
struct SilhouetteEdge {
  int a = -1;
  int b = -1;
  int inside_sign = 1;
};

/// Antialiased coverage plus the edge each band pixel was blended against.
template <class T>
struct SilhouetteResult {
  int width = 0;
  int height = 0;
  std::vector<T> mask;
  std::vector<SilhouetteEdge> edges;
  std::vector<int> pixel_edge;  // index into edges, -1 outside the band
};

/// Edges where one adjacent face looks toward the camera and the other away,
/// plus boundary edges. Edges with an endpoint behind the near plane are
/// skipped.
template <class T>
std::vector<SilhouetteEdge> silhouette_edges(const Mesh<T>& mesh, const ConnectivityCache& cache, const Camera<T>& camera) {
  require_matching(cache, mesh);
  const Camera<double> cam = camera.template cast<double>();
  const Vec3<double> c = cam.center();
  auto vertex = [&](int i) { return Vec3<double>(mesh.vertices[i].template cast<double>()); };
  auto front = [&](int f) {
    const Face& face = mesh.faces[f];
    const Vec3<double> n = (vertex(face[1]) - vertex(face[0])).cross(vertex(face[2]) - vertex(face[0]));
    return n.dot(c - vertex(face[0])) > 0.0;
  };
  auto third = [&](int f, const Edge& e) {
    for (int v : mesh.faces[f])
      if (v != e[0] && v != e[1]) return v;
    return e[0];
  };
  std::vector<SilhouetteEdge> out;
  for (const auto& ef : cache.edge_faces) {
    const int f0 = ef.faces[0], f1 = ef.faces[1];
    int face = -1;
    if (f1 < 0)
      face = f0;
    else if (front(f0) != front(f1))
      face = front(f0) ? f0 : f1;
    if (face < 0) continue;
    const auto pa = project(cam, vertex(ef.edge[0]));
    const auto pb = project(cam, vertex(ef.edge[1]));
    const auto pt = project(cam, vertex(third(face, ef.edge)));
    if (pa.behind || pb.behind || pt.behind) continue;
    const Vec2<double> e = pb.pixel - pa.pixel, w = pt.pixel - pa.pixel;
    const double side = e.x() * w.y() - e.y() * w.x();
    if (side == 0.0 || e.squaredNorm() == 0.0) continue;
    out.push_back({ef.edge[0], ef.edge[1], side > 0.0 ? 1 : -1});
  }
  return out;
}

namespace detail {

/// Signed offset of pixel center p from the line through a, b, measured along
/// the pixel axis closest to the edge normal (horizontal for steep edges),
/// positive inside.
template <class T>
T edge_offset(const Vec2<T>& a, const Vec2<T>& b, int inside_sign, const Vec2<T>& p) {
  const Vec2<T> e = b - a, w = p - a;
  const T axis = std::abs(e.y()) >= std::abs(e.x()) ? std::abs(e.y()) : std::abs(e.x());
  return T(inside_sign) * (e.x() * w.y() - e.y() * w.x()) / axis;
}

}  // namespace detail

/// Coverage mask with a one-pixel linear blend across silhouette edges.
///
/// Each silhouette edge is scanned along its minor pixel axis (rows for steep
/// edges, columns for flat ones). In every scanline the edge crosses, the
/// pixel whose center lies within half a pixel of the crossing gets
/// 0.5 + h, where h is the signed offset along the scanline, positive
/// inside. A covered pixel qualifies only if its outward neighbor in the
/// scanline is uncovered, and an uncovered one only if its inward neighbor is
/// covered; this drops edges hidden behind other surfaces. Among several
/// candidate edges the smallest |h| wins, then the lower edge index. All other
/// pixels stay exactly 0 or 1.
template <class T>
SilhouetteResult<T> silhouette_mask(const Mesh<T>& mesh, const ConnectivityCache& cache, const Camera<T>& camera,
                                    const Visibility& vis) {
  const int W = camera.width, H = camera.height;
  if (vis.width != W || vis.height != H) throw Error(ErrorCode::invalid_argument, "visibility buffer size does not match the camera");
  SilhouetteResult<T> out;
  out.width = W;
  out.height = H;
  out.mask.resize(vis.triangle.size());
  for (std::size_t p = 0; p < out.mask.size(); ++p) out.mask[p] = vis.triangle[p] >= 0 ? T(1) : T(0);
  out.pixel_edge.assign(vis.triangle.size(), -1);
  out.edges = silhouette_edges(mesh, cache, camera);

  const Camera<double> cam = camera.template cast<double>();
  std::vector<double> best(vis.triangle.size(), std::numeric_limits<double>::infinity());
  auto covered = [&](int x, int y) {
    return x >= 0 && y >= 0 && x < W && y < H && vis.triangle[static_cast<std::size_t>(y) * W + x] >= 0;
  };
  auto consider = [&](int ei, int x, int y, double h, int ix, int iy) {
    if (x < 0 || y < 0 || x >= W || y >= H || !(h > -0.5 && h < 0.5)) return;
    const bool cov = covered(x, y);
    const bool qualifies = cov ? (h >= 0.0 && !covered(x - ix, y - iy)) : (h <= 0.0 && covered(x + ix, y + iy));
    if (!qualifies) return;
    const std::size_t idx = static_cast<std::size_t>(y) * W + x;
    if (std::abs(h) < best[idx]) {  // strict: lower edge index keeps ties
      best[idx] = std::abs(h);
      out.pixel_edge[idx] = ei;
      out.mask[idx] = static_cast<T>(0.5 + h);
    }
  };
  for (int ei = 0; ei < static_cast<int>(out.edges.size()); ++ei) {
    const auto& edge = out.edges[ei];
    const Vec2<double> a = project(cam, Vec3<double>(mesh.vertices[edge.a].template cast<double>())).pixel;
    const Vec2<double> b = project(cam, Vec3<double>(mesh.vertices[edge.b].template cast<double>())).pixel;
    const Vec2<double> e = b - a;
    const bool steep = std::abs(e.y()) >= std::abs(e.x());
    // major = coordinate the scanlines step through, minor = along the scanline
    const int major = steep ? 1 : 0, minor = 1 - major;
    // inside direction along the scanline
    const double inward_minor = double(edge.inside_sign) * (steep ? -e.y() : e.x());
    const int step = inward_minor > 0.0 ? 1 : -1;
    const double lo = std::min(a[major], b[major]), hi = std::max(a[major], b[major]);
    const int first = std::max(0, static_cast<int>(std::ceil(lo - 0.5)));
    const int last = std::min((steep ? H : W) - 1, static_cast<int>(std::floor(hi - 0.5)));
    for (int line = first; line <= last; ++line) {
      const double c = line + 0.5;
      const double t = (c - a[major]) / e[major];
      const double cross_minor = a[minor] + t * e[minor];  // where the edge crosses this scanline
      const int base = static_cast<int>(std::floor(cross_minor - 0.5));
      for (int k = base; k <= base + 1; ++k) {
        const Vec2<double> p = steep ? Vec2<double>(k + 0.5, c) : Vec2<double>(c, k + 0.5);
        const double h = detail::edge_offset(a, b, edge.inside_sign, p);
        if (steep)
          consider(ei, k, line, h, step, 0);
        else
          consider(ei, line, k, h, 0, step);
      }
    }
  }
  return out;
}

/// Mask values under a frozen edge assignment: band pixels re-evaluate
/// 0.5 + h at the current vertex positions (unclamped), others keep theirs.
template <class T>
std::vector<T> silhouette_mask_frozen(const Mesh<T>& mesh, const Camera<T>& cam, const SilhouetteResult<T>& frozen) {
  std::vector<T> mask = frozen.mask;
  for (std::size_t p = 0; p < mask.size(); ++p) {
    const int ei = frozen.pixel_edge[p];
    if (ei < 0) continue;
    const auto& edge = frozen.edges[ei];
    const Vec2<T> a = project(cam, mesh.vertices[edge.a]).pixel;
    const Vec2<T> b = project(cam, mesh.vertices[edge.b]).pixel;
    const Vec2<T> px(T(p % frozen.width) + T(0.5), T(p / frozen.width) + T(0.5));
    mask[p] = T(0.5) + detail::edge_offset(a, b, edge.inside_sign, px);
  }
  return mask;
}

/// Adds d(sum_p grad_mask[p] * mask[p]) / dV into grad_vertices.
template <class T>
void silhouette_mask_backward(const Mesh<T>& mesh, const Camera<T>& cam, const SilhouetteResult<T>& result,
                              const std::vector<T>& grad_mask, std::vector<Vec3<T>>& grad_vertices) {
  // Endpoint gradients are gathered in pixel space, then pulled back once per edge.
  std::vector<Vec2<T>> g_a(result.edges.size(), Vec2<T>::Zero()), g_b(result.edges.size(), Vec2<T>::Zero());
  std::vector<Vec2<T>> pa(result.edges.size()), pb(result.edges.size());
  std::vector<char> projected(result.edges.size(), 0);
  for (std::size_t p = 0; p < grad_mask.size(); ++p) {
    const int ei = result.pixel_edge[p];
    if (ei < 0 || grad_mask[p] == T(0)) continue;
    const auto& edge = result.edges[ei];
    if (!projected[ei]) {
      pa[ei] = project(cam, mesh.vertices[edge.a]).pixel;
      pb[ei] = project(cam, mesh.vertices[edge.b]).pixel;
      projected[ei] = 1;
    }
    // h = sigma * cross(e, w) / |e_k|, e = b - a, w = p - a, k the major axis.
    const Vec2<T> e = pb[ei] - pa[ei];
    const Vec2<T> w = Vec2<T>(T(p % result.width) + T(0.5), T(p / result.width) + T(0.5)) - pa[ei];
    const int k = std::abs(e.y()) >= std::abs(e.x()) ? 1 : 0;
    const T axis = std::abs(e[k]);
    const T cr = e.x() * w.y() - e.y() * w.x();
    const T sigma = T(edge.inside_sign) * grad_mask[p];
    Vec2<T> dh_de = Vec2<T>(w.y(), -w.x()) / axis;
    dh_de[k] -= cr * (e[k] > T(0) ? T(1) : T(-1)) / (axis * axis);
    dh_de *= sigma;
    const Vec2<T> dh_dw = sigma * Vec2<T>(-e.y(), e.x()) / axis;
    g_a[ei] -= dh_de + dh_dw;
    g_b[ei] += dh_de;
  }
  for (std::size_t ei = 0; ei < result.edges.size(); ++ei) {
    if (!projected[ei]) continue;
    const auto& edge = result.edges[ei];
    const auto Ja = project_jacobian(cam, mesh.vertices[edge.a]);
    const auto Jb = project_jacobian(cam, mesh.vertices[edge.b]);
    grad_vertices[edge.a] += Ja.template topRows<2>().transpose() * g_a[ei];
    grad_vertices[edge.b] += Jb.template topRows<2>().transpose() * g_b[ei];
  }
}

/// Full g-buffer: visibility, interpolated attributes and antialiased mask.
template <class T>
GBuffer<T> rasterize(const Mesh<T>& mesh, const ConnectivityCache& cache, const Camera<T>& camera) {
  validate(camera);
  GBuffer<T> gb;
  gb.width = camera.width;
  gb.height = camera.height;
  gb.camera_center = camera.center();
  const Visibility vis = rasterize_visibility(mesh, camera);
  gb.triangle = vis.triangle;
  gb.depth.resize(vis.depth.size());
  for (std::size_t p = 0; p < vis.depth.size(); ++p)
    gb.depth[p] = vis.triangle[p] >= 0 ? static_cast<T>(vis.depth[p]) : std::numeric_limits<T>::infinity();
  const auto vn = vertex_normals(mesh);
  fill_attributes(gb, mesh, vn.normals, camera);
  gb.mask = silhouette_mask(mesh, cache, camera, vis).mask;
  return gb;
}

template <class T>
GBuffer<T> rasterize(const Mesh<T>& mesh, const Camera<T>& camera) {
  return rasterize(mesh, build_connectivity(mesh), camera);
}

}  // namespace mvr
