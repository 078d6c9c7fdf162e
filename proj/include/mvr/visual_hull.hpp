#pragma once

#include "mvr/dataset.hpp"
#include "mvr/marching_cubes.hpp"
#include "mvr/remesh.hpp"

#include <limits>

namespace mvr {

/// 1D squared distance transform of a sampled function (lower envelope of
/// parabolas). `f` holds 0 at sites and +inf elsewhere on the first call.
inline void distance_transform_1d(const std::vector<double>& f, std::vector<double>& d) {
  const int n = static_cast<int>(f.size());
  constexpr double inf = std::numeric_limits<double>::infinity();
  std::vector<int> v(n);
  std::vector<double> z(n + 1);
  int k = -1;
  for (int q = 0; q < n; ++q) {
    if (f[q] == inf) continue;
    if (k < 0) {
      k = 0;
      v[0] = q;
      z[0] = -inf;
      z[1] = inf;
      continue;
    }
    double s = 0.0;
    while (true) {
      s = ((f[q] + double(q) * q) - (f[v[k]] + double(v[k]) * v[k])) / (2.0 * q - 2.0 * v[k]);
      if (s > z[k] || k == 0) break;
      --k;
    }
    if (s <= z[k]) {
      v[0] = q;
      z[0] = -inf;
      z[1] = inf;
      k = 0;
      continue;
    }
    ++k;
    v[k] = q;
    z[k] = s;
    z[k + 1] = inf;
  }
  d.assign(n, inf);
  if (k < 0) return;
  int j = 0;
  for (int q = 0; q < n; ++q) {
    while (z[j + 1] < q) ++j;
    const double dq = q - v[j];
    d[q] = dq * dq + f[v[j]];
  }
}

/// Euclidean distance (pixels) from every pixel center to the nearest pixel
/// where `site(x, y)` holds. +inf when there is no site.
template <class Pred>
std::vector<double> distance_transform(int width, int height, Pred site) {
  constexpr double inf = std::numeric_limits<double>::infinity();
  std::vector<double> grid(static_cast<std::size_t>(width) * height);
  std::vector<double> f, d;
  for (int y = 0; y < height; ++y) {
    f.assign(width, inf);
    for (int x = 0; x < width; ++x)
      if (site(x, y)) f[x] = 0.0;
    distance_transform_1d(f, d);
    for (int x = 0; x < width; ++x) grid[static_cast<std::size_t>(y) * width + x] = d[x];
  }
  for (int x = 0; x < width; ++x) {
    f.resize(height);
    for (int y = 0; y < height; ++y) f[y] = grid[static_cast<std::size_t>(y) * width + x];
    distance_transform_1d(f, d);
    for (int y = 0; y < height; ++y) grid[static_cast<std::size_t>(y) * width + x] = std::sqrt(d[y]);
  }
  return grid;
}

/// Signed distance in pixels to the mask boundary, positive inside. A pixel
/// center sits half a pixel inside its own square, hence the 0.5 offsets.
inline std::vector<double> signed_mask_distance(const Image& mask) {
  const auto to_outside = distance_transform(mask.width, mask.height, [&](int x, int y) { return mask.at(x, y) < 0.5f; });
  const auto to_inside = distance_transform(mask.width, mask.height, [&](int x, int y) { return mask.at(x, y) >= 0.5f; });
  std::vector<double> sd(mask.pixel_count());
  const double far = static_cast<double>(mask.width + mask.height);
  for (std::size_t i = 0; i < sd.size(); ++i) {
    if (mask.data[i] >= 0.5f)
      sd[i] = std::isfinite(to_outside[i]) ? to_outside[i] - 0.5 : far;
    else
      sd[i] = std::isfinite(to_inside[i]) ? -(to_inside[i] - 0.5) : -far;
  }
  return sd;
}

struct VisualHullOptions {
  int resolution = 32;  // grid nodes per axis
  Vec3<double> bbox_min = Vec3<double>::Constant(-1.0);
  Vec3<double> bbox_max = Vec3<double>::Constant(1.0);
  // Pushes the iso-surface outward by up to this many cells. Occupancy itself
  // is unaffected: the surface never passes an unoccupied node.
  double margin_cells = 0.5;
  // Remesh the extracted surface to uniform edges of about one cell.
  bool remesh = true;
};

/// Occupancy field for the hull. A node's value is at least 0.5 iff it
/// projects inside every mask (with margin 0); it falls off linearly with the
/// world-space distance to the nearest silhouette over one cell. Nodes that
/// project outside an image or behind a camera get 0. A one-cell padding ring
/// around the box holds values just below 0.5, which closes the surface and
/// pins it to the box faces where the hull reaches them.
template <class T>
ScalarGrid visual_hull_grid(const std::vector<View<T>>& views, const VisualHullOptions& options = {}) {
  if (views.size() < 2) throw Error(ErrorCode::invalid_argument, "visual hull needs at least two views");
  if (options.resolution < 2) throw Error(ErrorCode::invalid_argument, "visual hull resolution must be >= 2");
  const Vec3<double> cell = (options.bbox_max - options.bbox_min) / double(options.resolution - 1);
  const int n = options.resolution + 2;
  ScalarGrid grid({n, n, n}, options.bbox_min - cell, options.bbox_max + cell, 1.0);
  const double cell_size = cell.minCoeff();
  const double kBelowIso = std::nextafter(0.5, 0.0);

  for (const auto& view : views) {
    const Camera<double> cam = view.camera.template cast<double>();
    validate(cam);
    if (view.mask.width != cam.width || view.mask.height != cam.height)
      throw Error(ErrorCode::invalid_argument, "view " + std::to_string(view.id) + ": mask size does not match the camera");
    const auto sd = signed_mask_distance(view.mask);
    const double focal = std::sqrt(std::abs(cam.K(0, 0) * cam.K(1, 1)));
    auto sd_at = [&](int x, int y) { return sd[static_cast<std::size_t>(y) * cam.width + x]; };
    for (int k = 0; k < n; ++k)
      for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i) {
          double& value = grid.at(i, j, k);
          if (value <= 0.0) continue;
          if (i == 0 || j == 0 || k == 0 || i == n - 1 || j == n - 1 || k == n - 1) {
            value = kBelowIso;
            continue;
          }
          const auto proj = project(cam, grid.node(i, j, k));
          const double u = proj.pixel.x(), v = proj.pixel.y();
          if (proj.behind || !(u >= 0.0 && v >= 0.0 && u <= cam.width && v <= cam.height)) {
            value = 0.0;
            continue;
          }
          // A node on a pixel border belongs to every pixel whose closed square contains it.
          const int x1 = std::min(static_cast<int>(u), cam.width - 1), y1 = std::min(static_cast<int>(v), cam.height - 1);
          const int x0 = (u == std::floor(u) && x1 > 0) ? static_cast<int>(u) - 1 : x1;
          const int y0 = (v == std::floor(v) && y1 > 0) ? static_cast<int>(v) - 1 : y1;
          double sd_px = sd_at(x1, y1);
          for (int y = y0; y <= y1; ++y)
            for (int x = x0; x <= x1; ++x) sd_px = std::max(sd_px, sd_at(x, y));
          const double sd_world = sd_px * proj.depth / focal;
          const double field = 0.5 + 0.5 * std::clamp((sd_world + options.margin_cells * cell_size) / cell_size, -1.0, 1.0);
          value = std::min(value, sd_px >= 0.0 ? std::max(field, 0.5) : std::min(field, kBelowIso));
        }
  }
  return grid;
}

/// Hull mesh from the masks: occupancy grid, marching cubes at iso 0.5 and
/// an optional cleanup remesh.
template <class T>
Mesh<double> visual_hull(const std::vector<View<T>>& views, const VisualHullOptions& options = {}) {
  const ScalarGrid grid = visual_hull_grid(views, options);
  if (*std::max_element(grid.values.begin(), grid.values.end()) < 0.5)
    throw Error(ErrorCode::empty_occupancy,
                "visual hull is empty: no grid node projects inside every mask; check the bounding box and the masks");
  Mesh<double> mesh = marching_cubes(grid, 0.5);
  if (options.remesh) {
    const double cell = ((options.bbox_max - options.bbox_min) / double(options.resolution - 1)).minCoeff();
    mesh = remesh(mesh, cell);
  }
  return mesh;
}

}  // namespace mvr
