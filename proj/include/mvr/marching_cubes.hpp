#pragma once

#include "mvr/mesh.hpp"

namespace mvr {

/// Scalar samples on the nodes of a regular axis-aligned grid.
struct ScalarGrid {
  std::array<int, 3> resolution{2, 2, 2};  // nodes per axis
  Vec3<double> min = Vec3<double>::Constant(-1.0);
  Vec3<double> max = Vec3<double>::Constant(1.0);
  std::vector<double> values;

  ScalarGrid() = default;
  ScalarGrid(std::array<int, 3> res, const Vec3<double>& lo, const Vec3<double>& hi, double fill = 0.0)
      : resolution(res), min(lo), max(hi) {
    validate();
    values.assign(static_cast<std::size_t>(res[0]) * res[1] * res[2], fill);
  }

  void validate() const {
    for (int a = 0; a < 3; ++a) {
      if (resolution[a] < 2) throw Error(ErrorCode::invalid_argument, "grid resolution must be >= 2 per axis");
      if (!(min[a] < max[a])) throw Error(ErrorCode::invalid_argument, "grid bounds must satisfy min < max");
    }
  }

  std::size_t index(int i, int j, int k) const {
    return static_cast<std::size_t>(i) + static_cast<std::size_t>(resolution[0]) * (j + static_cast<std::size_t>(resolution[1]) * k);
  }
  double& at(int i, int j, int k) { return values[index(i, j, k)]; }
  double at(int i, int j, int k) const { return values[index(i, j, k)]; }

  Vec3<double> spacing() const {
    return (max - min).cwiseQuotient(Vec3<double>(resolution[0] - 1, resolution[1] - 1, resolution[2] - 1));
  }
  Vec3<double> node(int i, int j, int k) const {
    return min + spacing().cwiseProduct(Vec3<double>(i, j, k));
  }
};

/// Extracts the iso-surface separating nodes with value >= iso_level
/// (inside) from the rest. Each cube is split into six tetrahedra sharing its
/// main diagonal, a decomposition that agrees on shared cube faces, so the
/// output is a closed 2-manifold (away from the grid border) with normals
/// pointing toward lower values. Vertices are welded per grid edge.
inline Mesh<double> marching_cubes(const ScalarGrid& grid, double iso_level) {
  grid.validate();
  if (grid.values.size() != static_cast<std::size_t>(grid.resolution[0]) * grid.resolution[1] * grid.resolution[2])
    throw Error(ErrorCode::invalid_argument, "grid value count does not match its resolution");

  // Corner c of a cube sits at offset (c & 1, (c >> 1) & 1, (c >> 2) & 1).
  static constexpr int kTets[6][4] = {{0, 1, 3, 7}, {0, 1, 5, 7}, {0, 2, 3, 7},
                                      {0, 2, 6, 7}, {0, 4, 5, 7}, {0, 4, 6, 7}};
  // Keeps welded vertices from landing exactly on a node.
  constexpr double kMinT = 0.01;

  Mesh<double> mesh;
  std::unordered_map<std::uint64_t, int> welded;
  auto vertex_on = [&](std::size_t ga, std::size_t gb, const Vec3<double>& pa, const Vec3<double>& pb, double va,
                       double vb) {
    const std::uint64_t key = ga < gb ? (static_cast<std::uint64_t>(ga) << 32) | gb : (static_cast<std::uint64_t>(gb) << 32) | ga;
    auto it = welded.find(key);
    if (it != welded.end()) return it->second;
    double t = (iso_level - va) / (vb - va);
    t = std::clamp(t, kMinT, 1.0 - kMinT);
    const int idx = static_cast<int>(mesh.vertices.size());
    mesh.vertices.push_back(pa + t * (pb - pa));
    welded.emplace(key, idx);
    return idx;
  };

  const auto& res = grid.resolution;
  for (int k = 0; k + 1 < res[2]; ++k) {
    for (int j = 0; j + 1 < res[1]; ++j) {
      for (int i = 0; i + 1 < res[0]; ++i) {
        std::size_t gid[8];
        double val[8];
        Vec3<double> pos[8];
        int inside_count = 0;
        for (int c = 0; c < 8; ++c) {
          const int ci = i + (c & 1), cj = j + ((c >> 1) & 1), ck = k + ((c >> 2) & 1);
          gid[c] = grid.index(ci, cj, ck);
          val[c] = grid.values[gid[c]];
          pos[c] = grid.node(ci, cj, ck);
          inside_count += val[c] >= iso_level;
        }
        if (inside_count == 0 || inside_count == 8) continue;

        for (const auto& tet : kTets) {
          int in[4], out[4], ni = 0, no = 0;
          for (int c : tet) (val[c] >= iso_level ? in[ni++] : out[no++]) = c;
          if (ni == 0 || no == 0) continue;
          auto v = [&](int a, int b) { return vertex_on(gid[a], gid[b], pos[a], pos[b], val[a], val[b]); };
          Vec3<double> inward = Vec3<double>::Zero();
          for (int q = 0; q < ni; ++q) inward += pos[in[q]] / ni;
          for (int q = 0; q < no; ++q) inward -= pos[out[q]] / no;
          auto emit = [&](int a, int b, int c) {
            const Vec3<double> n = (mesh.vertices[b] - mesh.vertices[a]).cross(mesh.vertices[c] - mesh.vertices[a]);
            if (n.dot(inward) > 0) std::swap(b, c);
            mesh.faces.push_back({a, b, c});
          };
          if (ni == 1) {
            emit(v(in[0], out[0]), v(in[0], out[1]), v(in[0], out[2]));
          } else if (ni == 3) {
            emit(v(in[0], out[0]), v(in[1], out[0]), v(in[2], out[0]));
          } else {
            // Quad in cyclic order i0o0 - i0o1 - i1o1 - i1o0.
            const int q0 = v(in[0], out[0]), q1 = v(in[0], out[1]), q2 = v(in[1], out[1]), q3 = v(in[1], out[0]);
            emit(q0, q1, q2);
            emit(q0, q2, q3);
          }
        }
      }
    }
  }
  if (mesh.faces.empty())
    throw Error(ErrorCode::empty_mesh, "iso-surface is empty: every grid value lies on one side of the iso level");
  return mesh;
}

}  // namespace mvr
