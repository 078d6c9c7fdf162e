#pragma once

#include "mvr/common.hpp"

#include <algorithm>
#include <map>
#include <sstream>
#include <unordered_map>
#include <vector>

namespace mvr {

/// Indexed triangle mesh. Faces wind counter-clockwise when seen from the
/// outside, so the right-hand normal points outward.
template <class T>
struct Mesh {
  std::vector<Vec3<T>> vertices;
  std::vector<Face> faces;

  std::size_t num_vertices() const { return vertices.size(); }
  std::size_t num_faces() const { return faces.size(); }
  bool empty() const { return faces.empty(); }

  template <class U>
  Mesh<U> cast() const {
    Mesh<U> out;
    out.vertices.reserve(vertices.size());
    for (const auto& v : vertices) out.vertices.push_back(v.template cast<U>());
    out.faces = faces;
    return out;
  }
};

using Meshf = Mesh<float>;
using Meshd = Mesh<double>;

/// Throws unless every face references three distinct, in-range vertices.
template <class T>
void validate(const Mesh<T>& mesh) {
  const int n = static_cast<int>(mesh.vertices.size());
  for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
    const auto& face = mesh.faces[f];
    for (int k = 0; k < 3; ++k) {
      if (face[k] < 0 || face[k] >= n) {
        throw Error(ErrorCode::invalid_argument,
                    "face " + std::to_string(f) + " references vertex " + std::to_string(face[k]) +
                        " but the mesh has " + std::to_string(n) + " vertices");
      }
    }
    if (face[0] == face[1] || face[1] == face[2] || face[0] == face[2]) {
      throw Error(ErrorCode::invalid_argument, "face " + std::to_string(f) + " repeats a vertex");
    }
  }
}

/// Unique undirected edges, sorted lexicographically.
template <class T>
std::vector<Edge> edges(const Mesh<T>& mesh) {
  std::vector<Edge> out;
  out.reserve(mesh.faces.size() * 3);
  for (const auto& f : mesh.faces)
    for (int k = 0; k < 3; ++k) out.push_back(make_edge(f[k], f[(k + 1) % 3]));
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

template <class T>
T mean_edge_length(const Mesh<T>& mesh) {
  const auto es = edges(mesh);
  if (es.empty()) return T(0);
  double sum = 0.0;
  for (const auto& e : es) sum += static_cast<double>((mesh.vertices[e[0]] - mesh.vertices[e[1]]).norm());
  return static_cast<T>(sum / static_cast<double>(es.size()));
}

/// Hash of the face list and vertex count; identifies a connectivity.
template <class T>
std::uint64_t connectivity_fingerprint(const Mesh<T>& mesh) {
  const std::uint64_t n = mesh.vertices.size();
  std::uint64_t h = fnv1a(&n, sizeof(n));
  if (!mesh.faces.empty()) h = fnv1a(mesh.faces.data(), mesh.faces.size() * sizeof(Face), h);
  return h;
}

struct ManifoldReport {
  bool ok = true;
  bool closed = true;
  std::string message;
};

/// Checks edge-manifoldness (at most two faces per edge), consistent
/// orientation (each directed edge used once), and absence of duplicate faces.
template <class T>
ManifoldReport check_manifold(const Mesh<T>& mesh) {
  ManifoldReport report;
  std::unordered_map<std::uint64_t, int> undirected;
  std::unordered_map<std::uint64_t, int> directed;
  std::map<std::array<int, 3>, int> seen_faces;
  undirected.reserve(mesh.faces.size() * 3);
  directed.reserve(mesh.faces.size() * 3);
  auto fail = [&](const std::string& msg) {
    if (report.ok) report.message = msg;
    report.ok = false;
  };
  for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
    auto sorted = mesh.faces[f];
    std::sort(sorted.begin(), sorted.end());
    if (!seen_faces.emplace(sorted, static_cast<int>(f)).second)
      fail("duplicate face " + std::to_string(f));
    for (int k = 0; k < 3; ++k) {
      const int a = mesh.faces[f][k];
      const int b = mesh.faces[f][(k + 1) % 3];
      if (++undirected[edge_key(a, b)] > 2)
        fail("edge (" + std::to_string(std::min(a, b)) + ", " + std::to_string(std::max(a, b)) +
             ") has more than two incident faces");
      const std::uint64_t dk = (static_cast<std::uint64_t>(static_cast<std::uint32_t>(a)) << 32) |
                               static_cast<std::uint32_t>(b);
      if (++directed[dk] > 1)
        fail("directed edge (" + std::to_string(a) + " -> " + std::to_string(b) +
             ") used twice; orientation is inconsistent");
    }
  }
  for (const auto& [key, count] : undirected)
    if (count == 1) report.closed = false;
  return report;
}

/// Signed enclosed volume (positive for outward-oriented closed meshes).
template <class T>
double signed_volume(const Mesh<T>& mesh) {
  double vol = 0.0;
  for (const auto& f : mesh.faces) {
    const Vec3<double> a = mesh.vertices[f[0]].template cast<double>();
    const Vec3<double> b = mesh.vertices[f[1]].template cast<double>();
    const Vec3<double> c = mesh.vertices[f[2]].template cast<double>();
    vol += a.dot(b.cross(c)) / 6.0;
  }
  return vol;
}

template <class T>
double surface_area(const Mesh<T>& mesh) {
  double area = 0.0;
  for (const auto& f : mesh.faces) {
    const Vec3<double> a = mesh.vertices[f[0]].template cast<double>();
    const Vec3<double> b = mesh.vertices[f[1]].template cast<double>();
    const Vec3<double> c = mesh.vertices[f[2]].template cast<double>();
    area += 0.5 * (b - a).cross(c - a).norm();
  }
  return area;
}

/// Euler characteristic V - E + F over referenced vertices.
template <class T>
int euler_characteristic(const Mesh<T>& mesh) {
  std::vector<char> used(mesh.vertices.size(), 0);
  for (const auto& f : mesh.faces)
    for (int v : f) used[v] = 1;
  const int nv = static_cast<int>(std::count(used.begin(), used.end(), 1));
  return nv - static_cast<int>(edges(mesh).size()) + static_cast<int>(mesh.faces.size());
}

// ---------------------------------------------------------------------------
// Primitives

template <class T>
Mesh<T> icosahedron(T radius = T(1)) {
  const double p = (1.0 + std::sqrt(5.0)) / 2.0;
  const std::vector<Vec3<double>> raw = {
      {-1, p, 0}, {1, p, 0}, {-1, -p, 0}, {1, -p, 0}, {0, -1, p}, {0, 1, p},
      {0, -1, -p}, {0, 1, -p}, {p, 0, -1}, {p, 0, 1}, {-p, 0, -1}, {-p, 0, 1}};
  Mesh<T> m;
  for (const auto& v : raw) m.vertices.push_back((v.normalized() * static_cast<double>(radius)).template cast<T>());
  m.faces = {{0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11}, {1, 5, 9}, {5, 11, 4},
             {11, 10, 2}, {10, 7, 6}, {7, 1, 8},  {3, 9, 4},  {3, 4, 2},   {3, 2, 6}, {3, 6, 8},
             {3, 8, 9},  {4, 9, 5},  {2, 4, 11},  {6, 2, 10}, {8, 6, 7},   {9, 8, 1}};
  return m;
}

/// Loop-style 1:4 subdivision of the icosahedron with vertices pushed onto
/// the sphere. Level l has 10*4^l + 2 vertices.
template <class T>
Mesh<T> icosphere(int subdivisions, T radius = T(1), const Vec3<T>& center = Vec3<T>::Zero()) {
  Mesh<double> m = icosahedron<double>(1.0);
  for (int level = 0; level < subdivisions; ++level) {
    std::unordered_map<std::uint64_t, int> midpoint;
    std::vector<Face> faces;
    faces.reserve(m.faces.size() * 4);
    auto mid = [&](int a, int b) {
      const auto key = edge_key(a, b);
      auto it = midpoint.find(key);
      if (it != midpoint.end()) return it->second;
      const int idx = static_cast<int>(m.vertices.size());
      m.vertices.push_back((m.vertices[a] + m.vertices[b]).normalized());
      midpoint.emplace(key, idx);
      return idx;
    };
    for (const auto& f : m.faces) {
      const int ab = mid(f[0], f[1]);
      const int bc = mid(f[1], f[2]);
      const int ca = mid(f[2], f[0]);
      faces.push_back({f[0], ab, ca});
      faces.push_back({f[1], bc, ab});
      faces.push_back({f[2], ca, bc});
      faces.push_back({ab, bc, ca});
    }
    m.faces = std::move(faces);
  }
  Mesh<T> out;
  out.faces = m.faces;
  for (const auto& v : m.vertices) out.vertices.push_back((v * static_cast<double>(radius)).template cast<T>() + center);
  return out;
}

/// Regular (nx+1) x (ny+1) vertex grid in the z = 0 plane spanning
/// [0, nx*spacing] x [0, ny*spacing], normals +z.
template <class T>
Mesh<T> grid_plane(int nx, int ny, T spacing = T(1)) {
  Mesh<T> m;
  for (int j = 0; j <= ny; ++j)
    for (int i = 0; i <= nx; ++i) m.vertices.push_back(Vec3<T>(T(i) * spacing, T(j) * spacing, T(0)));
  auto id = [nx](int i, int j) { return j * (nx + 1) + i; };
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      m.faces.push_back({id(i, j), id(i + 1, j), id(i + 1, j + 1)});
      m.faces.push_back({id(i, j), id(i + 1, j + 1), id(i, j + 1)});
    }
  }
  return m;
}

}  // namespace mvr
