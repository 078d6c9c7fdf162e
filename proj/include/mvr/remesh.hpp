#pragma once

#include "mvr/aabb_tree.hpp"
#include "mvr/geometry_losses.hpp"

#include <cstdio>

namespace mvr {

struct RemeshOptions {
  int iterations = 5;
  double split_ratio = 4.0 / 3.0;
  double collapse_ratio = 4.0 / 5.0;
  bool project_to_surface = true;
};

namespace detail {

/// Face list with vertex->face incidence. Local operations keep the
/// incidence lists in sync; dead faces/vertices are compacted at the end.
class RemeshState {
 public:
  explicit RemeshState(const Mesh<double>& mesh) : pos_(mesh.vertices), faces_(mesh.faces) {
    alive_face_.assign(faces_.size(), 1);
    alive_vertex_.assign(pos_.size(), 1);
    vf_.assign(pos_.size(), {});
    for (std::size_t f = 0; f < faces_.size(); ++f)
      for (int v : faces_[f]) vf_[v].push_back(static_cast<int>(f));
    // Vertices referenced by no face are left untouched and dropped at the end.
    for (std::size_t v = 0; v < pos_.size(); ++v)
      if (vf_[v].empty()) alive_vertex_[v] = 0;
  }

  std::vector<Edge> edge_list() const {
    std::vector<Edge> out;
    for (std::size_t f = 0; f < faces_.size(); ++f) {
      if (!alive_face_[f]) continue;
      for (int k = 0; k < 3; ++k) out.push_back(make_edge(faces_[f][k], faces_[f][(k + 1) % 3]));
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
  }

  double length(int a, int b) const { return (pos_[a] - pos_[b]).norm(); }

  std::vector<int> edge_faces(int a, int b) const {
    std::vector<int> out;
    for (int f : vf_[a]) {
      const auto& face = faces_[f];
      if (face[0] == b || face[1] == b || face[2] == b) out.push_back(f);
    }
    return out;
  }

  std::vector<int> neighbors(int v) const {
    std::vector<int> out;
    for (int f : vf_[v])
      for (int u : faces_[f])
        if (u != v) out.push_back(u);
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
  }

  bool is_boundary(int v) const {
    // An edge (v, u) is a boundary edge iff u appears in exactly one face around v.
    std::vector<int> around;
    for (int f : vf_[v])
      for (int u : faces_[f])
        if (u != v) around.push_back(u);
    std::sort(around.begin(), around.end());
    for (std::size_t i = 0; i < around.size();) {
      std::size_t j = i;
      while (j < around.size() && around[j] == around[i]) ++j;
      if (j - i == 1) return true;
      i = j;
    }
    return false;
  }

  int third_vertex(int f, int a, int b) const {
    for (int u : faces_[f])
      if (u != a && u != b) return u;
    return -1;
  }

  Vec3<double> face_cross(const Face& face) const {
    return (pos_[face[1]] - pos_[face[0]]).cross(pos_[face[2]] - pos_[face[0]]);
  }

  // --- split -------------------------------------------------------------

  void split(int a, int b) {
    const int m = static_cast<int>(pos_.size());
    pos_.push_back(0.5 * (pos_[a] + pos_[b]));
    alive_vertex_.push_back(1);
    vf_.emplace_back();
    for (int f : edge_faces(a, b)) {
      Face face = faces_[f];
      int k = 0;
      while (!((face[k] == a && face[(k + 1) % 3] == b) || (face[k] == b && face[(k + 1) % 3] == a))) ++k;
      const int p = face[k], q = face[(k + 1) % 3], r = face[(k + 2) % 3];
      faces_[f] = {p, m, r};
      const int g = static_cast<int>(faces_.size());
      faces_.push_back({m, q, r});
      alive_face_.push_back(1);
      erase_incidence(q, f);
      vf_[q].push_back(g);
      vf_[r].push_back(g);
      vf_[m].push_back(f);
      vf_[m].push_back(g);
    }
  }

  // --- collapse ------------------------------------------------------------

  /// Merges vertex `a` into `b`, moving `b` to `target`. Returns false (and
  /// leaves the mesh untouched) if the edit would break manifoldness, flip a
  /// face, or create an edge longer than `max_length`.
  bool try_collapse(int a, int b, const Vec3<double>& target, double max_length) {
    const auto shared = edge_faces(a, b);
    if (shared.empty() || shared.size() > 2) return false;
    const auto na = neighbors(a);
    const auto nb = neighbors(b);
    std::vector<int> common;
    std::set_intersection(na.begin(), na.end(), nb.begin(), nb.end(), std::back_inserter(common));
    std::vector<int> opposite;
    for (int f : shared) opposite.push_back(third_vertex(f, a, b));
    std::sort(opposite.begin(), opposite.end());
    if (common != opposite) return false;  // link condition
    if (alive_vertices() <= 4) return false;
    for (int c : opposite)
      if (neighbors(c).size() <= 3) return false;
    if (shared.size() == 2 && na.size() + nb.size() - 4 < 3) return false;

    for (int w : na)
      if (w != b && (target - pos_[w]).norm() > max_length) return false;
    for (int w : nb)
      if (w != a && (target - pos_[w]).norm() > max_length) return false;

    // No face may flip or degenerate.
    auto check = [&](int v) {
      for (int f : vf_[v]) {
        const Face& face = faces_[f];
        const bool has_a = face[0] == a || face[1] == a || face[2] == a;
        const bool has_b = face[0] == b || face[1] == b || face[2] == b;
        if (has_a && has_b) continue;
        const Vec3<double> before = face_cross(face);
        Face moved = face;
        for (int& u : moved)
          if (u == a) u = b;
        const Vec3<double> saved = pos_[b];
        pos_[b] = target;
        const Vec3<double> after = face_cross(moved);
        pos_[b] = saved;
        if (after.norm() * 0.5 < kDegenerateArea) return false;
        if (before.dot(after) <= 0.0) return false;
      }
      return true;
    };
    if (!check(a) || !check(b)) return false;

    for (int f : shared) {
      alive_face_[f] = 0;
      for (int u : faces_[f]) erase_incidence(u, f);
    }
    for (int f : std::vector<int>(vf_[a])) {
      for (int& u : faces_[f])
        if (u == a) u = b;
      vf_[b].push_back(f);
    }
    vf_[a].clear();
    alive_vertex_[a] = 0;
    pos_[b] = target;
    return true;
  }

  // --- flip ----------------------------------------------------------------

  /// Flips an interior edge when it moves the four involved valences closer
  /// to their targets (6 interior, 4 boundary) and the quad stays unfolded.
  bool try_flip(int a, int b) {
    const auto shared = edge_faces(a, b);
    if (shared.size() != 2) return false;
    int f1 = shared[0], f2 = shared[1];
    // f1 must contain the directed edge a -> b.
    auto has_directed = [&](int f, int x, int y) {
      const Face& face = faces_[f];
      for (int k = 0; k < 3; ++k)
        if (face[k] == x && face[(k + 1) % 3] == y) return true;
      return false;
    };
    if (!has_directed(f1, a, b)) std::swap(f1, f2);
    if (!has_directed(f1, a, b) || !has_directed(f2, b, a)) return false;
    const int c = third_vertex(f1, a, b);
    const int d = third_vertex(f2, a, b);
    if (c == d) return false;
    const auto nc = neighbors(c);
    if (std::binary_search(nc.begin(), nc.end(), d)) return false;

    const int va = static_cast<int>(neighbors(a).size());
    const int vb = static_cast<int>(neighbors(b).size());
    const int vc = static_cast<int>(nc.size());
    const int vd = static_cast<int>(neighbors(d).size());
    if (va <= 3 || vb <= 3) return false;
    auto target = [&](int v) { return is_boundary(v) ? 4 : 6; };
    const int ta = target(a), tb = target(b), tc = target(c), td = target(d);
    auto sq = [](int x) { return x * x; };
    const int before = sq(va - ta) + sq(vb - tb) + sq(vc - tc) + sq(vd - td);
    const int after = sq(va - 1 - ta) + sq(vb - 1 - tb) + sq(vc + 1 - tc) + sq(vd + 1 - td);
    if (after >= before) return false;

    const Face n1 = {a, d, c};
    const Face n2 = {d, b, c};
    const Vec3<double> o1 = face_cross(faces_[f1]), o2 = face_cross(faces_[f2]);
    const Vec3<double> c1 = face_cross(n1), c2 = face_cross(n2);
    if (c1.norm() * 0.5 < kDegenerateArea || c2.norm() * 0.5 < kDegenerateArea) return false;
    if (c1.dot(o1) <= 0 || c1.dot(o2) <= 0 || c2.dot(o1) <= 0 || c2.dot(o2) <= 0) return false;

    faces_[f1] = n1;
    faces_[f2] = n2;
    erase_incidence(b, f1);
    vf_[d].push_back(f1);
    erase_incidence(a, f2);
    vf_[c].push_back(f2);
    return true;
  }

  // --- relaxation ----------------------------------------------------------

  void tangential_relaxation(const AabbTree* surface) {
    const std::size_t n = pos_.size();
    std::vector<Vec3<double>> normals(n, Vec3<double>::Zero());
    for (std::size_t f = 0; f < faces_.size(); ++f) {
      if (!alive_face_[f]) continue;
      const Vec3<double> c = face_cross(faces_[f]);
      for (int v : faces_[f]) normals[v] += c;
    }
    std::vector<Vec3<double>> next = pos_;
    for (std::size_t v = 0; v < n; ++v) {
      if (!alive_vertex_[v] || is_boundary(static_cast<int>(v))) continue;
      const auto nb = neighbors(static_cast<int>(v));
      if (nb.empty()) continue;
      Vec3<double> centroid = Vec3<double>::Zero();
      for (int u : nb) centroid += pos_[u];
      centroid /= static_cast<double>(nb.size());
      Vec3<double> normal = normals[v];
      const double len = normal.norm();
      if (len > 0) normal /= len;
      const Vec3<double> d = centroid - pos_[v];
      next[v] = pos_[v] + d - normal * normal.dot(d);
      if (surface) next[v] = surface->closest(next[v]).point;
    }
    // Keep any move that would flip an incident face at its old position.
    for (std::size_t v = 0; v < n; ++v) {
      if (!alive_vertex_[v] || next[v] == pos_[v]) continue;
      bool ok = true;
      for (int f : vf_[v]) {
        const Face& face = faces_[f];
        const Vec3<double> before = face_cross(face);
        Vec3<double> p[3];
        for (int k = 0; k < 3; ++k) p[k] = face[k] == static_cast<int>(v) ? next[v] : pos_[face[k]];
        const Vec3<double> after = (p[1] - p[0]).cross(p[2] - p[0]);
        if (after.dot(before) <= 0.0 || after.norm() * 0.5 < kDegenerateArea) {
          ok = false;
          break;
        }
      }
      if (ok) pos_[v] = next[v];
    }
  }

  int alive_vertices() const { return static_cast<int>(std::count(alive_vertex_.begin(), alive_vertex_.end(), 1)); }
  bool alive(int v) const { return alive_vertex_[v] != 0; }
  const Vec3<double>& position(int v) const { return pos_[v]; }

  Mesh<double> compact() const {
    Mesh<double> out;
    std::vector<int> remap(pos_.size(), -1);
    for (std::size_t v = 0; v < pos_.size(); ++v) {
      if (!alive_vertex_[v]) continue;
      remap[v] = static_cast<int>(out.vertices.size());
      out.vertices.push_back(pos_[v]);
    }
    for (std::size_t f = 0; f < faces_.size(); ++f) {
      if (!alive_face_[f]) continue;
      out.faces.push_back({remap[faces_[f][0]], remap[faces_[f][1]], remap[faces_[f][2]]});
    }
    return out;
  }

 private:
  void erase_incidence(int v, int f) {
    auto& list = vf_[v];
    list.erase(std::remove(list.begin(), list.end(), f), list.end());
  }

  std::vector<Vec3<double>> pos_;
  std::vector<Face> faces_;
  std::vector<char> alive_face_;
  std::vector<char> alive_vertex_;
  std::vector<std::vector<int>> vf_;
};

}  // namespace detail

/// Isotropic remeshing toward `target_edge_length`: repeated rounds of
/// long-edge splits, short-edge collapses, valence-driven flips and
/// tangential relaxation, with vertices projected back onto the input surface.
/// Local edits that would produce a non-manifold or folded configuration are
/// skipped.
template <class T>
Mesh<T> remesh(const Mesh<T>& input, T target_edge_length, const RemeshOptions& options = {}) {
  if (!(target_edge_length > T(0)))
    throw Error(ErrorCode::invalid_argument, "remesh target edge length must be positive");
  const Mesh<double> source = input.template cast<double>();
  validate(source);
  {
    const auto report = check_manifold(source);
    if (!report.ok) throw Error(ErrorCode::non_manifold, "remesh input is not manifold: " + report.message);
  }
  const double target = static_cast<double>(target_edge_length);
  const double high = options.split_ratio * target;
  const double low = options.collapse_ratio * target;

  AabbTree surface;
  if (options.project_to_surface) surface = AabbTree(source);
  detail::RemeshState state(source);

  for (int it = 0; it < options.iterations; ++it) {
    for (int pass = 0; pass < 32; ++pass) {
      std::vector<std::pair<double, Edge>> long_edges;
      for (const auto& e : state.edge_list()) {
        const double len = state.length(e[0], e[1]);
        if (len > high) long_edges.push_back({len, e});
      }
      if (long_edges.empty()) break;
      std::sort(long_edges.begin(), long_edges.end(),
                [](const auto& x, const auto& y) { return x.first != y.first ? x.first > y.first : x.second < y.second; });
      for (const auto& [len, e] : long_edges) {
        if (state.edge_faces(e[0], e[1]).empty()) continue;
        if (state.length(e[0], e[1]) > high) state.split(e[0], e[1]);
      }
    }

    {
      std::vector<std::pair<double, Edge>> short_edges;
      for (const auto& e : state.edge_list()) {
        const double len = state.length(e[0], e[1]);
        if (len < low) short_edges.push_back({len, e});
      }
      std::sort(short_edges.begin(), short_edges.end(),
                [](const auto& x, const auto& y) { return x.first != y.first ? x.first < y.first : x.second < y.second; });
      for (const auto& [len0, e] : short_edges) {
        int a = e[0], b = e[1];
        if (!state.alive(a) || !state.alive(b)) continue;
        const auto shared = state.edge_faces(a, b);
        if (shared.empty() || state.length(a, b) >= low) continue;
        const bool ba = state.is_boundary(a), bb = state.is_boundary(b);
        Vec3<double> target_pos;
        if (shared.size() == 1) {
          target_pos = state.position(b);  // boundary edge: keep the outline
        } else if (ba && bb) {
          continue;
        } else if (ba) {
          std::swap(a, b);
          target_pos = state.position(b);
        } else if (bb) {
          target_pos = state.position(b);
        } else {
          target_pos = 0.5 * (state.position(a) + state.position(b));
        }
        state.try_collapse(a, b, target_pos, high);
      }
    }

    for (const auto& e : state.edge_list()) state.try_flip(e[0], e[1]);

    state.tangential_relaxation(options.project_to_surface ? &surface : nullptr);
  }

  return state.compact().template cast<T>();
}

}  // namespace mvr
