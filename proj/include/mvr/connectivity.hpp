#pragma once

#include "mvr/mesh.hpp"

namespace mvr {

/// An undirected edge together with its incident faces. `faces[1]` is -1 for
/// boundary edges.
struct EdgeFaces {
  Edge edge;
  std::array<int, 2> faces;
};

/// Pair of faces sharing an interior edge.
struct FacePair {
  int first;
  int second;
  Edge shared;
};

/// Connectivity-only quantities, rebuilt once per remesh and reused by every
/// iteration in between.
///
/// The Laplacian is the row-normalized umbrella operator L = I - D^-1 A, stored
/// in CSR form without the diagonal: (L v)_i = v_i - sum_j w_ij v_j.
struct ConnectivityCache {
  std::size_t vertex_count = 0;
  std::uint64_t fingerprint = 0;
  std::vector<std::vector<int>> neighbors;     // sorted ascending
  std::vector<std::vector<int>> vertex_faces;  // ascending face ids
  std::vector<int> laplacian_offsets;          // size n + 1
  std::vector<int> laplacian_columns;
  std::vector<double> laplacian_weights;
  std::vector<FacePair> adjacent_faces;        // F-bar, ordered by shared edge
  std::vector<EdgeFaces> edge_faces;           // all edges, sorted

  bool matches(std::uint64_t fp, std::size_t n) const { return fp == fingerprint && n == vertex_count; }
};

template <class T>
ConnectivityCache build_connectivity(const Mesh<T>& mesh) {
  validate(mesh);
  ConnectivityCache cache;
  const std::size_t n = mesh.vertices.size();
  cache.vertex_count = n;
  cache.fingerprint = connectivity_fingerprint(mesh);
  cache.neighbors.assign(n, {});
  cache.vertex_faces.assign(n, {});

  struct Incidence {
    Edge edge;
    int face;
  };
  std::vector<Incidence> inc;
  inc.reserve(mesh.faces.size() * 3);
  for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
    const auto& face = mesh.faces[f];
    for (int k = 0; k < 3; ++k) {
      inc.push_back({make_edge(face[k], face[(k + 1) % 3]), static_cast<int>(f)});
      cache.vertex_faces[face[k]].push_back(static_cast<int>(f));
    }
  }
  std::sort(inc.begin(), inc.end(), [](const Incidence& a, const Incidence& b) {
    return a.edge != b.edge ? a.edge < b.edge : a.face < b.face;
  });

  for (std::size_t i = 0; i < inc.size();) {
    std::size_t j = i;
    while (j < inc.size() && inc[j].edge == inc[i].edge) ++j;
    const Edge e = inc[i].edge;
    if (j - i > 2) {
      throw Error(ErrorCode::non_manifold, "non-manifold edge (" + std::to_string(e[0]) + ", " +
                                               std::to_string(e[1]) + ") has " + std::to_string(j - i) +
                                               " incident faces");
    }
    EdgeFaces ef{e, {inc[i].face, -1}};
    if (j - i == 2) {
      ef.faces[1] = inc[i + 1].face;
      cache.adjacent_faces.push_back({inc[i].face, inc[i + 1].face, e});
    }
    cache.edge_faces.push_back(ef);
    cache.neighbors[e[0]].push_back(e[1]);
    cache.neighbors[e[1]].push_back(e[0]);
    i = j;
  }

  cache.laplacian_offsets.assign(n + 1, 0);
  for (std::size_t v = 0; v < n; ++v) {
    auto& nb = cache.neighbors[v];
    std::sort(nb.begin(), nb.end());
    cache.laplacian_offsets[v + 1] = cache.laplacian_offsets[v] + static_cast<int>(nb.size());
    const double w = nb.empty() ? 0.0 : 1.0 / static_cast<double>(nb.size());
    for (int u : nb) {
      cache.laplacian_columns.push_back(u);
      cache.laplacian_weights.push_back(w);
    }
  }
  return cache;
}

template <class T>
void require_matching(const ConnectivityCache& cache, const Mesh<T>& mesh) {
  if (!cache.matches(connectivity_fingerprint(mesh), mesh.vertices.size()))
    throw Error(ErrorCode::cache_mismatch, "connectivity cache was built for a different mesh connectivity");
}

}  // namespace mvr
