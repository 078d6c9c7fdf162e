#pragma once

#include "mvr/connectivity.hpp"

namespace mvr {

/// Faces with area below this (scene units^2) are flagged as degenerate.
inline constexpr double kDegenerateArea = 1e-12;

template <class T>
struct LossAndGrad {
  T value = T(0);
  std::vector<Vec3<T>> grad;  // one entry per vertex
};

/// delta_i = v_i - mean(neighbors of v_i). Isolated vertices get zero.
template <class T>
std::vector<Vec3<T>> differential_coords(const Mesh<T>& mesh, const ConnectivityCache& cache) {
  require_matching(cache, mesh);
  const std::size_t n = mesh.vertices.size();
  std::vector<Vec3<T>> delta(n, Vec3<T>::Zero());
  std::size_t isolated = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const int begin = cache.laplacian_offsets[i];
    const int end = cache.laplacian_offsets[i + 1];
    if (begin == end) {
      ++isolated;
      continue;
    }
    Vec3<T> acc = mesh.vertices[i];
    for (int k = begin; k < end; ++k)
      acc -= static_cast<T>(cache.laplacian_weights[k]) * mesh.vertices[cache.laplacian_columns[k]];
    delta[i] = acc;
  }
  if (isolated > 0)
    log::warn(std::to_string(isolated) + " isolated vertices have no neighbors; their differential coordinates are zero");
  return delta;
}

/// (1/n) sum ||delta_i||^2 and its gradient (2/n) L^T delta.
template <class T>
LossAndGrad<T> laplacian_loss(const Mesh<T>& mesh, const ConnectivityCache& cache) {
  const auto delta = differential_coords(mesh, cache);
  const std::size_t n = mesh.vertices.size();
  LossAndGrad<T> out;
  out.grad.assign(n, Vec3<T>::Zero());
  if (n == 0) return out;
  const T scale = T(1) / static_cast<T>(n);
  T sum = T(0);
  for (const auto& d : delta) sum += d.squaredNorm();
  out.value = sum * scale;
  for (std::size_t i = 0; i < n; ++i) {
    const Vec3<T> g = T(2) * scale * delta[i];
    out.grad[i] += g;
    for (int k = cache.laplacian_offsets[i]; k < cache.laplacian_offsets[i + 1]; ++k)
      out.grad[cache.laplacian_columns[k]] -= static_cast<T>(cache.laplacian_weights[k]) * g;
  }
  return out;
}

template <class T>
struct FaceNormals {
  std::vector<Vec3<T>> normals;  // unit, or zero when degenerate
  std::vector<Vec3<T>> cross;    // (v1 - v0) x (v2 - v0)
  std::vector<char> degenerate;
};

template <class T>
FaceNormals<T> face_normals(const Mesh<T>& mesh) {
  FaceNormals<T> out;
  const std::size_t m = mesh.faces.size();
  out.normals.resize(m);
  out.cross.resize(m);
  out.degenerate.assign(m, 0);
  for (std::size_t f = 0; f < m; ++f) {
    const auto& face = mesh.faces[f];
    const Vec3<T>& a = mesh.vertices[face[0]];
    const Vec3<T> c = (mesh.vertices[face[1]] - a).cross(mesh.vertices[face[2]] - a);
    out.cross[f] = c;
    const T len = c.norm();
    if (!(static_cast<double>(len) * 0.5 >= kDegenerateArea)) {
      out.degenerate[f] = 1;
      out.normals[f].setZero();
    } else {
      out.normals[f] = c / len;
    }
  }
  return out;
}

namespace detail {

/// Accumulates the vertex gradient of the face cross product given dL/dc.
template <class T>
void cross_backward(const Mesh<T>& mesh, std::size_t f, const Vec3<T>& grad_cross, std::vector<Vec3<T>>& grad) {
  const auto& face = mesh.faces[f];
  const Vec3<T> e1 = mesh.vertices[face[1]] - mesh.vertices[face[0]];
  const Vec3<T> e2 = mesh.vertices[face[2]] - mesh.vertices[face[0]];
  const Vec3<T> g1 = e2.cross(grad_cross);
  const Vec3<T> g2 = grad_cross.cross(e1);
  grad[face[1]] += g1;
  grad[face[2]] += g2;
  grad[face[0]] -= g1 + g2;
}

}  // namespace detail

/// Vertex gradient of a scalar given dL/dn for each face normal.
template <class T>
std::vector<Vec3<T>> face_normals_backward(const Mesh<T>& mesh, const FaceNormals<T>& fn,
                                           const std::vector<Vec3<T>>& grad_normals) {
  std::vector<Vec3<T>> grad(mesh.vertices.size(), Vec3<T>::Zero());
  for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
    if (fn.degenerate[f]) continue;
    const Vec3<T>& n = fn.normals[f];
    const Vec3<T>& g = grad_normals[f];
    const Vec3<T> gc = (g - n * n.dot(g)) / fn.cross[f].norm();
    detail::cross_backward(mesh, f, gc, grad);
  }
  return grad;
}

template <class T>
struct VertexNormals {
  std::vector<Vec3<T>> normals;
  std::vector<Vec3<T>> sums;  // area-weighted (unnormalized) sums
  std::vector<char> flagged;
  FaceNormals<T> faces;
};

/// Area-weighted vertex normals. A vertex whose incident faces are all
/// degenerate is flagged and falls back to +z.
template <class T>
VertexNormals<T> vertex_normals(const Mesh<T>& mesh) {
  VertexNormals<T> out;
  out.faces = face_normals(mesh);
  const std::size_t n = mesh.vertices.size();
  out.sums.assign(n, Vec3<T>::Zero());
  out.normals.assign(n, Vec3<T>::UnitZ());
  out.flagged.assign(n, 0);
  for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
    if (out.faces.degenerate[f]) continue;
    for (int v : mesh.faces[f]) out.sums[v] += out.faces.cross[f];
  }
  for (std::size_t v = 0; v < n; ++v) {
    const T len = out.sums[v].norm();
    if (!(static_cast<double>(len) > 2.0 * kDegenerateArea)) {
      out.flagged[v] = 1;
    } else {
      out.normals[v] = out.sums[v] / len;
    }
  }
  return out;
}

/// Accumulates into `grad` the vertex-position gradient given dL/dN per vertex normal.
template <class T>
void vertex_normals_backward(const Mesh<T>& mesh, const VertexNormals<T>& vn, const std::vector<Vec3<T>>& grad_normals,
                             std::vector<Vec3<T>>& grad) {
  const std::size_t n = mesh.vertices.size();
  std::vector<Vec3<T>> grad_sums(n, Vec3<T>::Zero());
  for (std::size_t v = 0; v < n; ++v) {
    if (vn.flagged[v]) continue;
    const Vec3<T>& nv = vn.normals[v];
    const Vec3<T>& g = grad_normals[v];
    grad_sums[v] = (g - nv * nv.dot(g)) / vn.sums[v].norm();
  }
  for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
    if (vn.faces.degenerate[f]) continue;
    const auto& face = mesh.faces[f];
    const Vec3<T> gc = grad_sums[face[0]] + grad_sums[face[1]] + grad_sums[face[2]];
    detail::cross_backward(mesh, f, gc, grad);
  }
}

/// (1/|F-bar|) sum (1 - n_i . n_j)^2 over face pairs sharing an edge; pairs
/// touching a degenerate face are left out of both the sum and the count.
template <class T>
LossAndGrad<T> normal_consistency_loss(const Mesh<T>& mesh, const ConnectivityCache& cache) {
  require_matching(cache, mesh);
  const auto fn = face_normals(mesh);
  LossAndGrad<T> out;
  std::size_t count = 0;
  for (const auto& p : cache.adjacent_faces)
    if (!fn.degenerate[p.first] && !fn.degenerate[p.second]) ++count;
  if (count == 0) {
    out.grad.assign(mesh.vertices.size(), Vec3<T>::Zero());
    return out;
  }
  const T scale = T(1) / static_cast<T>(count);
  std::vector<Vec3<T>> grad_normals(mesh.faces.size(), Vec3<T>::Zero());
  T sum = T(0);
  for (const auto& p : cache.adjacent_faces) {
    if (fn.degenerate[p.first] || fn.degenerate[p.second]) continue;
    const T r = T(1) - fn.normals[p.first].dot(fn.normals[p.second]);
    sum += r * r;
    const T coeff = T(-2) * r * scale;
    grad_normals[p.first] += coeff * fn.normals[p.second];
    grad_normals[p.second] += coeff * fn.normals[p.first];
  }
  out.value = sum * scale;
  out.grad = face_normals_backward(mesh, fn, grad_normals);
  return out;
}

}  // namespace mvr
