#pragma once

#include "mvr/mesh.hpp"

#include <limits>
#include <numeric>

namespace mvr {

/// Closest point on triangle (a, b, c) to p (Ericson, Real-Time Collision
/// Detection, 5.1.5).
inline Vec3<double> closest_point_on_triangle(const Vec3<double>& p, const Vec3<double>& a, const Vec3<double>& b,
                                              const Vec3<double>& c) {
  const Vec3<double> ab = b - a, ac = c - a, ap = p - a;
  const double d1 = ab.dot(ap), d2 = ac.dot(ap);
  if (d1 <= 0 && d2 <= 0) return a;
  const Vec3<double> bp = p - b;
  const double d3 = ab.dot(bp), d4 = ac.dot(bp);
  if (d3 >= 0 && d4 <= d3) return b;
  const double vc = d1 * d4 - d3 * d2;
  if (vc <= 0 && d1 >= 0 && d3 <= 0) return a + ab * (d1 / (d1 - d3));
  const Vec3<double> cp = p - c;
  const double d5 = ab.dot(cp), d6 = ac.dot(cp);
  if (d6 >= 0 && d5 <= d6) return c;
  const double vb = d5 * d2 - d1 * d6;
  if (vb <= 0 && d2 >= 0 && d6 <= 0) return a + ac * (d2 / (d2 - d6));
  const double va = d3 * d6 - d5 * d4;
  if (va <= 0 && (d4 - d3) >= 0 && (d5 - d6) >= 0) return b + (c - b) * ((d4 - d3) / ((d4 - d3) + (d5 - d6)));
  const double denom = 1.0 / (va + vb + vc);
  const double v = vb * denom, w = vc * denom;
  return a + ab * v + ac * w;
}

struct ClosestHit {
  Vec3<double> point = Vec3<double>::Zero();
  double distance = std::numeric_limits<double>::infinity();
  int face = -1;
};

/// Bounding-volume hierarchy over the triangles of a mesh for closest-point
/// queries. Holds its own copy of the geometry.
class AabbTree {
 public:
  AabbTree() = default;

  template <class T>
  explicit AabbTree(const Mesh<T>& mesh) {
    vertices_.reserve(mesh.vertices.size());
    for (const auto& v : mesh.vertices) vertices_.push_back(v.template cast<double>());
    faces_ = mesh.faces;
    if (faces_.empty()) return;
    order_.resize(faces_.size());
    std::iota(order_.begin(), order_.end(), 0);
    centroids_.resize(faces_.size());
    for (std::size_t f = 0; f < faces_.size(); ++f)
      centroids_[f] = (vertices_[faces_[f][0]] + vertices_[faces_[f][1]] + vertices_[faces_[f][2]]) / 3.0;
    nodes_.reserve(2 * faces_.size());
    build(0, static_cast<int>(faces_.size()));
  }

  bool empty() const { return faces_.empty(); }

  ClosestHit closest(const Vec3<double>& p) const {
    ClosestHit best;
    if (nodes_.empty()) return best;
    double best_sq = std::numeric_limits<double>::infinity();
    int stack[128];
    int top = 0;
    stack[top++] = 0;
    while (top > 0) {
      const Node& node = nodes_[stack[--top]];
      if (box_distance_sq(node, p) >= best_sq) continue;
      if (node.count > 0) {
        for (int i = node.start; i < node.start + node.count; ++i) {
          const int f = order_[i];
          const Vec3<double> q =
              closest_point_on_triangle(p, vertices_[faces_[f][0]], vertices_[faces_[f][1]], vertices_[faces_[f][2]]);
          const double d = (q - p).squaredNorm();
          if (d < best_sq || (d == best_sq && f < best.face)) {
            best_sq = d;
            best.point = q;
            best.face = f;
          }
        }
      } else {
        const double dl = box_distance_sq(nodes_[node.left], p);
        const double dr = box_distance_sq(nodes_[node.right], p);
        if (dl < dr) {
          stack[top++] = node.right;
          stack[top++] = node.left;
        } else {
          stack[top++] = node.left;
          stack[top++] = node.right;
        }
      }
    }
    best.distance = std::sqrt(best_sq);
    return best;
  }

  const std::vector<Vec3<double>>& vertices() const { return vertices_; }
  const std::vector<Face>& faces() const { return faces_; }

 private:
  struct Node {
    Vec3<double> lo = Vec3<double>::Zero();
    Vec3<double> hi = Vec3<double>::Zero();
    int left = -1, right = -1;
    int start = 0, count = 0;
  };

  static double box_distance_sq(const Node& n, const Vec3<double>& p) {
    const Vec3<double> d = (n.lo - p).cwiseMax(p - n.hi).cwiseMax(0.0);
    return d.squaredNorm();
  }

  int build(int start, int end) {
    const int idx = static_cast<int>(nodes_.size());
    nodes_.push_back({});
    Vec3<double> lo = Vec3<double>::Constant(std::numeric_limits<double>::infinity());
    Vec3<double> hi = -lo;
    Vec3<double> clo = lo, chi = hi;
    for (int i = start; i < end; ++i) {
      for (int v : faces_[order_[i]]) {
        lo = lo.cwiseMin(vertices_[v]);
        hi = hi.cwiseMax(vertices_[v]);
      }
      clo = clo.cwiseMin(centroids_[order_[i]]);
      chi = chi.cwiseMax(centroids_[order_[i]]);
    }
    nodes_[idx].lo = lo;
    nodes_[idx].hi = hi;
    if (end - start <= 4) {
      nodes_[idx].start = start;
      nodes_[idx].count = end - start;
      return idx;
    }
    int axis = 0;
    (chi - clo).maxCoeff(&axis);
    const int mid = (start + end) / 2;
    std::nth_element(order_.begin() + start, order_.begin() + mid, order_.begin() + end, [&](int a, int b) {
      return centroids_[a][axis] != centroids_[b][axis] ? centroids_[a][axis] < centroids_[b][axis] : a < b;
    });
    const int left = build(start, mid);
    const int right = build(mid, end);
    nodes_[idx].left = left;
    nodes_[idx].right = right;
    return idx;
  }

  std::vector<Vec3<double>> vertices_;
  std::vector<Face> faces_;
  std::vector<Vec3<double>> centroids_;
  std::vector<int> order_;
  std::vector<Node> nodes_;
};

}  // namespace mvr
