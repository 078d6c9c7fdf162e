#pragma once

#include "mvr/aabb_tree.hpp"
#include "mvr/image.hpp"

#include <algorithm>
#include <numeric>
#include <random>

namespace mvr {

struct SurfaceSamples {
  std::vector<Vec3<double>> points;
  std::vector<int> faces;
};

/// Area-weighted uniform samples on the surface, deterministic given the seed.
template <class T>
SurfaceSamples sample_surface(const Mesh<T>& mesh, std::size_t count, std::uint64_t seed) {
  if (mesh.faces.empty()) throw Error(ErrorCode::empty_mesh, "cannot sample an empty mesh");
  std::vector<double> cdf(mesh.faces.size());
  double total = 0.0;
  for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
    const auto& face = mesh.faces[f];
    const Vec3<double> a = mesh.vertices[face[0]].template cast<double>();
    const Vec3<double> b = mesh.vertices[face[1]].template cast<double>();
    const Vec3<double> c = mesh.vertices[face[2]].template cast<double>();
    total += 0.5 * (b - a).cross(c - a).norm();
    cdf[f] = total;
  }
  if (!(total > 0.0)) throw Error(ErrorCode::empty_mesh, "mesh has zero surface area");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  SurfaceSamples out;
  out.points.reserve(count);
  out.faces.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const double r = uni(rng) * total;
    const std::size_t f =
        std::min<std::size_t>(std::upper_bound(cdf.begin(), cdf.end(), r) - cdf.begin(), mesh.faces.size() - 1);
    double u = uni(rng), v = uni(rng);
    if (u + v > 1.0) {
      u = 1.0 - u;
      v = 1.0 - v;
    }
    const auto& face = mesh.faces[f];
    const Vec3<double> a = mesh.vertices[face[0]].template cast<double>();
    const Vec3<double> b = mesh.vertices[face[1]].template cast<double>();
    const Vec3<double> c = mesh.vertices[face[2]].template cast<double>();
    out.points.push_back(a + u * (b - a) + v * (c - a));
    out.faces.push_back(static_cast<int>(f));
  }
  return out;
}

/// Static 3D kd-tree for nearest-neighbour distances.
class KdTree {
 public:
  explicit KdTree(std::vector<Vec3<double>> points) : points_(std::move(points)) {
    order_.resize(points_.size());
    std::iota(order_.begin(), order_.end(), 0);
    if (!points_.empty()) root_ = build(0, static_cast<int>(points_.size()), 0);
  }

  /// Distance from q to the closest stored point (infinity when empty).
  double nearest(const Vec3<double>& q) const {
    double best = std::numeric_limits<double>::infinity();
    if (root_ >= 0) search(root_, q, best);
    return std::sqrt(best);
  }

 private:
  struct Node {
    int point = -1;
    int axis = 0;
    int left = -1, right = -1;
  };

  int build(int begin, int end, int depth) {
    if (begin >= end) return -1;
    // split on the widest axis of this subset
    Vec3<double> lo = points_[order_[begin]], hi = lo;
    for (int i = begin + 1; i < end; ++i) {
      lo = lo.cwiseMin(points_[order_[i]]);
      hi = hi.cwiseMax(points_[order_[i]]);
    }
    int axis = 0;
    (hi - lo).maxCoeff(&axis);
    const int mid = (begin + end) / 2;
    std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end, [&](int a, int b) {
      return points_[a][axis] != points_[b][axis] ? points_[a][axis] < points_[b][axis] : a < b;
    });
    const int idx = static_cast<int>(nodes_.size());
    nodes_.push_back({order_[mid], axis, -1, -1});
    const int l = build(begin, mid, depth + 1);
    const int r = build(mid + 1, end, depth + 1);
    nodes_[idx].left = l;
    nodes_[idx].right = r;
    return idx;
  }

  void search(int node, const Vec3<double>& q, double& best) const {
    const Node& n = nodes_[node];
    const Vec3<double>& p = points_[n.point];
    best = std::min(best, (p - q).squaredNorm());
    const double diff = q[n.axis] - p[n.axis];
    const int near = diff < 0 ? n.left : n.right;
    const int far = diff < 0 ? n.right : n.left;
    if (near >= 0) search(near, q, best);
    if (far >= 0 && diff * diff < best) search(far, q, best);
  }

  std::vector<Vec3<double>> points_;
  std::vector<int> order_;
  std::vector<Node> nodes_;
  int root_ = -1;
};

struct ChamferResult {
  double a_to_b = 0.0;  // mean distance from points of a to their nearest point in b
  double b_to_a = 0.0;
  double symmetric = 0.0;  // mean of the two directed values
};

inline ChamferResult chamfer_l1(const std::vector<Vec3<double>>& a, const std::vector<Vec3<double>>& b) {
  if (a.empty() || b.empty()) throw Error(ErrorCode::invalid_argument, "Chamfer distance needs two non-empty point sets");
  auto directed = [](const std::vector<Vec3<double>>& from, const std::vector<Vec3<double>>& to) {
    const KdTree tree(to);
    double sum = 0.0;
    for (const auto& p : from) sum += tree.nearest(p);
    return sum / static_cast<double>(from.size());
  };
  ChamferResult r;
  r.a_to_b = directed(a, b);
  r.b_to_a = directed(b, a);
  r.symmetric = 0.5 * (r.a_to_b + r.b_to_a);
  return r;
}

struct SurfaceDistance {
  double mean = 0.0;
  double max = 0.0;
  double bin_width = 0.0;  // histogram covers [0, max]
  std::vector<std::size_t> histogram;
};

inline SurfaceDistance summarize_distances(const std::vector<double>& d, int bins) {
  SurfaceDistance out;
  if (d.empty()) return out;
  out.mean = std::accumulate(d.begin(), d.end(), 0.0) / static_cast<double>(d.size());
  out.max = *std::max_element(d.begin(), d.end());
  out.histogram.assign(static_cast<std::size_t>(std::max(bins, 1)), 0);
  out.bin_width = out.max / static_cast<double>(out.histogram.size());
  for (double v : d) {
    std::size_t b = out.bin_width > 0.0 ? static_cast<std::size_t>(v / out.bin_width) : 0;
    ++out.histogram[std::min(b, out.histogram.size() - 1)];
  }
  return out;
}

/// Distances from area-weighted samples on `mesh` to the surface of `reference`.
template <class T, class U>
SurfaceDistance surface_distance(const Mesh<T>& mesh, const Mesh<U>& reference, std::size_t samples = 20000,
                                 std::uint64_t seed = 0, int bins = 20) {
  const AabbTree tree(reference);
  if (tree.empty()) throw Error(ErrorCode::empty_mesh, "reference mesh has no faces");
  const auto pts = sample_surface(mesh, samples, seed);
  std::vector<double> d(pts.points.size());
  for (std::size_t i = 0; i < d.size(); ++i) d[i] = tree.closest(pts.points[i]).distance;
  return summarize_distances(d, bins);
}

/// Mean of the two directed surface distances.
template <class T, class U>
double symmetric_surface_distance(const Mesh<T>& a, const Mesh<U>& b, std::size_t samples = 20000, std::uint64_t seed = 0) {
  return 0.5 * (surface_distance(a, b, samples, seed).mean + surface_distance(b, a, samples, seed + 1).mean);
}

/// Intersection over union of two masks thresholded at 0.5 (1 when both are empty).
template <class A, class B>
double mask_iou(const std::vector<A>& a, const std::vector<B>& b) {
  if (a.size() != b.size()) throw Error(ErrorCode::invalid_argument, "masks differ in size");
  std::size_t inter = 0, uni = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const bool x = a[i] > A(0.5), y = b[i] > B(0.5);
    inter += x && y;
    uni += x || y;
  }
  return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

inline double mask_iou(const Image& a, const Image& b) {
  if (a.channels != 1 || b.channels != 1) throw Error(ErrorCode::invalid_argument, "mask IoU expects single-channel images");
  return mask_iou(a.data, b.data);
}

}  // namespace mvr
