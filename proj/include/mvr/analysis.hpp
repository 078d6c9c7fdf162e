#pragma once

#include "mvr/metrics.hpp"
#include "mvr/shader.hpp"
#include "mvr/silhouette.hpp"

#include <Eigen/Eigenvalues>

#include <optional>

namespace mvr {

/// Which surface points an edit applies to.
struct RegionSelector {
  enum class Kind { all, sphere, half_space };
  Kind kind = Kind::all;
  Vec3<double> center = Vec3<double>::Zero();  // sphere
  double radius = 0.0;
  Vec3<double> normal = Vec3<double>::UnitZ();  // half-space: normal . x >= offset
  double offset = 0.0;

  static RegionSelector sphere(const Vec3<double>& c, double r) {
    RegionSelector s;
    s.kind = Kind::sphere;
    s.center = c;
    s.radius = r;
    return s;
  }
  static RegionSelector half_space(const Vec3<double>& n, double off) {
    RegionSelector s;
    s.kind = Kind::half_space;
    s.normal = n;
    s.offset = off;
    return s;
  }

  bool contains(const Vec3<double>& x) const {
    switch (kind) {
      case Kind::all: return true;
      case Kind::sphere: return (x - center).squaredNorm() <= radius * radius;
      case Kind::half_space: return normal.dot(x) >= offset;
    }
    return false;
  }
};

/// Replace the positional feature of selected points by
/// blend * replacement + (1 - blend) * original.
struct FeatureEdit {
  RegionSelector selector;
  VecX<float> replacement;
  double blend = 1.0;

  void validate(int feature_dim) const {
    if (replacement.size() != feature_dim)
      throw Error(ErrorCode::invalid_argument, "replacement feature has " + std::to_string(replacement.size()) +
                                                   " entries, the shader expects " + std::to_string(feature_dim));
    if (!(blend >= 0.0 && blend <= 1.0)) throw Error(ErrorCode::invalid_argument, "edit blend must lie in [0, 1]");
    if (!replacement.allFinite()) throw Error(ErrorCode::invalid_argument, "replacement feature is not finite");
    if (selector.kind == RegionSelector::Kind::sphere && !(selector.radius >= 0.0))
      throw Error(ErrorCode::invalid_argument, "selector radius must be non-negative");
  }
};

struct RenderOutput {
  Image color;     // 3 channels, background black
  Image mask;      // 1 channel, antialiased coverage
  Image selected;  // 1 channel, 1 where an edit selector matched
};

inline constexpr Eigen::Index kShadeChunk = 8192;

/// Deferred render with the trained shader, applying `edits` in order to the
/// positional features. Every pixel goes through the same feature/head path,
/// so pixels no edit touches are bit-identical to the unedited render.
template <class T>
RenderOutput render_with_feature_edits(const Mesh<T>& mesh, const ShaderParams<float>& shader, const Camera<T>& camera,
                                       const std::vector<FeatureEdit>& edits) {
  for (const auto& e : edits) e.validate(shader.feature_dim());
  const Mesh<float> m = mesh.template cast<float>();
  const Camera<float> cam = camera.template cast<float>();
  validate(cam);
  const auto cache = build_connectivity(m);
  const Visibility vis = rasterize_visibility(m, cam);
  const auto sil = silhouette_mask(m, cache, cam, vis);
  const auto vn = vertex_normals(m);
  const std::vector<std::size_t> pixels = covered_pixels(vis);
  const auto attrs = interpolate_pixels(m, vn.normals, cam, pixels, vis.triangle);

  RenderOutput out;
  out.color = Image(cam.width, cam.height, 3, 0.0f);
  out.mask = Image(cam.width, cam.height, 1, 0.0f);
  out.selected = Image(cam.width, cam.height, 1, 0.0f);
  for (std::size_t p = 0; p < sil.mask.size(); ++p) out.mask.data[p] = std::clamp(sil.mask[p], 0.0f, 1.0f);

  const Eigen::Index total = static_cast<Eigen::Index>(pixels.size());
  for (Eigen::Index start = 0; start < total; start += kShadeChunk) {
    const Eigen::Index n = std::min(kShadeChunk, total - start);
    MatX<float> X(3, n), N(3, n), V(3, n);
    for (Eigen::Index i = 0; i < n; ++i) {
      X.col(i) = attrs.position[start + i];
      N.col(i) = attrs.normal[start + i];
      V.col(i) = attrs.view_dir[start + i];
    }
    MatX<float> F = extract_positional_features(shader, X);
    for (const auto& e : edits) {
      if (e.blend == 0.0) continue;
      const float b = static_cast<float>(e.blend);
      for (Eigen::Index i = 0; i < n; ++i) {
        if (!e.selector.contains(X.col(i).cast<double>())) continue;
        out.selected.data[pixels[start + i]] = 1.0f;
        F.col(i) = b == 1.0f ? e.replacement : VecX<float>(b * e.replacement + (1.0f - b) * F.col(i));
      }
    }
    const MatX<float> rgb = shade_head(shader, F, N, V);
    for (Eigen::Index i = 0; i < n; ++i) {
      const std::size_t p = pixels[start + i];
      const float coverage = out.mask.data[p];
      for (int c = 0; c < 3; ++c) out.color.data[3 * p + c] = coverage * rgb(c, i);
    }
  }
  return out;
}

template <class T>
RenderOutput render_novel_view(const Mesh<T>& mesh, const ShaderParams<float>& shader, const Camera<T>& camera) {
  return render_with_feature_edits(mesh, shader, camera, {});
}

/// Positional feature of the surface seen through pixel (x, y), if any.
template <class T>
std::optional<VecX<float>> pick_feature(const Mesh<T>& mesh, const ShaderParams<float>& shader, const Camera<T>& camera,
                                        int x, int y, Vec3<double>* position = nullptr) {
  if (x < 0 || y < 0 || x >= camera.width || y >= camera.height)
    throw Error(ErrorCode::invalid_argument, "pixel (" + std::to_string(x) + ", " + std::to_string(y) + ") is outside the image");
  const Mesh<float> m = mesh.template cast<float>();
  const Camera<float> cam = camera.template cast<float>();
  const Visibility vis = rasterize_visibility(m, cam);
  const std::size_t p = static_cast<std::size_t>(y) * cam.width + x;
  if (vis.triangle[p] < 0) return std::nullopt;
  const auto vn = vertex_normals(m);
  const auto attrs = interpolate_pixels(m, vn.normals, cam, {p}, vis.triangle);
  MatX<float> X(3, 1);
  X.col(0) = attrs.position[0];
  if (position) *position = attrs.position[0].template cast<double>();
  return VecX<float>(extract_positional_features(shader, X).col(0));
}

/// Mean positional feature over surface samples inside the selector.
template <class T>
std::optional<VecX<float>> region_mean_feature(const Mesh<T>& mesh, const ShaderParams<float>& shader,
                                               const RegionSelector& selector, std::size_t samples = 4096,
                                               std::uint64_t seed = 0) {
  const auto pts = sample_surface(mesh, samples, seed);
  std::vector<Vec3<double>> inside;
  for (const auto& p : pts.points)
    if (selector.contains(p)) inside.push_back(p);
  if (inside.empty()) return std::nullopt;
  MatX<float> X(3, static_cast<Eigen::Index>(inside.size()));
  for (std::size_t i = 0; i < inside.size(); ++i) X.col(static_cast<Eigen::Index>(i)) = inside[i].cast<float>();
  const MatX<float> F = extract_positional_features(shader, X);
  return VecX<float>(F.rowwise().mean());
}

struct PcaResult {
  MatX<double> projections;  // N x components
  MatX<double> basis;        // feature_dim x components, unit columns
  VecX<double> mean;
  VecX<double> explained;    // share of total variance per component
};

/// Principal components of the rows of `features` (N x D). The basis is
/// ordered by decreasing variance; each column's largest-magnitude entry is
/// made positive.
inline PcaResult pca(const MatX<double>& features, int components = 2) {
  const Eigen::Index n = features.rows(), d = features.cols();
  if (n < 3) throw Error(ErrorCode::invalid_argument, "PCA needs at least 3 points");
  if (components < 1 || components > d) throw Error(ErrorCode::invalid_argument, "invalid PCA component count");
  PcaResult r;
  r.mean = features.colwise().mean().transpose();
  const MatX<double> centered = features.rowwise() - r.mean.transpose();
  const MatX<double> cov = (centered.transpose() * centered) / static_cast<double>(n - 1);
  Eigen::SelfAdjointEigenSolver<MatX<double>> eig(cov);
  if (eig.info() != Eigen::Success) throw Error(ErrorCode::non_finite, "PCA eigendecomposition failed");
  const VecX<double> values = eig.eigenvalues().cwiseMax(0.0);  // ascending
  const double total = values.sum();
  r.basis.resize(d, components);
  r.explained.resize(components);
  for (int k = 0; k < components; ++k) {
    const Eigen::Index col = d - 1 - k;
    VecX<double> v = eig.eigenvectors().col(col);
    Eigen::Index arg = 0;
    v.cwiseAbs().maxCoeff(&arg);
    if (v[arg] < 0) v = -v;
    r.basis.col(k) = v;
    r.explained[k] = total > 0.0 ? values[col] / total : 0.0;
  }
  r.projections = centered * r.basis;
  return r;
}

/// PCA of h(enc(x)) over the given points.
inline PcaResult pca_positional_features(const ShaderParams<float>& shader, const std::vector<Vec3<double>>& points,
                                         int components = 2) {
  MatX<float> X(3, static_cast<Eigen::Index>(points.size()));
  for (std::size_t i = 0; i < points.size(); ++i) X.col(static_cast<Eigen::Index>(i)) = points[i].cast<float>();
  const MatX<double> F = extract_positional_features(shader, X).cast<double>().transpose();
  return pca(F, components);
}

/// Lloyd's 2-means on the rows of `points`, seeded with the extremes along
/// the first coordinate. Labels are 0/1, label 0 for the low end.
inline std::vector<int> two_means(const MatX<double>& points, int max_iterations = 100) {
  const Eigen::Index n = points.rows();
  std::vector<int> labels(static_cast<std::size_t>(n), 0);
  if (n == 0) return labels;
  Eigen::Index lo = 0, hi = 0;
  points.col(0).minCoeff(&lo);
  points.col(0).maxCoeff(&hi);
  VecX<double> c0 = points.row(lo).transpose(), c1 = points.row(hi).transpose();
  for (int it = 0; it < max_iterations; ++it) {
    bool changed = it == 0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const int l = (points.row(i).transpose() - c1).squaredNorm() < (points.row(i).transpose() - c0).squaredNorm() ? 1 : 0;
      if (l != labels[static_cast<std::size_t>(i)]) changed = true;
      labels[static_cast<std::size_t>(i)] = l;
    }
    if (!changed) break;
    VecX<double> s0 = VecX<double>::Zero(points.cols()), s1 = s0;
    std::size_t n0 = 0, n1 = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (labels[static_cast<std::size_t>(i)]) {
        s1 += points.row(i).transpose();
        ++n1;
      } else {
        s0 += points.row(i).transpose();
        ++n0;
      }
    }
    if (n0) c0 = s0 / static_cast<double>(n0);
    if (n1) c1 = s1 / static_cast<double>(n1);
  }
  return labels;
}

/// Fraction of points whose cluster matches the reference label, maximized
/// over the two ways of naming the clusters.
inline double cluster_agreement(const std::vector<int>& clusters, const std::vector<int>& labels) {
  if (clusters.size() != labels.size() || clusters.empty())
    throw Error(ErrorCode::invalid_argument, "cluster and label lists must be non-empty and equally long");
  std::size_t same = 0;
  for (std::size_t i = 0; i < clusters.size(); ++i) same += clusters[i] == labels[i];
  const double a = static_cast<double>(same) / static_cast<double>(clusters.size());
  return std::max(a, 1.0 - a);
}

}  // namespace mvr
