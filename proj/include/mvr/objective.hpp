#pragma once

#include "mvr/dataset.hpp"
#include "mvr/geometry_losses.hpp"
#include "mvr/shader.hpp"
#include "mvr/silhouette.hpp"
#include "mvr/timing.hpp"

#include <algorithm>
#include <optional>
#include <random>

namespace mvr {

struct LossWeights {
  double shading = 1.0;
  double silhouette = 2.0;
  double laplacian = 40.0;
  double normal = 0.1;

  void validate() const {
    for (double w : {shading, silhouette, laplacian, normal})
      if (!(w >= 0.0) || !std::isfinite(w)) throw Error(ErrorCode::invalid_argument, "loss weights must be finite and non-negative");
  }
};

/// Weighted values of the four objective terms.
struct LossTerms {
  double shading = 0.0;
  double silhouette = 0.0;
  double laplacian = 0.0;
  double normal = 0.0;

  double total() const { return shading + silhouette + laplacian + normal; }
  bool finite() const { return std::isfinite(total()); }
};

/// Uniform sample without replacement of ceil(fraction * m) pixels from the m
/// pixels that are covered by the render and inside the input mask. Returned
/// in ascending order.
inline std::vector<std::size_t> sample_pixels(const std::vector<int>& rendered_triangles, const Image& input_mask,
                                              double fraction, std::mt19937_64& rng) {
  if (!(fraction > 0.0 && fraction <= 1.0)) throw Error(ErrorCode::invalid_argument, "pixel fraction must lie in (0, 1]");
  if (input_mask.pixel_count() != rendered_triangles.size() || input_mask.channels != 1)
    throw Error(ErrorCode::invalid_argument, "input mask must be single-channel and match the render size");
  std::vector<std::size_t> pool;
  for (std::size_t p = 0; p < rendered_triangles.size(); ++p)
    if (rendered_triangles[p] >= 0 && input_mask.data[p] > 0.5f) pool.push_back(p);
  const std::size_t m = pool.size();
  // the small slack keeps products like 0.3 * 10 from rounding up past 3
  std::size_t k = static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(m) - 1e-9));
  k = std::min(k, m);
  for (std::size_t i = 0; i < k; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, m - 1);
    std::swap(pool[i], pool[pick(rng)]);
  }
  pool.resize(k);
  std::sort(pool.begin(), pool.end());
  return pool;
}

/// Everything about one view that stays fixed while the objective is
/// evaluated: pixel-triangle assignment, silhouette band assignment and the
/// shaded sample set.
template <class T>
struct ViewFrame {
  const View<T>* view = nullptr;
  Visibility visibility;
  SilhouetteResult<T> silhouette;
  std::vector<std::size_t> samples;
};

template <class T>
ViewFrame<T> prepare_view(const Mesh<T>& mesh, const ConnectivityCache& cache, const View<T>& view, double fraction,
                          std::mt19937_64& rng, bool sample = true) {
  ViewFrame<T> f;
  f.view = &view;
  f.visibility = rasterize_visibility(mesh, view.camera);
  f.silhouette = silhouette_mask(mesh, cache, view.camera, f.visibility);
  if (sample) f.samples = sample_pixels(f.visibility.triangle, view.mask, fraction, rng);
  return f;
}

template <class T>
struct ObjectiveResult {
  LossTerms terms;
  std::vector<Vec3<T>> grad_vertices;
  VecX<T> grad_theta;
  std::size_t shaded_pixels = 0;
};

namespace detail {

template <class T>
T l1_sign(T d) {
  return d > T(0) ? T(1) : (d < T(0) ? T(-1) : T(0));
}

}  // namespace detail

/// Objective over prepared frames with their assignments held fixed: the
/// appearance terms are averaged over the frames, the geometry terms use the
/// whole mesh. Band pixels of the silhouette are re-evaluated at the current
/// vertex positions, so a finite-difference probe sees a smooth function.
template <class T>
ObjectiveResult<T> evaluate_objective(const Mesh<T>& mesh, const ConnectivityCache& cache, const ShaderParams<T>& shader,
                                      const std::vector<ViewFrame<T>>& frames, const LossWeights& weights,
                                      bool with_gradient = true, PhaseTimes* times = nullptr) {
  // scopes hand over back to back so the phases tile the call
  std::optional<PhaseScope> scope;
  scope.emplace(times, Phase::rasterize);
  weights.validate();
  require_matching(cache, mesh);
  ObjectiveResult<T> out;
  const std::size_t nv = mesh.vertices.size();
  scope.emplace(times, Phase::backward);
  if (with_gradient) {
    out.grad_vertices.assign(nv, Vec3<T>::Zero());
    out.grad_theta = VecX<T>::Zero(shader.theta.size());
  }
  std::vector<Vec3<T>> grad_vn;
  if (with_gradient) grad_vn.assign(nv, Vec3<T>::Zero());

  scope.emplace(times, Phase::rasterize);
  const bool need_shading = weights.shading > 0.0;
  VertexNormals<T> vn;
  if (need_shading) vn = vertex_normals(mesh);

  const T view_scale = frames.empty() ? T(0) : T(1) / static_cast<T>(frames.size());
  for (const auto& frame : frames) {
    const View<T>& view = *frame.view;
    const std::size_t npx = frame.visibility.triangle.size();
    scope.emplace(times, Phase::losses);
    const std::vector<T> mask = silhouette_mask_frozen(mesh, view.camera, frame.silhouette);
    std::vector<T> grad_mask;
    {
      // silhouette: mean |M - M~| over all pixels
      const T w = T(weights.silhouette) / static_cast<T>(npx) * view_scale;
      double sum = 0.0;
      if (with_gradient && weights.silhouette > 0.0) grad_mask.assign(npx, T(0));
      for (std::size_t p = 0; p < npx; ++p) {
        const T d = mask[p] - T(view.mask.data[p]);
        sum += std::abs(static_cast<double>(d));
        if (!grad_mask.empty()) grad_mask[p] = w * detail::l1_sign(d);
      }
      out.terms.silhouette += weights.silhouette * sum / static_cast<double>(npx) * static_cast<double>(view_scale);
    }

    if (need_shading) {
      if (frame.samples.empty()) {
        log::warn("view " + std::to_string(view.id) + ": rendered and input masks do not overlap; shading term skipped");
      } else {
        scope.emplace(times, Phase::shade);
        const auto attrs = interpolate_pixels(mesh, vn.normals, view.camera, frame.samples, frame.visibility.triangle);
        const Eigen::Index n = static_cast<Eigen::Index>(frame.samples.size());
        ShadeBatch<T> batch;
        batch.x.resize(3, n);
        batch.n.resize(3, n);
        batch.v.resize(3, n);
        for (Eigen::Index i = 0; i < n; ++i) {
          batch.x.col(i) = attrs.position[i];
          batch.n.col(i) = attrs.normal[i];
          batch.v.col(i) = attrs.view_dir[i];
        }
        ShadeCache<T> sc;
        const MatX<T>& rgb = shade_forward(shader, batch, sc);

        scope.emplace(times, Phase::losses);
        // shading: mean |I - M~ * f| over sampled pixels and channels, M~ taken
        // from the assignment pass so it carries no vertex gradient
        const T w = T(weights.shading) / static_cast<T>(3 * n) * view_scale;
        MatX<T> grad_rgb;
        if (with_gradient) grad_rgb.resize(3, n);
        double sum = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) {
          const std::size_t p = frame.samples[i];
          const T coverage = frame.silhouette.mask[p];  // held constant
          for (int c = 0; c < 3; ++c) {
            const T d = coverage * rgb(c, i) - T(view.image.data[3 * p + c]);
            sum += std::abs(static_cast<double>(d));
            if (with_gradient) grad_rgb(c, i) = w * coverage * detail::l1_sign(d);
          }
        }
        out.terms.shading += weights.shading * sum / static_cast<double>(3 * n) * static_cast<double>(view_scale);
        out.shaded_pixels += frame.samples.size();

        if (with_gradient) {
          scope.emplace(times, Phase::backward);
          const ShadeGrads<T> g = shade_backward(shader, batch, sc, grad_rgb);
          out.grad_theta += g.theta;
          std::vector<Vec3<T>> gx(n), gn(n), gv(n);
          for (Eigen::Index i = 0; i < n; ++i) {
            gx[i] = g.x.col(i);
            gn[i] = g.n.col(i);
            gv[i] = g.v.col(i);
          }
          interpolate_pixels_backward(mesh, vn.normals, view.camera, attrs, &gx, &gn, &gv, out.grad_vertices, grad_vn);
        }
      }
    }
    if (with_gradient && !grad_mask.empty()) {
      scope.emplace(times, Phase::backward);
      silhouette_mask_backward(mesh, view.camera, frame.silhouette, grad_mask, out.grad_vertices);
    }
  }

  if (with_gradient && need_shading) {
    scope.emplace(times, Phase::backward);
    vertex_normals_backward(mesh, vn, grad_vn, out.grad_vertices);
    grad_vn = {};
  }

  scope.emplace(times, Phase::losses);
  if (weights.laplacian > 0.0) {
    const auto lap = laplacian_loss(mesh, cache);
    out.terms.laplacian = weights.laplacian * static_cast<double>(lap.value);
    if (with_gradient)
      for (std::size_t i = 0; i < nv; ++i) out.grad_vertices[i] += T(weights.laplacian) * lap.grad[i];
  }
  if (weights.normal > 0.0) {
    const auto nc = normal_consistency_loss(mesh, cache);
    out.terms.normal = weights.normal * static_cast<double>(nc.value);
    if (with_gradient)
      for (std::size_t i = 0; i < nv; ++i) out.grad_vertices[i] += T(weights.normal) * nc.grad[i];
  }
  return out;
}

/// Rasterizes and samples the given views, then evaluates the objective.
template <class T>
ObjectiveResult<T> total_objective(const Mesh<T>& mesh, const ConnectivityCache& cache, const ShaderParams<T>& shader,
                                   const std::vector<const View<T>*>& views, const LossWeights& weights,
                                   double fraction, std::mt19937_64& rng, PhaseTimes* times = nullptr) {
  std::vector<ViewFrame<T>> frames;
  {
    PhaseScope scope(times, Phase::rasterize);
    frames.reserve(views.size());
    for (const View<T>* v : views) frames.push_back(prepare_view(mesh, cache, *v, fraction, rng, weights.shading > 0.0));
  }
  ObjectiveResult<T> out = evaluate_objective(mesh, cache, shader, frames, weights, true, times);
  PhaseScope scope(times, Phase::rasterize);
  frames.clear();  // releases the frame buffers inside the timed region
  return out;
}

}  // namespace mvr
