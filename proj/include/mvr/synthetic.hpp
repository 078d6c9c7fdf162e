#pragma once

#include "mvr/dataset.hpp"
#include "mvr/mesh.hpp"
#include "mvr/obj_io.hpp"

#include <random>

namespace mvr {

enum class SyntheticShape { sphere, blob, two_material };

inline const char* to_string(SyntheticShape s) {
  switch (s) {
    case SyntheticShape::sphere: return "sphere";
    case SyntheticShape::blob: return "blob";
    case SyntheticShape::two_material: return "two_material";
  }
  return "sphere";
}

inline SyntheticShape parse_shape(const std::string& s) {
  if (s == "sphere") return SyntheticShape::sphere;
  if (s == "blob") return SyntheticShape::blob;
  if (s == "two_material") return SyntheticShape::two_material;
  throw Error(ErrorCode::invalid_argument, "unknown synthetic shape '" + s + "' (expected sphere, blob or two_material)");
}

/// Gaussian bump on a sphere: adds amplitude * exp((d.c - 1) / width^2) to the
/// radius in direction d.
struct Bump {
  Vec3<double> direction = Vec3<double>::UnitZ();
  double amplitude = 0.1;
  double width = 0.3;
};

struct SyntheticSceneSpec {
  SyntheticShape shape = SyntheticShape::sphere;
  double radius = 0.5;
  int bump_count = 10;  // blob only; placed from the seed
  double bump_amplitude = 0.1;
  double bump_width = 0.3;
  bool dents = true;  // every other seeded bump points inward
  std::vector<Bump> bumps;  // explicit bumps override bump_count
  Vec3<double> albedo = Vec3<double>(0.8, 0.55, 0.35);
  Vec3<double> albedo_b = Vec3<double>(0.2, 0.45, 0.85);  // two_material, z < 0
  Vec3<double> light_direction = Vec3<double>(0.4, 0.3, 0.866);  // toward the light
  double light_intensity = 0.8;
  double ambient = 0.2;
  int camera_count = 16;
  double camera_distance = 2.5;
  double camera_elevation = 30.0;  // degrees, alternating sign around the ring
  double focal = 200.0;
  int resolution = 128;
  int supersampling = 4;  // samples per pixel axis

  void validate() const {
    auto in_unit = [](const Vec3<double>& a) { return a.minCoeff() >= 0.0 && a.maxCoeff() <= 1.0; };
    if (!in_unit(albedo) || !in_unit(albedo_b)) throw Error(ErrorCode::invalid_argument, "albedo must lie in [0, 1]");
    if (!(light_intensity > 0.0)) throw Error(ErrorCode::invalid_argument, "light intensity must be positive");
    if (!(light_direction.norm() > 0.0)) throw Error(ErrorCode::invalid_argument, "light direction must be nonzero");
    if (camera_count < 4) throw Error(ErrorCode::invalid_argument, "a synthetic scene needs at least 4 cameras");
    if (!(radius > 0.0) || resolution < 8 || supersampling < 1 || !(focal > 0.0))
      throw Error(ErrorCode::invalid_argument, "invalid synthetic scene geometry or resolution");
    if (!(camera_distance > radius * 1.5)) throw Error(ErrorCode::invalid_argument, "cameras must sit outside the object");
  }
};

/// Radial shape r(d) with analytic ray casting and normals.
class AnalyticShape {
 public:
  AnalyticShape(const SyntheticSceneSpec& spec, std::uint64_t seed) : spec_(spec) {
    if (spec.shape != SyntheticShape::blob) return;
    bumps_ = spec.bumps;
    if (bumps_.empty()) {
      std::mt19937_64 rng(seed);
      std::normal_distribution<double> gauss;
      for (int i = 0; i < spec.bump_count; ++i) {
        Vec3<double> d(gauss(rng), gauss(rng), gauss(rng));
        const double sign = spec.dents && i % 2 == 1 ? -1.0 : 1.0;
        bumps_.push_back({d.normalized(), sign * spec.bump_amplitude, spec.bump_width});
      }
    }
    for (auto& b : bumps_) b.direction.normalize();
    // Outer radius and the largest tangential slope of r, both from a dense
    // direction sample padded by what a bump can add between neighbors.
    const Mesh<double> dirs = icosphere<double>(5, 1.0);
    const double spacing = mean_edge_length(dirs);
    double r_max = 0.0, r_min = std::numeric_limits<double>::infinity(), slope = 0.0, curvature = 0.0;
    for (const auto& b : bumps_) curvature += std::abs(b.amplitude) / (b.width * b.width);
    for (const auto& v : dirs.vertices) {
      const Vec3<double> d = v.normalized();
      r_max = std::max(r_max, radius(d));
      r_min = std::min(r_min, radius(d));
      slope = std::max(slope, tangential_gradient(d).norm());
    }
    slope += curvature * spacing;
    outer_ = r_max + slope * spacing;
    lipschitz_ = 1.25 * (1.0 + slope / std::max(r_min - slope * spacing, 1e-3));
  }

  double radius(const Vec3<double>& d) const {
    double r = spec_.radius;
    for (const auto& b : bumps_) {
      const double arg = (d.dot(b.direction) - 1.0) / (b.width * b.width);
      if (arg > -40.0) r += b.amplitude * std::exp(arg);
    }
    return r;
  }

  /// Signed implicit value |p| - r(p/|p|).
  double implicit(const Vec3<double>& p) const {
    const double len = p.norm();
    return len - radius(p / len);
  }

  /// Gradient of r on the unit sphere at direction d.
  Vec3<double> tangential_gradient(const Vec3<double>& d) const {
    Vec3<double> dr = Vec3<double>::Zero();
    for (const auto& b : bumps_) {
      const double s = 1.0 / (b.width * b.width);
      dr += b.amplitude * s * std::exp((d.dot(b.direction) - 1.0) * s) * b.direction;
    }
    return dr - d * d.dot(dr);
  }

  Vec3<double> normal(const Vec3<double>& p) const {
    const double len = p.norm();
    const Vec3<double> d = p / len;
    return (d - tangential_gradient(d) / len).normalized();
  }

  /// Nearest positive ray parameter of the surface hit, or a negative value.
  double intersect(const Vec3<double>& origin, const Vec3<double>& dir) const {
    const double outer = bumps_.empty() ? spec_.radius : outer_;
    const double b = origin.dot(dir), c = origin.squaredNorm() - outer * outer;
    const double disc = b * b - c;
    if (disc < 0.0) return -1.0;
    const double t0 = -b - std::sqrt(disc), t1 = -b + std::sqrt(disc);
    if (bumps_.empty()) return t0 > 0.0 ? t0 : -1.0;
    // Sphere tracing with a Lipschitz bound of the implicit along the ray,
    // then bisection once the sign flips.
    double t = std::max(t0, 0.0);
    double prev_t = t;
    while (t <= t1) {
      const double f = implicit(origin + t * dir);
      if (f <= 0.0) {
        double lo = prev_t, hi = t;
        for (int it = 0; it < 24; ++it) {
          const double mid = 0.5 * (lo + hi);
          (implicit(origin + mid * dir) > 0.0 ? lo : hi) = mid;
        }
        return 0.5 * (lo + hi);
      }
      prev_t = t;
      t += std::max(f / lipschitz_, 1e-4);
    }
    return -1.0;
  }

  Vec3<double> albedo(const Vec3<double>& p) const {
    return spec_.shape == SyntheticShape::two_material && p.z() < 0.0 ? spec_.albedo_b : spec_.albedo;
  }

  Vec3<double> shade(const Vec3<double>& p) const {
    const double ndotl = std::max(0.0, normal(p).dot(spec_.light_direction.normalized()));
    return (albedo(p) * (spec_.ambient + spec_.light_intensity * ndotl)).cwiseMin(1.0);
  }

  /// Region label used by the two-material analyses (0: z >= 0, 1: z < 0).
  static int material_label(const Vec3<double>& p) { return p.z() < 0.0 ? 1 : 0; }

  /// Dense triangulation of the surface.
  Mesh<double> reference_mesh(int subdivisions = 6) const {
    Mesh<double> mesh = icosphere<double>(subdivisions, 1.0);
    for (auto& v : mesh.vertices) v = v.normalized() * radius(v.normalized());
    return mesh;
  }

  const std::vector<Bump>& bumps() const { return bumps_; }

 private:
  SyntheticSceneSpec spec_;
  std::vector<Bump> bumps_;
  double outer_ = 0.0;
  double lipschitz_ = 1.0;
};

inline std::vector<Camera<double>> camera_ring(const SyntheticSceneSpec& spec) {
  std::vector<Camera<double>> cams;
  for (int i = 0; i < spec.camera_count; ++i) {
    const double az = 360.0 * i / spec.camera_count;
    const double el = (i % 2 == 0 ? 1.0 : -1.0) * spec.camera_elevation;
    cams.push_back(orbit_camera<double>(az, el, spec.camera_distance, Vec3<double>::Zero(), spec.resolution,
                                        spec.resolution, spec.focal));
  }
  return cams;
}

/// Supersampled analytic rendering: color averaged over all samples with a
/// black background, mask = covered fraction > 0.5.
inline View<double> render_analytic_view(const AnalyticShape& shape, const Camera<double>& cam, int supersampling, int id = 0) {
  View<double> view;
  view.id = id;
  view.camera = cam;
  view.image = Image(cam.width, cam.height, 3);
  view.mask = Image(cam.width, cam.height, 1);
  const Mat3<double> K_inv = cam.K.inverse();
  const Vec3<double> origin = cam.center();
  const int s = supersampling;
  const double inv = 1.0 / (s * s);
  for (int y = 0; y < cam.height; ++y)
    for (int x = 0; x < cam.width; ++x) {
      Vec3<double> color = Vec3<double>::Zero();
      int hits = 0;
      for (int sy = 0; sy < s; ++sy)
        for (int sx = 0; sx < s; ++sx) {
          const Vec3<double> dir = pixel_ray(cam, K_inv, x + (sx + 0.5) / s, y + (sy + 0.5) / s).normalized();
          const double t = shape.intersect(origin, dir);
          if (t <= 0.0) continue;
          ++hits;
          color += shape.shade(origin + t * dir);
        }
      for (int c = 0; c < 3; ++c) view.image.at(x, y, c) = static_cast<float>(color[c] * inv);
      view.mask.at(x, y) = hits * inv > 0.5 ? 1.0f : 0.0f;
    }
  return view;
}

struct SyntheticScene {
  SyntheticSceneSpec spec;
  std::vector<View<double>> views;
  Mesh<double> reference;
};

inline SyntheticScene generate_synthetic_scene(const SyntheticSceneSpec& spec, std::uint64_t seed) {
  spec.validate();
  const AnalyticShape shape(spec, seed);
  SyntheticScene scene;
  scene.spec = spec;
  scene.spec.bumps = shape.bumps();
  const auto cams = camera_ring(spec);
  for (std::size_t i = 0; i < cams.size(); ++i)
    scene.views.push_back(render_analytic_view(shape, cams[i], spec.supersampling, static_cast<int>(i)));
  scene.reference = shape.reference_mesh();
  return scene;
}

inline nlohmann::json spec_to_json(const SyntheticSceneSpec& spec) {
  auto vec = [](const Vec3<double>& v) { return std::vector<double>{v.x(), v.y(), v.z()}; };
  nlohmann::json bumps = nlohmann::json::array();
  for (const auto& b : spec.bumps) bumps.push_back({{"direction", vec(b.direction)}, {"amplitude", b.amplitude}, {"width", b.width}});
  return {{"v", 1},
          {"shape", to_string(spec.shape)},
          {"radius", spec.radius},
          {"bump_count", spec.bump_count},
          {"bump_amplitude", spec.bump_amplitude},
          {"bump_width", spec.bump_width},
          {"dents", spec.dents},
          {"bumps", bumps},
          {"albedo", vec(spec.albedo)},
          {"albedo_b", vec(spec.albedo_b)},
          {"light_direction", vec(spec.light_direction)},
          {"light_intensity", spec.light_intensity},
          {"ambient", spec.ambient},
          {"camera_count", spec.camera_count},
          {"camera_distance", spec.camera_distance},
          {"camera_elevation", spec.camera_elevation},
          {"focal", spec.focal},
          {"resolution", spec.resolution},
          {"supersampling", spec.supersampling}};
}

/// Missing keys keep their defaults.
inline SyntheticSceneSpec spec_from_json(const nlohmann::json& j) {
  SyntheticSceneSpec spec;
  try {
    auto vec = [&](const char* key, Vec3<double>& out) {
      if (!j.contains(key)) return;
      const auto v = j.at(key).get<std::vector<double>>();
      if (v.size() != 3) throw Error(ErrorCode::parse, std::string("'") + key + "' must have 3 components");
      out = Vec3<double>(v[0], v[1], v[2]);
    };
    if (j.contains("shape")) spec.shape = parse_shape(j.at("shape").get<std::string>());
    spec.radius = j.value("radius", spec.radius);
    spec.bump_count = j.value("bump_count", spec.bump_count);
    spec.bump_amplitude = j.value("bump_amplitude", spec.bump_amplitude);
    spec.bump_width = j.value("bump_width", spec.bump_width);
    spec.dents = j.value("dents", spec.dents);
    if (j.contains("bumps"))
      for (const auto& b : j.at("bumps")) {
        const auto d = b.at("direction").get<std::vector<double>>();
        if (d.size() != 3) throw Error(ErrorCode::parse, "bump direction must have 3 components");
        spec.bumps.push_back({Vec3<double>(d[0], d[1], d[2]), b.at("amplitude").get<double>(), b.at("width").get<double>()});
      }
    vec("albedo", spec.albedo);
    vec("albedo_b", spec.albedo_b);
    vec("light_direction", spec.light_direction);
    spec.light_intensity = j.value("light_intensity", spec.light_intensity);
    spec.ambient = j.value("ambient", spec.ambient);
    spec.camera_count = j.value("camera_count", spec.camera_count);
    spec.camera_distance = j.value("camera_distance", spec.camera_distance);
    spec.camera_elevation = j.value("camera_elevation", spec.camera_elevation);
    spec.focal = j.value("focal", spec.focal);
    spec.resolution = j.value("resolution", spec.resolution);
    spec.supersampling = j.value("supersampling", spec.supersampling);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::parse, std::string("invalid synthetic scene spec: ") + e.what());
  }
  spec.validate();
  return spec;
}

/// Writes the dataset layout plus `reference.obj` and `scene.json`.
inline void save_synthetic_scene(const SyntheticScene& scene, const std::filesystem::path& dir) {
  save_dataset(dir, scene.views, Vec3<double>::Constant(-1.0), Vec3<double>::Constant(1.0));
  save_mesh(scene.reference, dir / "reference.obj");
  write_file_atomic(dir / "scene.json", spec_to_json(scene.spec).dump(2));
}

}  // namespace mvr
