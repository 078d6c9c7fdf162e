#pragma once

#include "mvr/adam.hpp"
#include "mvr/checkpoint.hpp"
#include "mvr/objective.hpp"
#include "mvr/remesh.hpp"
#include "mvr/visual_hull.hpp"

#include <algorithm>
#include <iomanip>
#include <set>

namespace mvr {

struct OptimConfig {
  int iterations = 2000;
  std::vector<int> remesh_iterations = {500, 1000, 1500};
  int views_per_iteration = 1;
  double pixel_fraction = 0.75;
  double lr_vertices = 1e-3;
  double lr_shader = 1e-3;
  double sine_lr_scale = 0.1;  // applied to lr_shader for sine activations
  double weight_multiplier = 4.0;
  double vertex_lr_multiplier = 0.75;
  AdamHyper adam;
  std::uint64_t seed = 0;
  LossWeights weights;
  ShaderArchitecture shader;
  EncodingConfig encoding;
  int hull_resolution = 32;
  double hull_margin_cells = 0.5;
  bool hull_remesh = true;

  struct Refinement {
    int iterations = 1000;
    std::vector<int> remesh_iterations = {500};
    double lr_vertices = 1e-4;
    double lr_shader = 2e-3;
  } refine;

  void validate() const {
    if (iterations < 0) throw Error(ErrorCode::invalid_argument, "iterations must be >= 0");
    for (int r : remesh_iterations)
      if (r <= 0 || r >= std::max(iterations, 1))
        throw Error(ErrorCode::invalid_argument, "remesh iteration " + std::to_string(r) + " is not inside (0, " +
                                                     std::to_string(iterations) + ")");
    if (views_per_iteration < 1) throw Error(ErrorCode::invalid_argument, "views per iteration must be >= 1");
    if (!(pixel_fraction > 0.0 && pixel_fraction <= 1.0))
      throw Error(ErrorCode::invalid_argument, "pixel fraction must lie in (0, 1]");
    for (double lr : {lr_vertices, lr_shader, refine.lr_vertices, refine.lr_shader})
      if (!(lr >= 0.0)) throw Error(ErrorCode::invalid_argument, "step sizes must be non-negative");
    if (!(sine_lr_scale > 0.0) || !(weight_multiplier >= 0.0) || !(vertex_lr_multiplier >= 0.0))
      throw Error(ErrorCode::invalid_argument, "schedule multipliers must be non-negative");
    if (!(adam.beta1 >= 0.0 && adam.beta1 < 1.0 && adam.beta2 >= 0.0 && adam.beta2 < 1.0 && adam.epsilon > 0.0))
      throw Error(ErrorCode::invalid_argument, "Adam betas must lie in [0, 1) and epsilon must be positive");
    if (hull_resolution < 2) throw Error(ErrorCode::invalid_argument, "hull resolution must be >= 2");
    weights.validate();
    shader.validate();
  }

  /// The same configuration with the refinement schedule and step sizes in place.
  OptimConfig refinement() const {
    OptimConfig c = *this;
    c.iterations = refine.iterations;
    c.remesh_iterations = refine.remesh_iterations;
    c.lr_vertices = refine.lr_vertices;
    c.lr_shader = refine.lr_shader;
    return c;
  }

  double effective_lr_shader() const { return shader.activation == Activation::sine ? lr_shader * sine_lr_scale : lr_shader; }
};

inline nlohmann::json to_json(const OptimConfig& c) {
  nlohmann::json j;
  j["v"] = kFormatVersion;
  j["iterations"] = c.iterations;
  j["remesh_iterations"] = c.remesh_iterations;
  j["views_per_iteration"] = c.views_per_iteration;
  j["pixel_fraction"] = c.pixel_fraction;
  j["lr_vertices"] = c.lr_vertices;
  j["lr_shader"] = c.lr_shader;
  j["sine_lr_scale"] = c.sine_lr_scale;
  j["weight_multiplier"] = c.weight_multiplier;
  j["vertex_lr_multiplier"] = c.vertex_lr_multiplier;
  j["adam"] = {{"beta1", c.adam.beta1}, {"beta2", c.adam.beta2}, {"epsilon", c.adam.epsilon}};
  j["seed"] = c.seed;
  j["weights"] = {{"shading", c.weights.shading},
                  {"silhouette", c.weights.silhouette},
                  {"laplacian", c.weights.laplacian},
                  {"normal", c.weights.normal}};
  j["shader"] = to_json(c.shader);
  j["encoding"] = to_json(c.encoding);
  j["hull"] = {{"resolution", c.hull_resolution}, {"margin_cells", c.hull_margin_cells}, {"remesh", c.hull_remesh}};
  j["refine"] = {{"iterations", c.refine.iterations},
                 {"remesh_iterations", c.refine.remesh_iterations},
                 {"lr_vertices", c.refine.lr_vertices},
                 {"lr_shader", c.refine.lr_shader}};
  return j;
}

/// Reads a configuration; missing keys keep their defaults, unknown keys are errors.
inline OptimConfig config_from_json(const nlohmann::json& j) {
  detail::check_version(j, "config");
  const std::string w = "config";
  detail::require_known_keys(j,
                             {"v", "iterations", "remesh_iterations", "views_per_iteration", "pixel_fraction",
                              "lr_vertices", "lr_shader", "sine_lr_scale", "weight_multiplier", "vertex_lr_multiplier",
                              "adam", "seed", "weights", "shader", "encoding", "hull", "refine"},
                             w);
  OptimConfig c;
  detail::read_if(j, "iterations", c.iterations, w);
  detail::read_if(j, "remesh_iterations", c.remesh_iterations, w);
  detail::read_if(j, "views_per_iteration", c.views_per_iteration, w);
  detail::read_if(j, "pixel_fraction", c.pixel_fraction, w);
  detail::read_if(j, "lr_vertices", c.lr_vertices, w);
  detail::read_if(j, "lr_shader", c.lr_shader, w);
  detail::read_if(j, "sine_lr_scale", c.sine_lr_scale, w);
  detail::read_if(j, "weight_multiplier", c.weight_multiplier, w);
  detail::read_if(j, "vertex_lr_multiplier", c.vertex_lr_multiplier, w);
  detail::read_if(j, "seed", c.seed, w);
  if (j.contains("adam")) {
    const auto& a = j.at("adam");
    detail::require_known_keys(a, {"beta1", "beta2", "epsilon"}, "config.adam");
    detail::read_if(a, "beta1", c.adam.beta1, "config.adam");
    detail::read_if(a, "beta2", c.adam.beta2, "config.adam");
    detail::read_if(a, "epsilon", c.adam.epsilon, "config.adam");
  }
  if (j.contains("weights")) {
    const auto& a = j.at("weights");
    detail::require_known_keys(a, {"shading", "silhouette", "laplacian", "normal"}, "config.weights");
    detail::read_if(a, "shading", c.weights.shading, "config.weights");
    detail::read_if(a, "silhouette", c.weights.silhouette, "config.weights");
    detail::read_if(a, "laplacian", c.weights.laplacian, "config.weights");
    detail::read_if(a, "normal", c.weights.normal, "config.weights");
  }
  if (j.contains("shader")) c.shader = architecture_from_json(j.at("shader"));
  if (j.contains("encoding")) c.encoding = encoding_from_json(j.at("encoding"));
  if (j.contains("hull")) {
    const auto& a = j.at("hull");
    detail::require_known_keys(a, {"resolution", "margin_cells", "remesh"}, "config.hull");
    detail::read_if(a, "resolution", c.hull_resolution, "config.hull");
    detail::read_if(a, "margin_cells", c.hull_margin_cells, "config.hull");
    detail::read_if(a, "remesh", c.hull_remesh, "config.hull");
  }
  if (j.contains("refine")) {
    const auto& a = j.at("refine");
    detail::require_known_keys(a, {"iterations", "remesh_iterations", "lr_vertices", "lr_shader"}, "config.refine");
    detail::read_if(a, "iterations", c.refine.iterations, "config.refine");
    detail::read_if(a, "remesh_iterations", c.refine.remesh_iterations, "config.refine");
    detail::read_if(a, "lr_vertices", c.refine.lr_vertices, "config.refine");
    detail::read_if(a, "lr_shader", c.refine.lr_shader, "config.refine");
  }
  c.validate();
  return c;
}

/// Sets one dotted key ("weights.shading", "iterations") from its text form.
/// The value is read as JSON when it parses, otherwise as a string.
inline void apply_override(nlohmann::json& config, const std::string& key, const std::string& value) {
  nlohmann::json parsed;
  try {
    parsed = nlohmann::json::parse(value);
  } catch (const nlohmann::json::exception&) {
    parsed = value;
  }
  nlohmann::json* node = &config;
  std::size_t start = 0;
  while (true) {
    const std::size_t dot = key.find('.', start);
    const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (part.empty()) throw Error(ErrorCode::invalid_argument, "malformed config key '" + key + "'");
    if (dot == std::string::npos) {
      (*node)[part] = parsed;
      return;
    }
    if (!node->contains(part) || !(*node)[part].is_object()) (*node)[part] = nlohmann::json::object();
    node = &(*node)[part];
    start = dot + 1;
  }
}

inline OptimConfig load_config(const std::filesystem::path& path) {
  try {
    return config_from_json(nlohmann::json::parse(read_file(path)));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::parse, path.string() + ": " + e.what());
  }
}

/// One optimizer iteration as recorded in the report.
struct IterationRecord {
  int iteration = 0;
  LossTerms terms;
  std::size_t vertex_count = 0;
  std::size_t face_count = 0;
  std::size_t shaded_pixels = 0;
  PhaseTimes phases;
  double wall_seconds = 0.0;
  bool skipped = false;   // non-finite loss, no step taken
  bool remeshed = false;  // a remesh followed this iteration
};

struct RunReport {
  std::vector<IterationRecord> records;
  double total_seconds = 0.0;
  std::size_t initial_vertices = 0;
  std::size_t final_vertices = 0;
  int skipped_iterations = 0;

  std::string to_csv() const {
    std::ostringstream out;
    out << std::setprecision(9);
    out << "iteration,shading,silhouette,laplacian,normal,total,vertices,faces,shaded_pixels";
    for (const char* name : kPhaseNames) out << ',' << name << "_s";
    out << ",wall_s,skipped,remeshed\n";
    for (const auto& r : records) {
      out << r.iteration << ',' << r.terms.shading << ',' << r.terms.silhouette << ',' << r.terms.laplacian << ','
          << r.terms.normal << ',' << r.terms.total() << ',' << r.vertex_count << ',' << r.face_count << ','
          << r.shaded_pixels;
      for (double s : r.phases.seconds) out << ',' << s;
      out << ',' << r.wall_seconds << ',' << int(r.skipped) << ',' << int(r.remeshed) << '\n';
    }
    return out.str();
  }

  /// Final losses and per-phase time totals.
  nlohmann::json summary() const {
    nlohmann::json j;
    j["v"] = kFormatVersion;
    j["iterations"] = records.size();
    j["skipped_iterations"] = skipped_iterations;
    j["initial_vertices"] = initial_vertices;
    j["final_vertices"] = final_vertices;
    j["total_seconds"] = total_seconds;
    PhaseTimes sum;
    double wall = 0.0;
    for (const auto& r : records) {
      sum += r.phases;
      wall += r.wall_seconds;
    }
    nlohmann::json phases;
    for (std::size_t i = 0; i < kPhaseNames.size(); ++i) phases[kPhaseNames[i]] = sum.seconds[i];
    j["phase_seconds"] = phases;
    j["iteration_wall_seconds"] = wall;
    j["mean_iteration_seconds"] = records.empty() ? 0.0 : wall / static_cast<double>(records.size());
    if (!records.empty()) {
      const auto& t = records.back().terms;
      j["final_losses"] = {{"shading", t.shading},     {"silhouette", t.silhouette}, {"laplacian", t.laplacian},
                           {"normal", t.normal},       {"total", t.total()}};
    }
    return j;
  }
};

/// Raised when remeshing yields a non-manifold surface; carries the mesh
/// from just before the failed remesh.
class TangledMeshError : public Error {
 public:
  TangledMeshError(const std::string& message, Mesh<double> last_good, int iteration)
      : Error(ErrorCode::tangled_mesh, message), last_good_(std::move(last_good)), iteration_(iteration) {}
  const Mesh<double>& last_good() const { return last_good_; }
  int iteration() const { return iteration_; }

 private:
  Mesh<double> last_good_;
  int iteration_;
};

struct RunHooks {
  std::function<void(const IterationRecord&)> on_iteration;
  // called with the mesh right after each remesh
  std::function<void(int iteration, const Mesh<float>&)> on_remesh;
};

struct RunResult {
  Mesh<float> initial;
  Mesh<float> mesh;
  ShaderParams<float> shader;
  RunReport report;
};

template <class T>
std::vector<View<float>> views_as_float(const std::vector<View<T>>& views) {
  std::vector<View<float>> out;
  out.reserve(views.size());
  for (const auto& v : views) out.push_back(v.template cast<float>());
  return out;
}

/// Joint optimization of mesh and shader from `initial`.
inline RunResult optimize(const std::vector<View<float>>& views, const Mesh<float>& initial, const OptimConfig& config,
                          const RunHooks& hooks = {}) {
  config.validate();
  if (views.empty()) throw Error(ErrorCode::invalid_argument, "no views to optimize against");
  {
    const auto report = check_manifold(initial);
    if (!report.ok) throw Error(ErrorCode::non_manifold, "initial mesh is not manifold: " + report.message);
  }
  const auto start = std::chrono::steady_clock::now();
  RunResult res;
  res.initial = initial;
  res.mesh = initial;
  res.shader = init_params<float>(config.shader, config.encoding, config.seed);
  res.report.initial_vertices = initial.vertices.size();

  Mesh<float>& mesh = res.mesh;
  ShaderParams<float>& shader = res.shader;
  ConnectivityCache cache = build_connectivity(mesh);
  LossWeights weights = config.weights;
  AdamState<float> vertex_adam(static_cast<Eigen::Index>(3 * mesh.vertices.size()), config.lr_vertices, config.adam, "vertices");
  AdamState<float> shader_adam(shader.theta.size(), config.effective_lr_shader(), config.adam, "shader");
  const std::set<int> remesh_at(config.remesh_iterations.begin(), config.remesh_iterations.end());
  std::mt19937_64 rng(config.seed);
  std::uniform_int_distribution<std::size_t> pick_view(0, views.size() - 1);

  for (int it = 0; it < config.iterations; ++it) {
    const auto it_start = std::chrono::steady_clock::now();
    IterationRecord rec;
    rec.iteration = it;
    rec.vertex_count = mesh.vertices.size();
    rec.face_count = mesh.faces.size();

    std::vector<const View<float>*> batch;
    for (int k = 0; k < config.views_per_iteration; ++k) batch.push_back(&views[pick_view(rng)]);
    ObjectiveResult<float> obj =
        total_objective(mesh, cache, shader, batch, weights, config.pixel_fraction, rng, &rec.phases);
    rec.terms = obj.terms;
    rec.shaded_pixels = obj.shaded_pixels;

    if (!obj.terms.finite()) {
      rec.skipped = true;
      ++res.report.skipped_iterations;
      log::warn("iteration " + std::to_string(it) + ": non-finite loss, step skipped");
    } else {
      PhaseScope scope(&rec.phases, Phase::step);
      const std::vector<Vec3<float>> saved_vertices = mesh.vertices;
      const VecX<float> saved_theta = shader.theta;
      const AdamState<float> saved_vadam = vertex_adam, saved_sadam = shader_adam;
      adam_step(vertex_adam, mesh.vertices, obj.grad_vertices);
      adam_step(shader_adam, shader.theta, obj.grad_theta);
      bool finite = shader.theta.allFinite();
      for (const auto& v : mesh.vertices) finite = finite && all_finite(v);
      if (!finite) {
        mesh.vertices = saved_vertices;
        shader.theta = saved_theta;
        vertex_adam = saved_vadam;
        shader_adam = saved_sadam;
        rec.skipped = true;
        ++res.report.skipped_iterations;
        log::warn("iteration " + std::to_string(it) + ": step produced non-finite parameters and was rolled back");
      }
    }

    if (remesh_at.count(it + 1)) {
      PhaseScope scope(&rec.phases, Phase::remesh);
      const Mesh<double> before = mesh.template cast<double>();
      const double target = 0.5 * mean_edge_length(before);
      Mesh<double> after;
      try {
        after = remesh(before, target);
      } catch (const Error& e) {
        throw TangledMeshError("remesh after iteration " + std::to_string(it + 1) + " failed: " + e.what(), before, it + 1);
      }
      const auto report = check_manifold(after);
      if (!report.ok || after.faces.empty())
        throw TangledMeshError("remesh after iteration " + std::to_string(it + 1) +
                                   " produced a tangled mesh: " + (report.ok ? "no faces left" : report.message),
                               before, it + 1);
      mesh = after.template cast<float>();
      cache = build_connectivity(mesh);
      weights.laplacian *= config.weight_multiplier;
      weights.normal *= config.weight_multiplier;
      vertex_adam.lr *= config.vertex_lr_multiplier;
      vertex_adam.reset(static_cast<Eigen::Index>(3 * mesh.vertices.size()));
      rec.remeshed = true;
      scope.stop();
      if (hooks.on_remesh) hooks.on_remesh(it + 1, mesh);
    }
    rec.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - it_start).count();
    res.report.records.push_back(rec);
    if (hooks.on_iteration) hooks.on_iteration(rec);
  }
  res.report.final_vertices = mesh.vertices.size();
  res.report.total_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return res;
}

inline VisualHullOptions hull_options(const OptimConfig& config) {
  VisualHullOptions o;
  o.resolution = config.hull_resolution;
  o.margin_cells = config.hull_margin_cells;
  o.remesh = config.hull_remesh;
  return o;
}

/// Visual hull initialization followed by the coarse-to-fine optimization.
inline RunResult run_reconstruction(const Dataset& data, const OptimConfig& config, const RunHooks& hooks = {}) {
  config.validate();
  const Mesh<float> hull = visual_hull(data.views, hull_options(config)).template cast<float>();
  return optimize(views_as_float(data.views), hull, config, hooks);
}

/// Continues from an existing mesh with the refinement schedule and step sizes.
inline RunResult run_refinement(const Dataset& data, const Mesh<double>& initial, const OptimConfig& config,
                                const RunHooks& hooks = {}) {
  return optimize(views_as_float(data.views), initial.template cast<float>(), config.refinement(), hooks);
}

}  // namespace mvr
