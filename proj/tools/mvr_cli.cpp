#include "mvr/http_server.hpp"
#include "mvr/mvr.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <cstdlib>
#include <iostream>

namespace fs = std::filesystem;
using namespace mvr;

namespace {

/// A required input that does not exist; maps to exit code 2.
struct MissingPath : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void require_path(const fs::path& p, const std::string& what, bool directory = false) {
  if (p.empty() || !fs::exists(p)) throw MissingPath(what + " not found: " + p.string());
  if (directory && !fs::is_directory(p)) throw MissingPath(what + " is not a directory: " + p.string());
}

/// Inline JSON text, or the path of a file holding it.
nlohmann::json json_argument(const std::string& arg, const std::string& what) {
  std::string text = arg;
  if (!arg.empty() && arg.front() != '{' && arg.front() != '[') {
    require_path(arg, what);
    text = read_file(arg);
  }
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::parse, what + ": " + e.what());
  }
}

struct ConfigFlags {
  std::string config;
  std::vector<std::string> sets;
  std::map<std::string, std::string> named;  // config key -> raw value

  void add(CLI::App& app) {
    app.add_option("--config", config, "JSON run configuration (default: $MVR_CONFIG when set)");
    app.add_option("--set", sets, "Override any config key, e.g. --set weights.normal=0.2")->take_all();
    const std::vector<std::pair<std::string, std::string>> keys = {
        {"--iterations", "iterations"},         {"--seed", "seed"},
        {"--views-per-iteration", "views_per_iteration"}, {"--pixel-fraction", "pixel_fraction"},
        {"--lr-vertices", "lr_vertices"},       {"--lr-shader", "lr_shader"},
        {"--w-shading", "weights.shading"},     {"--w-silhouette", "weights.silhouette"},
        {"--w-laplacian", "weights.laplacian"}, {"--w-normal", "weights.normal"},
        {"--encoding", "encoding.kind"},        {"--octaves", "encoding.octaves"},
        {"--activation", "shader.activation"},  {"--h-layers", "shader.h_layers"},
        {"--h-width", "shader.h_width"},        {"--hull-resolution", "hull.resolution"},
        {"--refine-iterations", "refine.iterations"}};
    for (const auto& [flag, key] : keys) app.add_option(flag, named[key], "Sets config key " + key);
    app.add_option("--remesh", remesh, "Comma-separated remesh iterations, e.g. 250 or 500,1000,1500");
    app.add_option("--refine-remesh", refine_remesh, "Comma-separated remesh iterations for refinement");
  }

  OptimConfig resolve() const {
    nlohmann::json j;
    std::string path = config;
    if (path.empty())
      if (const char* env = std::getenv("MVR_CONFIG"); env && *env) path = env;
    if (!path.empty()) {
      require_path(path, "config file");
      try {
        j = nlohmann::json::parse(read_file(path));
      } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::parse, path + ": " + e.what());
      }
    } else {
      j = to_json(OptimConfig{});
    }
    for (const auto& [key, value] : named)
      if (!value.empty()) apply_override(j, key, value);
    if (!remesh.empty()) apply_override(j, "remesh_iterations", "[" + remesh + "]");
    if (!refine_remesh.empty()) apply_override(j, "refine.remesh_iterations", "[" + refine_remesh + "]");
    for (const auto& s : sets) {
      const auto eq = s.find('=');
      if (eq == std::string::npos || eq == 0) throw Error(ErrorCode::invalid_argument, "--set expects key=value, got '" + s + "'");
      apply_override(j, s.substr(0, eq), s.substr(eq + 1));
    }
    return config_from_json(j);
  }

  std::string remesh;
  std::string refine_remesh;
};

void print_record(const IterationRecord& r) {
  std::printf("iter %5d  total %.5f  shading %.5f  silhouette %.5f  laplacian %.5f  normal %.5f  vertices %zu%s\n",
              r.iteration, r.terms.total(), r.terms.shading, r.terms.silhouette, r.terms.laplacian, r.terms.normal,
              r.vertex_count, r.remeshed ? "  (remeshed)" : "");
  std::fflush(stdout);
}

Mesh<double> to_world(const Mesh<float>& m, const SceneNormalization& norm) {
  Mesh<double> out = m.cast<double>();
  for (auto& v : out.vertices) v = norm.invert(v);
  return out;
}

void write_run_outputs(const fs::path& out, const RunResult& res, const OptimConfig& config, const Dataset& data) {
  save_mesh(res.mesh, out / "mesh.obj");
  save_mesh(to_world(res.mesh, data.normalization), out / "mesh_world.obj");
  save_mesh(res.initial, out / "initial.obj");
  save_checkpoint(res.shader, out / "shader.json");
  write_file_atomic(out / "report.csv", res.report.to_csv());
  nlohmann::json summary = res.report.summary();
  summary["config"] = to_json(config);
  summary["normalization"] = {{"scale", data.normalization.scale},
                              {"center", {data.normalization.center.x(), data.normalization.center.y(),
                                          data.normalization.center.z()}}};
  write_file_atomic(out / "report.json", summary.dump(2));
}

int run_optimization(const std::string& data_dir, const std::string& out_dir, const std::string& mesh_path,
                     const ConfigFlags& flags, bool quiet, bool snapshots) {
  require_path(data_dir, "dataset directory", true);
  const bool refine = !mesh_path.empty();
  if (refine) require_path(mesh_path, "mesh");
  const OptimConfig config = flags.resolve();
  const Dataset data = load_dataset(data_dir);
  const fs::path out(out_dir);
  fs::create_directories(out);
  RunHooks hooks;
  const int total = refine ? config.refine.iterations : config.iterations;
  if (!quiet)
    hooks.on_iteration = [total](const IterationRecord& r) {
      if (r.iteration % 50 == 0 || r.iteration + 1 == total) print_record(r);
    };
  if (snapshots)
    hooks.on_remesh = [out](int it, const Mesh<float>& m) {
      char name[64];
      std::snprintf(name, sizeof(name), "remesh_%05d.obj", it);
      save_mesh(m, out / "snapshots" / name);
    };
  try {
    RunResult res;
    if (refine) {
      Mesh<double> initial = load_mesh(mesh_path);
      for (auto& v : initial.vertices) v = data.normalization.apply(v);
      res = run_refinement(data, initial, config, hooks);
      write_run_outputs(out, res, config.refinement(), data);
    } else {
      res = run_reconstruction(data, config, hooks);
      write_run_outputs(out, res, config, data);
    }
    if (!quiet)
      std::printf("done: %zu vertices, %zu faces, %.1f s; outputs in %s\n", res.mesh.vertices.size(), res.mesh.faces.size(),
                  res.report.total_seconds, out.string().c_str());
  } catch (const TangledMeshError& e) {
    save_mesh(e.last_good(), out / "last_good.obj");
    throw Error(ErrorCode::tangled_mesh, std::string(e.what()) + "; last good mesh saved to " + (out / "last_good.obj").string());
  }
  return 0;
}

/// Full render request from a --camera argument: either a request object
/// with "camera" inside, or just the camera object.
nlohmann::json render_request(const std::string& camera_arg, int width, int height) {
  nlohmann::json j = json_argument(camera_arg, "camera spec");
  if (!j.is_object()) throw Error(ErrorCode::parse, "camera spec must be a JSON object");
  if (!j.contains("camera")) j = nlohmann::json{{"camera", j}};
  if (width > 0) j["width"] = width;
  if (height > 0) j["height"] = height;
  return j;
}

ServiceModel load_model(const std::string& mesh_path, const std::string& shader_path, int max_resolution) {
  require_path(mesh_path, "mesh");
  require_path(shader_path, "shader checkpoint");
  return ServiceModel(load_mesh(mesh_path).cast<float>(), load_checkpoint(shader_path), max_resolution);
}

Image scatter_plot(const MatX<double>& xy, const std::vector<int>& groups, int size = 512) {
  Image img(size, size, 3, 1.0f);
  if (xy.rows() == 0) return img;
  const Eigen::Vector2d lo = xy.leftCols(2).colwise().minCoeff().transpose();
  const Eigen::Vector2d hi = xy.leftCols(2).colwise().maxCoeff().transpose();
  const Eigen::Vector2d span = (hi - lo).cwiseMax(1e-12);
  const float palette[2][3] = {{0.12f, 0.47f, 0.71f}, {1.0f, 0.5f, 0.05f}};
  const int margin = 16;
  for (Eigen::Index i = 0; i < xy.rows(); ++i) {
    const int cx = margin + static_cast<int>((xy(i, 0) - lo.x()) / span.x() * (size - 2 * margin - 1));
    const int cy = size - 1 - margin - static_cast<int>((xy(i, 1) - lo.y()) / span.y() * (size - 2 * margin - 1));
    const float* col = palette[groups[static_cast<std::size_t>(i)] ? 1 : 0];
    for (int dy = -1; dy <= 1; ++dy)
      for (int dx = -1; dx <= 1; ++dx)
        for (int c = 0; c < 3; ++c) img.at(cx + dx, cy + dy, c) = col[c];
  }
  return img;
}

int cmd_analyze(const std::string& shader_path, const std::string& mesh_path, const std::string& out_dir, std::size_t samples,
                std::uint64_t seed, const std::string& camera_arg, const std::string& selector_arg,
                const std::string& source_arg, double blend) {
  const ServiceModel model = load_model(mesh_path, shader_path, 4096);
  const fs::path out(out_dir);
  fs::create_directories(out);
  const auto pts = sample_surface(model.mesh, samples, seed);
  const PcaResult p = pca_positional_features(model.shader, pts.points);
  const std::vector<int> clusters = two_means(p.projections);
  const RegionSelector target = parse_selector(json_argument(selector_arg, "selector"), "selector");
  const RegionSelector source = parse_selector(json_argument(source_arg, "source selector"), "source");
  std::vector<int> labels;
  std::ostringstream csv;
  csv << std::setprecision(9) << "x,y,z,pc1,pc2,cluster,in_selector\n";
  for (std::size_t i = 0; i < pts.points.size(); ++i) {
    const auto& x = pts.points[i];
    labels.push_back(target.contains(x) ? 1 : 0);
    csv << x.x() << ',' << x.y() << ',' << x.z() << ',' << p.projections(i, 0) << ',' << p.projections(i, 1) << ','
        << clusters[i] << ',' << labels.back() << '\n';
  }
  write_file_atomic(out / "pca.csv", csv.str());
  write_png(out / "pca.png", scatter_plot(p.projections, clusters));

  const auto replacement = region_mean_feature(model.mesh, model.shader, source, samples, seed + 1);
  if (!replacement) throw Error(ErrorCode::invalid_argument, "source selector matches no surface point");
  const nlohmann::json req = render_request(camera_arg, 0, 0);
  const Camera<double> cam = parse_camera(req, model.max_resolution);
  FeatureEdit edit{target, *replacement, blend};
  const RenderOutput before = render_novel_view(model.mesh, model.shader, cam.cast<float>());
  const RenderOutput after = render_with_feature_edits(model.mesh, model.shader, cam.cast<float>(), {edit});
  write_png(out / "render_original.png", before.color);
  write_png(out / "render_edited.png", after.color);
  nlohmann::json summary{{"v", kFormatVersion},
                         {"samples", pts.points.size()},
                         {"explained_variance", {p.explained[0], p.explained[1]}},
                         {"cluster_agreement_with_selector", cluster_agreement(clusters, labels)},
                         {"replacement_feature", std::vector<float>(replacement->data(), replacement->data() + replacement->size())}};
  write_file_atomic(out / "analysis.json", summary.dump(2));
  std::printf("explained variance %.3f / %.3f, cluster agreement %.3f; outputs in %s\n", p.explained[0], p.explained[1],
              summary["cluster_agreement_with_selector"].get<double>(), out.string().c_str());
  return 0;
}

int cmd_evaluate(const std::string& mesh_path, const std::string& ref_path, const std::string& out_path,
                 const std::string& data_dir, std::size_t samples, std::uint64_t seed) {
  require_path(mesh_path, "mesh");
  require_path(ref_path, "reference");
  if (!data_dir.empty()) require_path(data_dir, "dataset directory", true);
  const Mesh<double> mesh = load_mesh(mesh_path);
  const auto mesh_pts = sample_surface(mesh, samples, seed).points;
  nlohmann::json j;
  j["v"] = kFormatVersion;
  std::vector<Vec3<double>> ref_pts;
  Mesh<double> ref_mesh;
  if (fs::path(ref_path).extension() == ".obj") ref_mesh = load_mesh(ref_path);
  if (!ref_mesh.faces.empty()) {
    ref_pts = sample_surface(ref_mesh, samples, seed + 1).points;
    const SurfaceDistance d = surface_distance(mesh, ref_mesh, samples, seed);
    j["mean_surface_distance"] = d.mean;
    j["max"] = d.max;
    j["histogram"] = {{"bin_width", d.bin_width}, {"counts", d.histogram}};
  } else {
    ref_pts = load_points(ref_path);
    if (ref_pts.empty()) throw Error(ErrorCode::parse, ref_path + " contains no points");
    const KdTree tree(ref_pts);
    std::vector<double> dist;
    for (const auto& q : mesh_pts) dist.push_back(tree.nearest(q));
    const SurfaceDistance d = summarize_distances(dist, 20);
    j["mean_surface_distance"] = d.mean;
    j["max"] = d.max;
    j["histogram"] = {{"bin_width", d.bin_width}, {"counts", d.histogram}};
  }
  const ChamferResult c = chamfer_l1(mesh_pts, ref_pts);
  j["chamfer"] = {{"a_to_b", c.a_to_b}, {"b_to_a", c.b_to_a}, {"symmetric", c.symmetric}};
  nlohmann::json iou = nlohmann::json::array();
  if (!data_dir.empty()) {
    const Dataset data = load_dataset(data_dir);
    Mesh<double> canonical = mesh;
    for (auto& v : canonical.vertices) v = data.normalization.apply(v);
    for (const auto& v : data.views) {
      const Visibility vis = rasterize_visibility(canonical, v.camera);
      std::vector<float> m(vis.triangle.size());
      for (std::size_t p = 0; p < m.size(); ++p) m[p] = vis.triangle[p] >= 0 ? 1.0f : 0.0f;
      iou.push_back(mask_iou(m, v.mask.data));
    }
  }
  j["iou_per_view"] = iou;
  write_file_atomic(out_path, j.dump(2));
  std::printf("chamfer %.6f (a->b %.6f, b->a %.6f), mean surface distance %.6f\n", c.symmetric, c.a_to_b, c.b_to_a,
              j["mean_surface_distance"].get<double>());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-view mesh and neural shader reconstruction"};
  app.require_subcommand(1);
  bool quiet = false;

  auto* rec = app.add_subcommand("reconstruct", "Reconstruct mesh and shader from a dataset");
  std::string data_dir, out_dir, mesh_path;
  bool snapshots = false;
  ConfigFlags rec_flags;
  rec->add_option("--data", data_dir, "Dataset directory")->required();
  rec->add_option("--out", out_dir, "Output directory")->required();
  rec->add_flag("--snapshots", snapshots, "Save the mesh after every remesh");
  rec->add_flag("--quiet", quiet, "Suppress progress lines");
  rec_flags.add(*rec);

  auto* ref = app.add_subcommand("refine", "Refine an existing mesh against a dataset");
  ConfigFlags ref_flags;
  ref->add_option("--data", data_dir, "Dataset directory")->required();
  ref->add_option("--mesh", mesh_path, "Initial mesh (OBJ, dataset coordinates)")->required();
  ref->add_option("--out", out_dir, "Output directory")->required();
  ref->add_flag("--snapshots", snapshots, "Save the mesh after every remesh");
  ref->add_flag("--quiet", quiet, "Suppress progress lines");
  ref_flags.add(*ref);

  auto* ren = app.add_subcommand("render", "Render a view with a trained shader");
  std::string shader_path, camera_arg, out_path;
  int width = 0, height = 0;
  ren->add_option("--mesh", mesh_path, "Mesh (OBJ, canonical coordinates)")->required();
  ren->add_option("--shader", shader_path, "Shader checkpoint")->required();
  ren->add_option("--camera", camera_arg, "Camera or render request as JSON text or file")->required();
  ren->add_option("--width", width, "Override the request width");
  ren->add_option("--height", height, "Override the request height");
  ren->add_option("--out", out_path, "Output PNG")->required();

  auto* ev = app.add_subcommand("evaluate", "Compare a mesh with a reference mesh or point set");
  std::string reference;
  std::size_t samples = 20000;
  std::uint64_t seed = 0;
  ev->add_option("--mesh", mesh_path, "Mesh to evaluate (OBJ, dataset coordinates)")->required();
  ev->add_option("--reference", reference, "Reference mesh (OBJ) or points (PLY/XYZ)")->required();
  ev->add_option("--out", out_path, "Output JSON")->required();
  ev->add_option("--data", data_dir, "Dataset directory for per-view mask IoU");
  ev->add_option("--samples", samples, "Surface samples per side");
  ev->add_option("--seed", seed, "Sampling seed");

  auto* an = app.add_subcommand("analyze", "PCA of positional features and a material edit");
  std::string selector = R"({"kind":"half_space","normal":[0,0,1],"offset":0})";
  std::string source = R"({"kind":"half_space","normal":[0,0,-1],"offset":0})";
  std::string an_camera = R"({"orbit":{"azimuth_deg":30,"elevation_deg":20,"radius":2.5},"focal":200})";
  double blend = 1.0;
  std::size_t an_samples = 4096;
  an->add_option("--shader", shader_path, "Shader checkpoint")->required();
  an->add_option("--mesh", mesh_path, "Mesh (OBJ, canonical coordinates)")->required();
  an->add_option("--out", out_dir, "Output directory")->required();
  an->add_option("--samples", an_samples, "Surface samples");
  an->add_option("--seed", seed, "Sampling seed");
  an->add_option("--camera", an_camera, "Camera for the edit renders (JSON text or file)");
  an->add_option("--selector", selector, "Region whose features are replaced (JSON)");
  an->add_option("--source", source, "Region whose mean feature is the replacement (JSON)");
  an->add_option("--blend", blend, "Edit blend weight in [0, 1]");

  auto* sy = app.add_subcommand("synth", "Generate a synthetic dataset");
  std::string spec_path, shape;
  sy->add_option("--spec", spec_path, "Scene spec JSON (defaults when omitted)");
  sy->add_option("--shape", shape, "Override the shape: sphere, blob or two_material");
  sy->add_option("--out", out_dir, "Output directory")->required();
  sy->add_option("--seed", seed, "Random seed");

  auto* sv = app.add_subcommand("serve", "Serve renders over HTTP");
  std::string host = "127.0.0.1", presets_path;
  int port = 8080, max_res = 1024;
  sv->add_option("--mesh", mesh_path, "Mesh (OBJ, canonical coordinates)")->required();
  sv->add_option("--shader", shader_path, "Shader checkpoint")->required();
  sv->add_option("--port", port, "Port");
  sv->add_option("--host", host, "Bind address");
  sv->add_option("--max-resolution", max_res, "Largest accepted width or height");
  sv->add_option("--presets", presets_path, "JSON object mapping preset names to feature vectors");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*rec) return run_optimization(data_dir, out_dir, "", rec_flags, quiet, snapshots);
    if (*ref) return run_optimization(data_dir, out_dir, mesh_path, ref_flags, quiet, snapshots);
    if (*ren) {
      const ServiceModel model = load_model(mesh_path, shader_path, std::numeric_limits<int>::max());
      const ServiceResponse r = handle_render(model, render_request(camera_arg, width, height).dump());
      if (r.status != 200) throw Error(ErrorCode::invalid_argument, "render request rejected: " + r.body);
      write_file_atomic(out_path, r.body);
      return 0;
    }
    if (*ev) return cmd_evaluate(mesh_path, reference, out_path, data_dir, samples, seed);
    if (*an) return cmd_analyze(shader_path, mesh_path, out_dir, an_samples, seed, an_camera, selector, source, blend);
    if (*sy) {
      SyntheticSceneSpec spec;
      if (!spec_path.empty()) spec = spec_from_json(json_argument(spec_path, "scene spec"));
      if (!shape.empty()) spec.shape = parse_shape(shape);
      const SyntheticScene scene = generate_synthetic_scene(spec, seed);
      save_synthetic_scene(scene, out_dir);
      std::printf("wrote %zu views and reference.obj to %s\n", scene.views.size(), out_dir.c_str());
      return 0;
    }
    if (*sv) {
      ServiceModel model = load_model(mesh_path, shader_path, max_res);
      if (!presets_path.empty()) {
        const nlohmann::json p = json_argument(presets_path, "presets");
        if (!p.is_object()) throw Error(ErrorCode::parse, "presets must be a JSON object");
        for (auto it = p.begin(); it != p.end(); ++it) {
          const auto v = it.value().get<std::vector<float>>();
          if (static_cast<int>(v.size()) != model.shader.feature_dim())
            throw Error(ErrorCode::invalid_argument, "preset '" + it.key() + "' has the wrong dimension");
          model.presets[it.key()] = Eigen::Map<const VecX<float>>(v.data(), static_cast<Eigen::Index>(v.size()));
        }
      }
      httplib::Server server;
      mount_routes(server, model);
      std::printf("listening on http://%s:%d\n", host.c_str(), port);
      std::fflush(stdout);
      if (!server.listen(host, port)) throw Error(ErrorCode::io, "cannot listen on " + host + ":" + std::to_string(port));
      return 0;
    }
  } catch (const MissingPath& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const Error& e) {
    std::fprintf(stderr, "error [%s]: %s\n", to_string(e.code()), e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
