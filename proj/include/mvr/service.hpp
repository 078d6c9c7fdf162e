#pragma once

#include "mvr/analysis.hpp"
#include "mvr/checkpoint.hpp"

#include <json.hpp>

#include <map>

namespace mvr {

/// Immutable model served by the render endpoints.
struct ServiceModel {
  Mesh<float> mesh;
  ShaderParams<float> shader;
  std::map<std::string, VecX<float>> presets;  // named replacement features
  int max_resolution = 1024;                   // per side
  Vec3<double> bbox_min = Vec3<double>::Zero();
  Vec3<double> bbox_max = Vec3<double>::Zero();

  ServiceModel() = default;
  ServiceModel(Mesh<float> m, ShaderParams<float> s, int max_res = 1024)
      : mesh(std::move(m)), shader(std::move(s)), max_resolution(max_res) {
    if (mesh.faces.empty()) throw Error(ErrorCode::empty_mesh, "service mesh has no faces");
    bbox_min = Vec3<double>::Constant(std::numeric_limits<double>::infinity());
    bbox_max = -bbox_min;
    for (const auto& v : mesh.vertices) {
      bbox_min = bbox_min.cwiseMin(v.cast<double>());
      bbox_max = bbox_max.cwiseMax(v.cast<double>());
    }
  }
};

struct ServiceResponse {
  int status = 200;
  std::string content_type = "application/json";
  std::string body;
};

/// A request problem tied to one JSON field.
class RequestError : public std::runtime_error {
 public:
  RequestError(int status, std::string code, std::string field, const std::string& message)
      : std::runtime_error(message), status_(status), code_(std::move(code)), field_(std::move(field)) {}
  int status() const { return status_; }
  const std::string& code() const { return code_; }
  const std::string& field() const { return field_; }

 private:
  int status_;
  std::string code_;
  std::string field_;
};

namespace detail {

inline ServiceResponse json_response(int status, const nlohmann::json& j) {
  return {status, "application/json", j.dump()};
}

inline ServiceResponse error_response(int status, const std::string& code, const std::string& field, const std::string& msg) {
  nlohmann::json j{{"v", kFormatVersion}, {"error", code}, {"message", msg}};
  if (!field.empty()) j["field"] = field;
  return json_response(status, j);
}

inline std::string join_field(const std::string& parent, const std::string& key) {
  return parent.empty() ? key : parent + "." + key;
}

inline const nlohmann::json& field(const nlohmann::json& j, const std::string& parent, const char* key) {
  if (!j.is_object() || !j.contains(key))
    throw RequestError(400, "bad_request", join_field(parent, key), "missing field '" + join_field(parent, key) + "'");
  return j.at(key);
}

inline double number(const nlohmann::json& j, const std::string& name) {
  if (!j.is_number()) throw RequestError(400, "bad_request", name, "'" + name + "' must be a number");
  const double v = j.get<double>();
  if (!std::isfinite(v)) throw RequestError(400, "bad_request", name, "'" + name + "' must be finite");
  return v;
}

inline int integer(const nlohmann::json& j, const std::string& name) {
  if (!j.is_number_integer()) throw RequestError(400, "bad_request", name, "'" + name + "' must be an integer");
  return j.get<int>();
}

inline std::vector<double> numbers(const nlohmann::json& j, const std::string& name, std::size_t count) {
  if (!j.is_array() || (count > 0 && j.size() != count))
    throw RequestError(400, "bad_request", name,
                       "'" + name + "' must be an array" + (count ? " of " + std::to_string(count) + " numbers" : ""));
  std::vector<double> out;
  for (std::size_t i = 0; i < j.size(); ++i) out.push_back(number(j[i], name + "[" + std::to_string(i) + "]"));
  return out;
}

inline Vec3<double> vec3(const nlohmann::json& j, const std::string& name) {
  const auto v = numbers(j, name, 3);
  return {v[0], v[1], v[2]};
}

}  // namespace detail

/// Camera from the request schema:
///   {"orbit": {"azimuth_deg", "elevation_deg", "radius", "target": [3]}, "focal"?}
///   {"K": [9], "R": [9], "t": [3]}   (row-major)
/// `width` and `height` come from the enclosing request and are checked
/// against the model's maximum (422 when exceeded).
inline Camera<double> parse_camera(const nlohmann::json& request, int max_resolution, const std::string& parent = "") {
  using namespace detail;
  const int width = request.contains("width") ? integer(request.at("width"), join_field(parent, "width")) : 256;
  const int height = request.contains("height") ? integer(request.at("height"), join_field(parent, "height")) : width;
  if (width <= 0 || height <= 0)
    throw RequestError(400, "bad_request", join_field(parent, width <= 0 ? "width" : "height"), "resolution must be positive");
  if (width > max_resolution || height > max_resolution)
    throw RequestError(422, "resolution_too_large", join_field(parent, width > max_resolution ? "width" : "height"),
                       "resolution " + std::to_string(width) + "x" + std::to_string(height) + " exceeds the maximum of " +
                           std::to_string(max_resolution) + " per side");
  const std::string cf = join_field(parent, "camera");
  const nlohmann::json& cam = field(request, parent, "camera");
  if (!cam.is_object()) throw RequestError(400, "bad_request", cf, "'camera' must be an object");
  if (cam.contains("orbit")) {
    const std::string of = join_field(cf, "orbit");
    const auto& o = cam.at("orbit");
    const double az = number(field(o, of, "azimuth_deg"), join_field(of, "azimuth_deg"));
    const double el = number(field(o, of, "elevation_deg"), join_field(of, "elevation_deg"));
    const double radius = number(field(o, of, "radius"), join_field(of, "radius"));
    if (!(radius > 0.0)) throw RequestError(400, "bad_request", join_field(of, "radius"), "radius must be positive");
    const Vec3<double> target = o.contains("target") ? vec3(o.at("target"), join_field(of, "target")) : Vec3<double>::Zero();
    const double focal = cam.contains("focal") ? number(cam.at("focal"), join_field(cf, "focal")) : 1.5 * width;
    if (!(focal > 0.0)) throw RequestError(400, "bad_request", join_field(cf, "focal"), "focal length must be positive");
    if (std::abs(el) >= 90.0)
      throw RequestError(400, "bad_request", join_field(of, "elevation_deg"), "elevation must lie strictly inside (-90, 90)");
    return orbit_camera<double>(az, el, radius, target, width, height, focal);
  }
  if (cam.contains("K") || cam.contains("R") || cam.contains("t")) {
    const auto K = numbers(field(cam, cf, "K"), join_field(cf, "K"), 9);
    const auto R = numbers(field(cam, cf, "R"), join_field(cf, "R"), 9);
    const auto t = numbers(field(cam, cf, "t"), join_field(cf, "t"), 3);
    Camera<double> c;
    for (int r = 0; r < 3; ++r)
      for (int k = 0; k < 3; ++k) {
        c.K(r, k) = K[3 * r + k];
        c.R(r, k) = R[3 * r + k];
      }
    c.t = Vec3<double>(t[0], t[1], t[2]);
    c.width = width;
    c.height = height;
    try {
      validate(c);
    } catch (const Error& e) {
      throw RequestError(400, "bad_request", cf, e.what());
    }
    return c;
  }
  throw RequestError(400, "bad_request", cf, "camera needs either 'orbit' or 'K', 'R' and 't'");
}

inline RegionSelector parse_selector(const nlohmann::json& j, const std::string& name) {
  using namespace detail;
  if (!j.is_object()) throw RequestError(400, "bad_request", name, "selector must be an object");
  const auto& kind = field(j, name, "kind");
  const std::string k = kind.is_string() ? kind.get<std::string>() : "";
  if (k == "all") return {};
  if (k == "sphere") {
    const double r = number(field(j, name, "radius"), join_field(name, "radius"));
    if (!(r >= 0.0)) throw RequestError(400, "bad_request", join_field(name, "radius"), "radius must be non-negative");
    return RegionSelector::sphere(vec3(field(j, name, "center"), join_field(name, "center")), r);
  }
  if (k == "half_space") {
    const Vec3<double> n = vec3(field(j, name, "normal"), join_field(name, "normal"));
    return RegionSelector::half_space(n, j.contains("offset") ? number(j.at("offset"), join_field(name, "offset")) : 0.0);
  }
  throw RequestError(400, "bad_request", join_field(name, "kind"), "selector kind must be all, sphere or half_space");
}

inline std::vector<FeatureEdit> parse_edits(const nlohmann::json& request, const ServiceModel& model) {
  using namespace detail;
  std::vector<FeatureEdit> edits;
  if (!request.contains("edits")) return edits;
  const auto& list = request.at("edits");
  if (!list.is_array()) throw RequestError(400, "bad_request", "edits", "'edits' must be an array");
  for (std::size_t i = 0; i < list.size(); ++i) {
    const std::string name = "edits[" + std::to_string(i) + "]";
    const auto& e = list[i];
    if (!e.is_object()) throw RequestError(400, "bad_request", name, "edit must be an object");
    FeatureEdit edit;
    edit.selector = e.contains("selector") ? parse_selector(e.at("selector"), join_field(name, "selector")) : RegionSelector{};
    if (e.contains("preset")) {
      const auto& p = e.at("preset");
      const auto it = p.is_string() ? model.presets.find(p.get<std::string>()) : model.presets.end();
      if (it == model.presets.end())
        throw RequestError(400, "bad_request", join_field(name, "preset"), "unknown feature preset " + p.dump());
      edit.replacement = it->second;
    } else {
      const auto v = numbers(field(e, name, "replacement"), join_field(name, "replacement"), 0);
      if (static_cast<int>(v.size()) != model.shader.feature_dim())
        throw RequestError(400, "bad_request", join_field(name, "replacement"),
                           "replacement has " + std::to_string(v.size()) + " entries, expected " +
                               std::to_string(model.shader.feature_dim()));
      edit.replacement.resize(static_cast<Eigen::Index>(v.size()));
      for (std::size_t k = 0; k < v.size(); ++k) edit.replacement[static_cast<Eigen::Index>(k)] = static_cast<float>(v[k]);
    }
    edit.blend = e.contains("blend") ? number(e.at("blend"), join_field(name, "blend")) : 1.0;
    if (!(edit.blend >= 0.0 && edit.blend <= 1.0))
      throw RequestError(400, "bad_request", join_field(name, "blend"), "blend must lie in [0, 1]");
    edits.push_back(std::move(edit));
  }
  return edits;
}

namespace detail {

inline nlohmann::json parse_body(const std::string& body) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(body);
  } catch (const nlohmann::json::exception& e) {
    throw RequestError(400, "bad_request", "", std::string("request body is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw RequestError(400, "bad_request", "", "request body must be a JSON object");
  if (j.contains("v") && j.at("v") != kFormatVersion)
    throw RequestError(400, "bad_request", "v", "unsupported request version " + j.at("v").dump());
  return j;
}

template <class F>
ServiceResponse guarded(F&& f) {
  try {
    return f();
  } catch (const RequestError& e) {
    return error_response(e.status(), e.code(), e.field(), e.what());
  } catch (const Error& e) {
    return error_response(500, to_string(e.code()), "", e.what());
  }
}

}  // namespace detail

inline ServiceResponse handle_meta(const ServiceModel& model) {
  nlohmann::json j;
  j["v"] = kFormatVersion;
  j["mesh"] = {{"vertices", model.mesh.vertices.size()},
               {"faces", model.mesh.faces.size()},
               {"bbox_min", {model.bbox_min.x(), model.bbox_min.y(), model.bbox_min.z()}},
               {"bbox_max", {model.bbox_max.x(), model.bbox_max.y(), model.bbox_max.z()}}};
  j["shader"] = {{"architecture", to_json(model.shader.arch)},
                 {"encoding", to_json(model.shader.encoding)},
                 {"feature_dim", model.shader.feature_dim()},
                 {"parameter_count", model.shader.theta.size()}};
  j["bounds"] = {{"min", {-1.0, -1.0, -1.0}}, {"max", {1.0, 1.0, 1.0}}};
  const double extent = (model.bbox_max - model.bbox_min).norm();
  j["orbit"] = {{"min_radius", 0.5 * extent}, {"max_radius", 4.0 * std::max(extent, 1.0)}, {"default_radius", 2.5}};
  j["max_resolution"] = model.max_resolution;
  nlohmann::json presets = nlohmann::json::array();
  for (const auto& [name, feature] : model.presets)
    presets.push_back({{"name", name}, {"feature", std::vector<float>(feature.data(), feature.data() + feature.size())}});
  j["feature_presets"] = presets;
  return detail::json_response(200, j);
}

/// PNG for a RenderRequest body.
inline ServiceResponse handle_render(const ServiceModel& model, const std::string& body) {
  return detail::guarded([&] {
    const nlohmann::json req = detail::parse_body(body);
    if (req.contains("format") && req.at("format") != "png")
      throw RequestError(400, "bad_request", "format", "only \"png\" output is supported");
    const Camera<double> cam = parse_camera(req, model.max_resolution);
    const auto edits = parse_edits(req, model);
    const RenderOutput out = render_with_feature_edits(model.mesh, model.shader, cam.cast<float>(), edits);
    return ServiceResponse{200, "image/png", encode_png(out.color)};
  });
}

/// Positional feature under a pixel; 404 "no_surface" on background.
inline ServiceResponse handle_pick_feature(const ServiceModel& model, const std::string& body) {
  return detail::guarded([&] {
    const nlohmann::json req = detail::parse_body(body);
    const Camera<double> cam = parse_camera(req, model.max_resolution);
    const auto px = detail::numbers(detail::field(req, "", "pixel"), "pixel", 2);
    const int x = static_cast<int>(std::floor(px[0])), y = static_cast<int>(std::floor(px[1]));
    if (x < 0 || y < 0 || x >= cam.width || y >= cam.height)
      throw RequestError(400, "bad_request", "pixel", "pixel lies outside the image");
    Vec3<double> position;
    const auto feature = pick_feature(model.mesh, model.shader, cam.cast<float>(), x, y, &position);
    if (!feature)
      return detail::error_response(404, "no_surface", "pixel",
                                    "no surface at pixel (" + std::to_string(x) + ", " + std::to_string(y) + ")");
    nlohmann::json j{{"v", kFormatVersion},
                     {"pixel", {x, y}},
                     {"position", {position.x(), position.y(), position.z()}},
                     {"feature", std::vector<float>(feature->data(), feature->data() + feature->size())}};
    return detail::json_response(200, j);
  });
}

}  // namespace mvr
