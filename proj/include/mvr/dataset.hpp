#pragma once

#include "mvr/camera.hpp"
#include "mvr/image.hpp"

#include <json.hpp>

#include <cstdio>
#include <regex>
#include <set>

namespace mvr {

/// One calibrated input view: RGB image and binary object mask.
template <class T>
struct View {
  int id = 0;
  Camera<T> camera;
  Image image;  // 3 channels
  Image mask;   // 1 channel, exactly 0 or 1

  template <class U>
  View<U> cast() const {
    return View<U>{id, camera.template cast<U>(), image, mask};
  }
};

/// Uniform scale + translation taking the user bounding box into the cube
/// [-1, 1]^3: x_canonical = (x - center) * scale. The box's largest extent
/// maps to side length 2, so cubic boxes land exactly on the cube corners.
struct SceneNormalization {
  double scale = 1.0;
  Vec3<double> center = Vec3<double>::Zero();

  static SceneNormalization from_bbox(const Vec3<double>& lo, const Vec3<double>& hi) {
    if (!((hi - lo).minCoeff() > 0)) throw Error(ErrorCode::dataset, "bounding box must satisfy min < max on every axis");
    return {2.0 / (hi - lo).maxCoeff(), 0.5 * (lo + hi)};
  }

  Vec3<double> apply(const Vec3<double>& x) const { return (x - center) * scale; }
  Vec3<double> invert(const Vec3<double>& y) const { return y / scale + center; }

  /// The same physical camera expressed in canonical coordinates.
  template <class T>
  Camera<T> apply(const Camera<T>& cam) const {
    Camera<T> out = cam;
    out.t = (static_cast<T>(scale) * (cam.R * center.template cast<T>() + cam.t));
    return out;
  }
};

struct Dataset {
  std::vector<View<double>> views;
  SceneNormalization normalization;
  Vec3<double> bbox_min = Vec3<double>::Constant(-1.0);  // user coordinates
  Vec3<double> bbox_max = Vec3<double>::Constant(1.0);
};

inline std::string view_file_name(const char* prefix, int id) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%s_%04d.png", prefix, id);
  return buf;
}

inline Image binarize_mask(const Image& raw) {
  Image mask(raw.width, raw.height, 1);
  for (std::size_t i = 0; i < mask.pixel_count(); ++i) mask.data[i] = raw.data[i * raw.channels] > 0.5f ? 1.0f : 0.0f;
  return mask;
}

namespace detail {
inline std::vector<double> json_numbers(const nlohmann::json& j, const char* key, std::size_t count, int view_id) {
  if (!j.contains(key) || !j[key].is_array() || j[key].size() != count)
    throw Error(ErrorCode::dataset, "view " + std::to_string(view_id) + ": '" + key + "' must be an array of " +
                                        std::to_string(count) + " numbers");
  return j[key].get<std::vector<double>>();
}

inline std::set<int> scan_ids(const std::filesystem::path& dir, const std::string& prefix) {
  std::set<int> ids;
  const std::regex pattern(prefix + "_(\\d+)\\.png");
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    std::smatch m;
    const std::string name = entry.path().filename().string();
    if (std::regex_match(name, m, pattern)) ids.insert(std::stoi(m[1].str()));
  }
  return ids;
}
}  // namespace detail

/// Reads `cameras.json`, `bbox.json`, `image_####.png` and `mask_####.png`
/// from `dir`, and returns views with cameras already in canonical coordinates.
inline Dataset load_dataset(const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  using nlohmann::json;
  if (!fs::is_directory(dir)) throw Error(ErrorCode::io, "dataset directory not found: " + dir.string());
  Dataset ds;

  json bbox;
  try {
    bbox = json::parse(read_file(dir / "bbox.json"));
    ds.bbox_min = Vec3<double>(bbox.at("min").get<std::vector<double>>().data());
    ds.bbox_max = Vec3<double>(bbox.at("max").get<std::vector<double>>().data());
    if (bbox.at("min").size() != 3 || bbox.at("max").size() != 3) throw Error(ErrorCode::dataset, "bbox corners need 3 values");
  } catch (const json::exception& e) {
    throw Error(ErrorCode::dataset, "malformed bbox.json: " + std::string(e.what()));
  }
  ds.normalization = SceneNormalization::from_bbox(ds.bbox_min, ds.bbox_max);

  json cams;
  try {
    cams = json::parse(read_file(dir / "cameras.json"));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::dataset, "malformed cameras.json: " + std::string(e.what()));
  }
  if (!cams.contains("views") || !cams["views"].is_array())
    throw Error(ErrorCode::dataset, "cameras.json must contain a 'views' array");

  std::set<int> camera_ids;
  for (const auto& v : cams["views"]) camera_ids.insert(v.at("id").get<int>());
  const auto image_ids = detail::scan_ids(dir, "image");
  const auto mask_ids = detail::scan_ids(dir, "mask");
  std::string problems;
  auto report = [&](const std::set<int>& have, const char* what) {
    std::vector<int> missing;
    for (int id : camera_ids)
      if (!have.count(id)) missing.push_back(id);
    if (missing.empty()) return;
    problems += std::string(problems.empty() ? "" : "; ") + "missing " + what + " for view ids";
    for (int id : missing) problems += " " + std::to_string(id);
  };
  report(image_ids, "image");
  report(mask_ids, "mask");
  for (int id : image_ids)
    if (!camera_ids.count(id)) problems += (problems.empty() ? "" : "; ") + std::string("no camera for image id ") + std::to_string(id);
  for (int id : mask_ids)
    if (!camera_ids.count(id)) problems += (problems.empty() ? "" : "; ") + std::string("no camera for mask id ") + std::to_string(id);
  if (!problems.empty()) throw Error(ErrorCode::dataset, "dataset " + dir.string() + ": " + problems);

  for (const auto& v : cams["views"]) {
    View<double> view;
    view.id = v.at("id").get<int>();
    const auto K = detail::json_numbers(v, "K", 9, view.id);
    const auto R = detail::json_numbers(v, "R", 9, view.id);
    const auto t = detail::json_numbers(v, "t", 3, view.id);
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) {
        view.camera.K(r, c) = K[3 * r + c];
        view.camera.R(r, c) = R[3 * r + c];
      }
    view.camera.t = Vec3<double>(t[0], t[1], t[2]);
    view.camera.width = v.at("width").get<int>();
    view.camera.height = v.at("height").get<int>();
    try {
      validate(view.camera);
    } catch (const Error& e) {
      throw Error(ErrorCode::dataset, "view " + std::to_string(view.id) + ": " + e.what());
    }
    view.camera = ds.normalization.apply(view.camera);

    const Image img = read_png(dir / view_file_name("image", view.id));
    const Image raw_mask = read_png(dir / view_file_name("mask", view.id));
    if (img.width != view.camera.width || img.height != view.camera.height || raw_mask.width != view.camera.width ||
        raw_mask.height != view.camera.height)
      throw Error(ErrorCode::dataset, "view " + std::to_string(view.id) + ": image/mask size does not match the camera resolution");
    view.image = Image(img.width, img.height, 3);
    for (std::size_t p = 0; p < img.pixel_count(); ++p)
      for (int c = 0; c < 3; ++c) view.image.data[p * 3 + c] = img.data[p * img.channels + std::min(c, img.channels - 1)];
    view.mask = binarize_mask(raw_mask);
    ds.views.push_back(std::move(view));
  }
  std::sort(ds.views.begin(), ds.views.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
  return ds;
}

/// Writes views in the layout read by load_dataset. Cameras are written as
/// given (user coordinates).
template <class T>
void save_dataset(const std::filesystem::path& dir, const std::vector<View<T>>& views, const Vec3<double>& bbox_min,
                  const Vec3<double>& bbox_max) {
  using nlohmann::json;
  std::filesystem::create_directories(dir);
  json cams = {{"v", 1}, {"views", json::array()}};
  for (const auto& v : views) {
    std::vector<double> K, R;
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) {
        K.push_back(static_cast<double>(v.camera.K(r, c)));
        R.push_back(static_cast<double>(v.camera.R(r, c)));
      }
    cams["views"].push_back({{"id", v.id},
                             {"K", K},
                             {"R", R},
                             {"t", {static_cast<double>(v.camera.t.x()), static_cast<double>(v.camera.t.y()),
                                    static_cast<double>(v.camera.t.z())}},
                             {"width", v.camera.width},
                             {"height", v.camera.height}});
    write_png(dir / view_file_name("image", v.id), v.image);
    write_png(dir / view_file_name("mask", v.id), v.mask);
  }
  write_file_atomic(dir / "cameras.json", cams.dump(2));
  const json bbox = {{"v", 1},
                     {"min", {bbox_min.x(), bbox_min.y(), bbox_min.z()}},
                     {"max", {bbox_max.x(), bbox_max.y(), bbox_max.z()}}};
  write_file_atomic(dir / "bbox.json", bbox.dump(2));
}

}  // namespace mvr
