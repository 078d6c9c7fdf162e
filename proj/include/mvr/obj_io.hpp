#pragma once

#include "mvr/io_util.hpp"
#include "mvr/mesh.hpp"

#include <charconv>
#include <iomanip>

namespace mvr {

struct ObjReadOptions {
  /// Polygons with more than three corners are fan-triangulated; when false
  /// they are rejected.
  bool triangulate_polygons = true;
};

/// Parses the v / f records of a Wavefront OBJ. Texture and normal indices
/// ("f 1/2/3 ...") are ignored, negative (relative) indices are resolved, and
/// every other record type is skipped.
inline Mesh<double> parse_obj(std::istream& in, const ObjReadOptions& options = {}, const std::string& source = "<obj>") {
  Mesh<double> mesh;
  std::string line;
  int line_no = 0;
  auto fail = [&](const std::string& msg) {
    throw Error(ErrorCode::parse, source + ":" + std::to_string(line_no) + ": " + msg);
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::istringstream ls(line);
    std::string tag;
    if (!(ls >> tag) || tag[0] == '#') continue;
    if (tag == "v") {
      double x, y, z;
      if (!(ls >> x >> y >> z)) fail("malformed vertex record");
      mesh.vertices.emplace_back(x, y, z);
    } else if (tag == "f") {
      std::vector<int> idx;
      std::string tok;
      while (ls >> tok) {
        const std::string head = tok.substr(0, tok.find('/'));
        int value = 0;
        const auto [ptr, ec] = std::from_chars(head.data(), head.data() + head.size(), value);
        if (ec != std::errc() || ptr != head.data() + head.size() || value == 0) fail("malformed face index '" + tok + "'");
        const int n = static_cast<int>(mesh.vertices.size());
        const int resolved = value > 0 ? value - 1 : n + value;
        if (resolved < 0 || resolved >= n) fail("face index " + std::to_string(value) + " out of range");
        idx.push_back(resolved);
      }
      if (idx.size() < 3) fail("face with fewer than three vertices");
      if (idx.size() > 3 && !options.triangulate_polygons) fail("polygon with " + std::to_string(idx.size()) + " vertices");
      for (std::size_t k = 1; k + 1 < idx.size(); ++k) mesh.faces.push_back({idx[0], idx[k], idx[k + 1]});
    }
  }
  return mesh;
}

inline Mesh<double> load_mesh(const std::filesystem::path& path, const ObjReadOptions& options = {}) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::io, "cannot open mesh " + path.string());
  return parse_obj(in, options, path.string());
}

template <class T>
std::string format_obj(const Mesh<T>& mesh) {
  std::ostringstream out;
  out << std::setprecision(10);
  for (const auto& v : mesh.vertices)
    out << "v " << static_cast<double>(v.x()) << ' ' << static_cast<double>(v.y()) << ' ' << static_cast<double>(v.z()) << '\n';
  for (const auto& f : mesh.faces) out << "f " << f[0] + 1 << ' ' << f[1] + 1 << ' ' << f[2] + 1 << '\n';
  return out.str();
}

template <class T>
void save_mesh(const Mesh<T>& mesh, const std::filesystem::path& path) {
  write_file_atomic(path, format_obj(mesh));
}

/// Points for evaluation: OBJ vertices, ASCII PLY vertex elements, or
/// whitespace-separated "x y z" lines (.xyz / .txt).
inline std::vector<Vec3<double>> load_points(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::io, "cannot open point file " + path.string());
  const std::string ext = path.extension().string();
  std::vector<Vec3<double>> out;
  if (ext == ".obj") {
    for (const auto& v : parse_obj(in, {}, path.string()).vertices) out.push_back(v);
    return out;
  }
  std::string line;
  std::size_t count = 0;
  bool ply = ext == ".ply";
  if (ply) {
    std::getline(in, line);
    if (line.rfind("ply", 0) != 0) throw Error(ErrorCode::parse, path.string() + ": missing ply magic");
    bool in_vertex = false, saw_format = false;
    int property = 0, px = -1, py = -1, pz = -1;
    while (std::getline(in, line)) {
      if (!line.empty() && line.back() == '\r') line.pop_back();
      std::istringstream ls(line);
      std::string tag;
      ls >> tag;
      if (tag == "format") {
        std::string fmt;
        ls >> fmt;
        if (fmt != "ascii") throw Error(ErrorCode::parse, path.string() + ": only ASCII PLY is supported");
        saw_format = true;
      } else if (tag == "element") {
        std::string name;
        ls >> name;
        in_vertex = name == "vertex";
        if (in_vertex) ls >> count;
      } else if (tag == "property" && in_vertex) {
        std::string type, name;
        ls >> type >> name;
        if (name == "x") px = property;
        if (name == "y") py = property;
        if (name == "z") pz = property;
        ++property;
      } else if (tag == "end_header") {
        break;
      }
    }
    if (!saw_format || px < 0 || py < 0 || pz < 0)
      throw Error(ErrorCode::parse, path.string() + ": PLY header lacks an ASCII format or x/y/z vertex properties");
    for (std::size_t i = 0; i < count; ++i) {
      if (!std::getline(in, line)) throw Error(ErrorCode::parse, path.string() + ": fewer vertices than declared");
      std::istringstream ls(line);
      std::vector<double> values;
      double v;
      while (ls >> v) values.push_back(v);
      if (static_cast<int>(values.size()) <= std::max({px, py, pz}))
        throw Error(ErrorCode::parse, path.string() + ": short vertex line " + std::to_string(i));
      out.emplace_back(values[px], values[py], values[pz]);
    }
    return out;
  }
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream ls(line);
    double x, y, z;
    if (line.find_first_not_of(" \t\r") == std::string::npos || line[line.find_first_not_of(" \t")] == '#') continue;
    if (!(ls >> x >> y >> z)) throw Error(ErrorCode::parse, path.string() + ":" + std::to_string(line_no) + ": expected x y z");
    out.emplace_back(x, y, z);
  }
  return out;
}

}  // namespace mvr
