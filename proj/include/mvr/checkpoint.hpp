#pragma once

#include "mvr/io_util.hpp"
#include "mvr/shader.hpp"

#include <json.hpp>

namespace mvr {

inline constexpr int kFormatVersion = 1;

namespace detail {

/// Rejects keys that the reader does not know, naming the offending one.
inline void require_known_keys(const nlohmann::json& j, std::initializer_list<const char*> known, const std::string& where) {
  if (!j.is_object()) throw Error(ErrorCode::parse, where + " must be a JSON object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (const char* k : known) ok = ok || it.key() == k;
    if (!ok) throw Error(ErrorCode::parse, "unknown key '" + it.key() + "' in " + where);
  }
}

template <class V>
void read_if(const nlohmann::json& j, const char* key, V& out, const std::string& where) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<V>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::parse, where + "." + key + ": " + e.what());
  }
}

inline void check_version(const nlohmann::json& j, const std::string& what) {
  if (!j.is_object() || !j.contains("v")) throw Error(ErrorCode::parse, what + " has no version field \"v\"");
  if (j.at("v") != kFormatVersion)
    throw Error(ErrorCode::parse, what + " has version " + j.at("v").dump() + ", expected " + std::to_string(kFormatVersion));
}

}  // namespace detail

inline nlohmann::json to_json(const ShaderArchitecture& a) {
  return {{"h_layers", a.h_layers},   {"h_width", a.h_width},         {"c_layers", a.c_layers},
          {"c_width", a.c_width},     {"activation", to_string(a.activation)}, {"siren_omega", a.siren_omega},
          {"zero_final", a.zero_final}};
}

inline ShaderArchitecture architecture_from_json(const nlohmann::json& j) {
  const std::string where = "shader";
  detail::require_known_keys(j, {"h_layers", "h_width", "c_layers", "c_width", "activation", "siren_omega", "zero_final"}, where);
  ShaderArchitecture a;
  detail::read_if(j, "h_layers", a.h_layers, where);
  detail::read_if(j, "h_width", a.h_width, where);
  detail::read_if(j, "c_layers", a.c_layers, where);
  detail::read_if(j, "c_width", a.c_width, where);
  std::string act = to_string(a.activation);
  detail::read_if(j, "activation", act, where);
  a.activation = parse_activation(act);
  detail::read_if(j, "siren_omega", a.siren_omega, where);
  detail::read_if(j, "zero_final", a.zero_final, where);
  a.validate();
  return a;
}

/// The Gaussian Fourier matrix is derived from the seed and not stored here.
inline nlohmann::json to_json(const EncodingConfig& e) {
  return {{"kind", to_string(e.kind)},  {"octaves", e.octaves},           {"passthrough", e.passthrough},
          {"gff_scale", e.gff_scale}, {"gff_features", e.gff_features}, {"gff_seed", e.gff_seed}};
}

inline EncodingConfig encoding_from_json(const nlohmann::json& j) {
  const std::string where = "encoding";
  detail::require_known_keys(j, {"kind", "octaves", "passthrough", "gff_scale", "gff_features", "gff_seed"}, where);
  EncodingConfig e;
  std::string kind = to_string(e.kind);
  detail::read_if(j, "kind", kind, where);
  e.kind = parse_encoding_kind(kind);
  detail::read_if(j, "octaves", e.octaves, where);
  detail::read_if(j, "passthrough", e.passthrough, where);
  detail::read_if(j, "gff_scale", e.gff_scale, where);
  detail::read_if(j, "gff_features", e.gff_features, where);
  detail::read_if(j, "gff_seed", e.gff_seed, where);
  if (e.octaves < 0) throw Error(ErrorCode::parse, "encoding.octaves must be >= 0");
  return e;
}

/// Self-describing shader file: architecture, encoding, seed and the flat
/// weight vector in layer order.
template <class T>
std::string format_checkpoint(const ShaderParams<T>& p) {
  nlohmann::json j;
  j["v"] = kFormatVersion;
  j["kind"] = "shader";
  j["architecture"] = to_json(p.arch);
  j["encoding"] = to_json(p.encoding);
  j["seed"] = p.seed;
  j["parameter_count"] = p.theta.size();
  std::vector<double> w(p.theta.data(), p.theta.data() + p.theta.size());
  j["theta"] = w;
  return j.dump();
}

inline ShaderParams<float> parse_checkpoint(const std::string& text, const std::string& source = "<checkpoint>") {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::parse, source + ": " + e.what());
  }
  detail::check_version(j, source);
  if (j.value("kind", std::string()) != "shader") throw Error(ErrorCode::parse, source + " is not a shader checkpoint");
  for (const char* key : {"architecture", "encoding", "seed", "theta"})
    if (!j.contains(key)) throw Error(ErrorCode::parse, source + " is missing \"" + key + "\"");
  ShaderArchitecture arch = architecture_from_json(j.at("architecture"));
  EncodingConfig enc = encoding_from_json(j.at("encoding"));
  enc.finalize();
  enc.validate();
  ShaderParams<float> p;
  p.arch = arch;
  p.encoding = enc;
  p.seed = j.at("seed").get<std::uint64_t>();
  p.layout = shader_layout(arch, enc.dimension());
  const auto& theta = j.at("theta");
  if (!theta.is_array() || theta.size() != p.layout.size)
    throw Error(ErrorCode::parse, source + ": expected " + std::to_string(p.layout.size) + " weights, found " +
                                      std::to_string(theta.is_array() ? theta.size() : 0));
  p.theta.resize(static_cast<Eigen::Index>(p.layout.size));
  for (std::size_t i = 0; i < p.layout.size; ++i) {
    if (!theta[i].is_number()) throw Error(ErrorCode::parse, source + ": weight " + std::to_string(i) + " is not a number");
    p.theta[static_cast<Eigen::Index>(i)] = static_cast<float>(theta[i].get<double>());
  }
  if (!p.theta.allFinite()) throw Error(ErrorCode::parse, source + " contains non-finite weights");
  return p;
}

template <class T>
void save_checkpoint(const ShaderParams<T>& p, const std::filesystem::path& path) {
  write_file_atomic(path, format_checkpoint(p));
}

inline ShaderParams<float> load_checkpoint(const std::filesystem::path& path) {
  return parse_checkpoint(read_file(path), path.string());
}

}  // namespace mvr
