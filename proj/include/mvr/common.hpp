#pragma once

#include <Eigen/Core>

#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <iostream>
#include <mutex>
#include <stdexcept>
#include <string>
#include <utility>

namespace mvr {

template <class T>
using Vec2 = Eigen::Matrix<T, 2, 1>;
template <class T>
using Vec3 = Eigen::Matrix<T, 3, 1>;
template <class T>
using Mat3 = Eigen::Matrix<T, 3, 3>;
template <class T>
using MatX = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;
template <class T>
using VecX = Eigen::Matrix<T, Eigen::Dynamic, 1>;

using Face = std::array<int, 3>;
using Edge = std::array<int, 2>;  // always stored with [0] < [1]

enum class ErrorCode {
  invalid_argument,
  non_manifold,
  parse,
  io,
  dataset,
  empty_mesh,
  empty_occupancy,
  cache_mismatch,
  non_finite,
  tangled_mesh,
};

inline const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::invalid_argument: return "invalid_argument";
    case ErrorCode::non_manifold: return "non_manifold";
    case ErrorCode::parse: return "parse";
    case ErrorCode::io: return "io";
    case ErrorCode::dataset: return "dataset";
    case ErrorCode::empty_mesh: return "empty_mesh";
    case ErrorCode::empty_occupancy: return "empty_occupancy";
    case ErrorCode::cache_mismatch: return "cache_mismatch";
    case ErrorCode::non_finite: return "non_finite";
    case ErrorCode::tangled_mesh: return "tangled_mesh";
  }
  return "unknown";
}

/// Every failure raised by the library carries a machine-readable code so the
/// CLI and the render service can map it onto exit codes / HTTP statuses.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

namespace log {

using Sink = std::function<void(const std::string&)>;

namespace detail {
inline std::mutex& mutex() {
  static std::mutex m;
  return m;
}
inline Sink& sink() {
  static Sink s = [](const std::string& msg) { std::cerr << "[mvr] warning: " << msg << '\n'; };
  return s;
}
}  // namespace detail

/// Replaces the warning sink; returns the previous one so callers can restore it.
inline Sink set_sink(Sink sink) {
  std::lock_guard<std::mutex> lock(detail::mutex());
  return std::exchange(detail::sink(), std::move(sink));
}

inline void warn(const std::string& message) {
  std::lock_guard<std::mutex> lock(detail::mutex());
  if (detail::sink()) detail::sink()(message);
}

}  // namespace log

inline Edge make_edge(int a, int b) { return a < b ? Edge{a, b} : Edge{b, a}; }

inline std::uint64_t edge_key(int a, int b) {
  const auto e = make_edge(a, b);
  return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(e[0])) << 32) |
         static_cast<std::uint32_t>(e[1]);
}

/// FNV-1a, used to fingerprint connectivity.
inline std::uint64_t fnv1a(const void* data, std::size_t bytes, std::uint64_t seed = 1469598103934665603ull) {
  const auto* p = static_cast<const unsigned char*>(data);
  std::uint64_t h = seed;
  for (std::size_t i = 0; i < bytes; ++i) {
    h ^= p[i];
    h *= 1099511628211ull;
  }
  return h;
}

template <class T>
bool all_finite(const Vec3<T>& v) {
  return std::isfinite(v.x()) && std::isfinite(v.y()) && std::isfinite(v.z());
}

}  // namespace mvr
