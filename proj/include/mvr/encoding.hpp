#pragma once

#include "mvr/common.hpp"

#include <random>

namespace mvr {

enum class EncodingKind { positional, gaussian_fourier, none };

inline const char* to_string(EncodingKind k) {
  switch (k) {
    case EncodingKind::positional: return "positional";
    case EncodingKind::gaussian_fourier: return "gaussian_fourier";
    case EncodingKind::none: return "none";
  }
  return "none";
}

inline EncodingKind parse_encoding_kind(const std::string& s) {
  if (s == "positional" || s == "pe") return EncodingKind::positional;
  if (s == "gaussian_fourier" || s == "gff") return EncodingKind::gaussian_fourier;
  if (s == "none") return EncodingKind::none;
  throw Error(ErrorCode::invalid_argument, "unknown encoding '" + s + "' (expected positional, gaussian_fourier or none)");
}

/// Lift of a 3D point to sinusoidal features.
///
/// positional:       [x, sin(2^j pi x), cos(2^j pi x)] for j < octaves, per component
/// gaussian_fourier: [x, sin(2 pi B x), cos(2 pi B x)] with B ~ N(0, scale^2)
/// none:             x
/// The raw x block is present only with `passthrough` (always for none).
struct EncodingConfig {
  EncodingKind kind = EncodingKind::positional;
  int octaves = 4;
  bool passthrough = true;
  double gff_scale = 1.0;
  int gff_features = 64;
  std::uint64_t gff_seed = 0;
  MatX<double> gff_matrix;  // gff_features x 3, filled by finalize()

  void validate() const {
    if (octaves < 0) throw Error(ErrorCode::invalid_argument, "octave count must be >= 0");
    if (kind == EncodingKind::gaussian_fourier) {
      if (gff_features <= 0) throw Error(ErrorCode::invalid_argument, "Gaussian Fourier feature count must be positive");
      if (!(gff_scale > 0.0)) throw Error(ErrorCode::invalid_argument, "Gaussian Fourier scale must be positive");
      if (gff_matrix.rows() != gff_features || gff_matrix.cols() != 3)
        throw Error(ErrorCode::invalid_argument, "Gaussian Fourier matrix has the wrong shape; call finalize()");
    }
  }

  /// Draws the Gaussian Fourier matrix from gff_seed (no-op otherwise).
  void finalize() {
    if (kind != EncodingKind::gaussian_fourier) return;
    std::mt19937_64 rng(gff_seed);
    std::normal_distribution<double> gauss(0.0, gff_scale);
    gff_matrix.resize(gff_features, 3);
    for (int r = 0; r < gff_features; ++r)
      for (int c = 0; c < 3; ++c) gff_matrix(r, c) = gauss(rng);
  }

  int dimension() const {
    switch (kind) {
      case EncodingKind::positional: return (passthrough ? 3 : 0) + 6 * octaves;
      case EncodingKind::gaussian_fourier: return (passthrough ? 3 : 0) + 2 * gff_features;
      case EncodingKind::none: return 3;
    }
    return 3;
  }
};

inline constexpr double kPi = 3.14159265358979323846;

/// Encodes the columns of X (3 x N) into an encoding.dimension() x N matrix.
template <class T>
MatX<T> encode(const MatX<T>& X, const EncodingConfig& cfg) {
  const Eigen::Index n = X.cols();
  MatX<T> out(cfg.dimension(), n);
  if (cfg.kind == EncodingKind::none) {
    out = X;
    return out;
  }
  int row = 0;
  if (cfg.passthrough) {
    out.topRows(3) = X;
    row = 3;
  }
  if (cfg.kind == EncodingKind::positional) {
    for (int j = 0; j < cfg.octaves; ++j) {
      const T freq = static_cast<T>(std::ldexp(kPi, j));
      const MatX<T> arg = freq * X;
      out.middleRows(row, 3) = arg.array().sin().matrix();
      out.middleRows(row + 3, 3) = arg.array().cos().matrix();
      row += 6;
    }
  } else {
    const MatX<T> arg = (T(2 * kPi) * cfg.gff_matrix.cast<T>()) * X;
    out.middleRows(row, cfg.gff_features) = arg.array().sin().matrix();
    out.middleRows(row + cfg.gff_features, cfg.gff_features) = arg.array().cos().matrix();
  }
  return out;
}

template <class T>
VecX<T> encode(const Vec3<T>& x, const EncodingConfig& cfg) {
  MatX<T> X(3, 1);
  X.col(0) = x;
  return encode<T>(X, cfg).col(0);
}

/// Pulls the gradient w.r.t. the encoding (dimension x N) back to x (3 x N),
/// reusing the forward output `E`.
template <class T>
MatX<T> encode_backward(const MatX<T>& X, const MatX<T>& E, const MatX<T>& grad_E, const EncodingConfig& cfg) {
  if (cfg.kind == EncodingKind::none) return grad_E;
  MatX<T> grad_X = MatX<T>::Zero(3, X.cols());
  int row = 0;
  if (cfg.passthrough) {
    grad_X = grad_E.topRows(3);
    row = 3;
  }
  if (cfg.kind == EncodingKind::positional) {
    for (int j = 0; j < cfg.octaves; ++j) {
      const T freq = static_cast<T>(std::ldexp(kPi, j));
      // d sin(f x) = f cos(f x), d cos(f x) = -f sin(f x)
      grad_X.array() += freq * (E.middleRows(row + 3, 3).array() * grad_E.middleRows(row, 3).array() -
                                E.middleRows(row, 3).array() * grad_E.middleRows(row + 3, 3).array());
      row += 6;
    }
  } else {
    const int m = cfg.gff_features;
    const MatX<T> g_arg = (E.middleRows(row + m, m).array() * grad_E.middleRows(row, m).array() -
                           E.middleRows(row, m).array() * grad_E.middleRows(row + m, m).array())
                              .matrix();
    grad_X += (T(2 * kPi) * cfg.gff_matrix.cast<T>()).transpose() * g_arg;
  }
  return grad_X;
}

}  // namespace mvr
