#pragma once

#include "mvr/encoding.hpp"

#include <random>
#include <vector>

namespace mvr {

enum class Activation { relu, sine };

inline const char* to_string(Activation a) { return a == Activation::sine ? "sine" : "relu"; }

inline Activation parse_activation(const std::string& s) {
  if (s == "relu") return Activation::relu;
  if (s == "sine" || s == "siren") return Activation::sine;
  throw Error(ErrorCode::invalid_argument, "unknown activation '" + s + "' (expected relu or sine)");
}

/// Shape of f(x, n, w) = c(h(enc(x)), n, w).
///
/// h: h_layers affine layers of width h_width; hidden activations between
///    them, the last one linear. Its output is the positional feature.
/// c: input [feature, n, w], c_layers ReLU layers of width c_width, then an
///    affine map to RGB squashed by the logistic function.
struct ShaderArchitecture {
  int h_layers = 3;
  int h_width = 256;
  int c_layers = 2;
  int c_width = 256;
  Activation activation = Activation::relu;  // hidden activation of h
  double siren_omega = 30.0;
  bool zero_final = true;

  void validate() const {
    if (h_layers < 1) throw Error(ErrorCode::invalid_argument, "positional network needs at least one layer");
    if (c_layers < 0) throw Error(ErrorCode::invalid_argument, "head layer count must be >= 0");
    if (h_width < 1 || (c_layers > 0 && c_width < 1))
      throw Error(ErrorCode::invalid_argument, "layer widths must be positive");
    if (activation == Activation::sine && !(siren_omega > 0.0))
      throw Error(ErrorCode::invalid_argument, "sine frequency must be positive");
  }
};

struct LayerShape {
  int in = 0;
  int out = 0;
  std::size_t weight_offset = 0;  // column-major out x in
  std::size_t bias_offset = 0;
};

struct ShaderLayout {
  std::vector<LayerShape> h;
  std::vector<LayerShape> c;
  std::size_t size = 0;
};

inline ShaderLayout shader_layout(const ShaderArchitecture& arch, int encoding_dim) {
  arch.validate();
  ShaderLayout layout;
  std::size_t offset = 0;
  auto add = [&](std::vector<LayerShape>& list, int in, int out) {
    LayerShape s{in, out, offset, offset + static_cast<std::size_t>(in) * out};
    offset = s.bias_offset + out;
    list.push_back(s);
  };
  int in = encoding_dim;
  for (int l = 0; l < arch.h_layers; ++l) {
    add(layout.h, in, arch.h_width);
    in = arch.h_width;
  }
  in = arch.h_width + 6;
  for (int l = 0; l < arch.c_layers; ++l) {
    add(layout.c, in, arch.c_width);
    in = arch.c_width;
  }
  add(layout.c, in, 3);
  layout.size = offset;
  return layout;
}

/// Shader weights as one flat vector, so the optimizer sees a single group.
template <class T>
struct ShaderParams {
  ShaderArchitecture arch;
  EncodingConfig encoding;
  std::uint64_t seed = 0;
  ShaderLayout layout;
  VecX<T> theta;

  int feature_dim() const { return arch.h_width; }

  template <class U>
  ShaderParams<U> cast() const {
    ShaderParams<U> out;
    out.arch = arch;
    out.encoding = encoding;
    out.seed = seed;
    out.layout = layout;
    out.theta = theta.template cast<U>();
    return out;
  }

  using ConstMatMap = Eigen::Map<const MatX<T>>;
  using ConstVecMap = Eigen::Map<const VecX<T>>;
  ConstMatMap weight(const LayerShape& s) const { return ConstMatMap(theta.data() + s.weight_offset, s.out, s.in); }
  ConstVecMap bias(const LayerShape& s) const { return ConstVecMap(theta.data() + s.bias_offset, s.out); }
};

/// Deterministic initialization: Kaiming-uniform weights and zero biases for
/// ReLU layers, the sine-network scheme for sine layers, and an all-zero
/// final layer when arch.zero_final is set (output 0.5 everywhere).
template <class T>
ShaderParams<T> init_params(const ShaderArchitecture& arch, EncodingConfig encoding, std::uint64_t seed) {
  encoding.finalize();
  encoding.validate();
  ShaderParams<T> p;
  p.arch = arch;
  p.encoding = encoding;
  p.seed = seed;
  p.layout = shader_layout(arch, encoding.dimension());
  p.theta = VecX<T>::Zero(static_cast<Eigen::Index>(p.layout.size));
  std::mt19937_64 rng(seed);
  auto fill = [&](const LayerShape& s, double weight_bound, double bias_bound) {
    std::uniform_real_distribution<double> wd(-weight_bound, weight_bound);
    for (std::size_t i = 0; i < static_cast<std::size_t>(s.in) * s.out; ++i)
      p.theta[static_cast<Eigen::Index>(s.weight_offset + i)] = static_cast<T>(wd(rng));
    if (bias_bound > 0.0) {
      std::uniform_real_distribution<double> bd(-bias_bound, bias_bound);
      for (int i = 0; i < s.out; ++i) p.theta[static_cast<Eigen::Index>(s.bias_offset + i)] = static_cast<T>(bd(rng));
    }
  };
  for (std::size_t l = 0; l < p.layout.h.size(); ++l) {
    const auto& s = p.layout.h[l];
    if (arch.activation == Activation::sine) {
      const double bound = l == 0 ? 1.0 / s.in : std::sqrt(6.0 / s.in) / arch.siren_omega;
      fill(s, bound, 1.0 / std::sqrt(double(s.in)));
    } else {
      fill(s, std::sqrt(6.0 / s.in), 0.0);
    }
  }
  for (std::size_t l = 0; l < p.layout.c.size(); ++l) {
    const auto& s = p.layout.c[l];
    const bool last = l + 1 == p.layout.c.size();
    if (last && arch.zero_final) continue;
    fill(s, last ? std::sqrt(3.0 / s.in) : std::sqrt(6.0 / s.in), 0.0);
  }
  return p;
}

/// Batched shader inputs: one column per pixel.
template <class T>
struct ShadeBatch {
  MatX<T> x;  // 3 x N positions
  MatX<T> n;  // 3 x N unit normals
  MatX<T> v;  // 3 x N unit view directions (surface to camera)

  Eigen::Index size() const { return x.cols(); }
};

/// Intermediate values of a forward pass, consumed by shade_backward.
template <class T>
struct ShadeCache {
  MatX<T> encoded;
  std::vector<MatX<T>> h_pre;  // pre-activations of h
  std::vector<MatX<T>> h_act;  // inputs to each h layer (h_act[0] = encoded), plus the feature
  std::vector<MatX<T>> c_pre;
  std::vector<MatX<T>> c_act;  // inputs to each c layer (c_act[0] = [feature; n; v])
  MatX<T> rgb;
};

template <class T>
struct ShadeGrads {
  VecX<T> theta;
  MatX<T> x;
  MatX<T> n;
  MatX<T> v;
};

namespace detail {

template <class T>
void check_finite_batch(const ShadeBatch<T>& b) {
  if (b.n.cols() != b.x.cols() || b.v.cols() != b.x.cols() || b.x.rows() != 3 || b.n.rows() != 3 || b.v.rows() != 3)
    throw Error(ErrorCode::invalid_argument, "shader batch matrices must all be 3 x N");
  for (Eigen::Index i = 0; i < b.x.cols(); ++i) {
    if (!b.x.col(i).allFinite() || !b.n.col(i).allFinite() || !b.v.col(i).allFinite())
      throw Error(ErrorCode::non_finite, "non-finite shader input at batch index " + std::to_string(i));
  }
}

template <class T>
MatX<T> affine(const ShaderParams<T>& p, const LayerShape& s, const MatX<T>& in) {
  MatX<T> z(s.out, in.cols());
  z.noalias() = p.weight(s) * in;
  z.colwise() += p.bias(s);
  return z;
}

template <class T>
MatX<T> hidden_activation(const ShaderParams<T>& p, const MatX<T>& z) {
  if (p.arch.activation == Activation::sine) return (T(p.arch.siren_omega) * z.array()).sin().matrix();
  return z.cwiseMax(T(0));
}

template <class T>
MatX<T> logistic(const MatX<T>& z) {
  return (T(1) / (T(1) + (-z.array()).exp())).matrix();
}

template <class T>
MatX<T> head_input(const MatX<T>& feature, const MatX<T>& n, const MatX<T>& v) {
  MatX<T> in(feature.rows() + 6, feature.cols());
  in.topRows(feature.rows()) = feature;
  in.middleRows(feature.rows(), 3) = n;
  in.bottomRows(3) = v;
  return in;
}

/// Accumulates dL/dW, dL/db of one affine layer and returns dL/d(input).
template <class T>
MatX<T> affine_backward(const ShaderParams<T>& p, const LayerShape& s, const MatX<T>& in, const MatX<T>& grad_out,
                        VecX<T>& grad_theta, bool need_input) {
  Eigen::Map<MatX<T>> gW(grad_theta.data() + s.weight_offset, s.out, s.in);
  Eigen::Map<VecX<T>> gb(grad_theta.data() + s.bias_offset, s.out);
  gW.noalias() += grad_out * in.transpose();
  gb += grad_out.rowwise().sum();
  if (!need_input) return {};
  MatX<T> g(s.in, grad_out.cols());
  g.noalias() = p.weight(s).transpose() * grad_out;
  return g;
}

}  // namespace detail

/// Positional features h(enc(x)) for points given as columns of X (3 x N).
template <class T>
MatX<T> extract_positional_features(const ShaderParams<T>& p, const MatX<T>& X) {
  MatX<T> a = encode<T>(X, p.encoding);
  for (std::size_t l = 0; l < p.layout.h.size(); ++l) {
    MatX<T> z = detail::affine(p, p.layout.h[l], a);
    a = l + 1 < p.layout.h.size() ? detail::hidden_activation(p, z) : std::move(z);
  }
  return a;
}

/// View-dependent head c(feature, n, v) -> RGB in (0, 1).
template <class T>
MatX<T> shade_head(const ShaderParams<T>& p, const MatX<T>& feature, const MatX<T>& n, const MatX<T>& v) {
  if (feature.rows() != p.feature_dim())
    throw Error(ErrorCode::invalid_argument, "feature dimension " + std::to_string(feature.rows()) +
                                                 " does not match the shader feature width " +
                                                 std::to_string(p.feature_dim()));
  MatX<T> a = detail::head_input(feature, n, v);
  for (std::size_t l = 0; l < p.layout.c.size(); ++l) {
    MatX<T> z = detail::affine(p, p.layout.c[l], a);
    a = l + 1 < p.layout.c.size() ? MatX<T>(z.cwiseMax(T(0))) : detail::logistic(z);
  }
  return a;
}

/// Forward pass that records what shade_backward needs. Returns RGB (3 x N).
template <class T>
const MatX<T>& shade_forward(const ShaderParams<T>& p, const ShadeBatch<T>& batch, ShadeCache<T>& cache) {
  detail::check_finite_batch(batch);
  cache.encoded = encode<T>(batch.x, p.encoding);
  cache.h_pre.clear();
  cache.h_act.clear();
  cache.c_pre.clear();
  cache.c_act.clear();
  cache.h_act.push_back(cache.encoded);
  for (std::size_t l = 0; l < p.layout.h.size(); ++l) {
    cache.h_pre.push_back(detail::affine(p, p.layout.h[l], cache.h_act.back()));
    cache.h_act.push_back(l + 1 < p.layout.h.size() ? detail::hidden_activation(p, cache.h_pre.back())
                                                    : cache.h_pre.back());
  }
  cache.c_act.push_back(detail::head_input(cache.h_act.back(), batch.n, batch.v));
  for (std::size_t l = 0; l < p.layout.c.size(); ++l) {
    cache.c_pre.push_back(detail::affine(p, p.layout.c[l], cache.c_act.back()));
    if (l + 1 < p.layout.c.size()) cache.c_act.push_back(cache.c_pre.back().cwiseMax(T(0)));
  }
  cache.rgb = detail::logistic(cache.c_pre.back());
  return cache.rgb;
}

template <class T>
MatX<T> shade(const ShaderParams<T>& p, const ShadeBatch<T>& batch) {
  ShadeCache<T> cache;
  return shade_forward(p, batch, cache);
}

/// Reverse pass for the batch recorded in `cache`; grad_rgb is 3 x N.
template <class T>
ShadeGrads<T> shade_backward(const ShaderParams<T>& p, const ShadeBatch<T>& batch, const ShadeCache<T>& cache,
                             const MatX<T>& grad_rgb) {
  if (grad_rgb.rows() != 3 || grad_rgb.cols() != batch.size())
    throw Error(ErrorCode::invalid_argument, "upstream gradient must be 3 x N for the recorded batch");
  ShadeGrads<T> out;
  out.theta = VecX<T>::Zero(p.theta.size());
  MatX<T> g = (grad_rgb.array() * cache.rgb.array() * (T(1) - cache.rgb.array())).matrix();
  for (std::size_t l = p.layout.c.size(); l-- > 0;) {
    g = detail::affine_backward(p, p.layout.c[l], cache.c_act[l], g, out.theta, true);
    if (l > 0) g = (g.array() * (cache.c_pre[l - 1].array() > T(0)).template cast<T>()).matrix();
  }
  const int F = p.feature_dim();
  out.n = g.middleRows(F, 3);
  out.v = g.bottomRows(3);
  g = MatX<T>(g.topRows(F));
  for (std::size_t l = p.layout.h.size(); l-- > 0;) {
    if (l + 1 < p.layout.h.size()) {
      const auto& z = cache.h_pre[l];
      if (p.arch.activation == Activation::sine) {
        const T w = T(p.arch.siren_omega);
        g = (g.array() * w * (w * z.array()).cos()).matrix();
      } else {
        g = (g.array() * (z.array() > T(0)).template cast<T>()).matrix();
      }
    }
    g = detail::affine_backward(p, p.layout.h[l], cache.h_act[l], g, out.theta, true);
  }
  out.x = encode_backward<T>(batch.x, cache.encoded, g, p.encoding);
  return out;
}

}  // namespace mvr
