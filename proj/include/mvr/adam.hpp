#pragma once

#include "mvr/common.hpp"

#include <vector>

namespace mvr {

struct AdamHyper {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Moments and step counter of one parameter group.
template <class T>
struct AdamState {
  VecX<T> m;
  VecX<T> v;
  std::int64_t step = 0;
  double lr = 1e-3;
  AdamHyper hyper;
  std::string name = "params";

  AdamState() = default;
  AdamState(Eigen::Index size, double step_size, AdamHyper h = {}, std::string group = "params")
      : m(VecX<T>::Zero(size)), v(VecX<T>::Zero(size)), lr(step_size), hyper(h), name(std::move(group)) {}

  Eigen::Index size() const { return m.size(); }

  /// Drops the moments and the step count, e.g. after the parameter set changed.
  void reset(Eigen::Index size) {
    m = VecX<T>::Zero(size);
    v = VecX<T>::Zero(size);
    step = 0;
  }
};

/// One bias-corrected Adam update of `count` parameters in place.
/// A non-finite gradient rejects the whole group: nothing changes, a warning
/// is logged and false is returned.
template <class T>
bool adam_step(AdamState<T>& state, T* params, const T* grads, Eigen::Index count) {
  if (count != state.size())
    throw Error(ErrorCode::invalid_argument, "Adam state for '" + state.name + "' has " + std::to_string(state.size()) +
                                                 " entries but got " + std::to_string(count) + " parameters");
  Eigen::Map<const VecX<T>> g(grads, count);
  if (!g.allFinite()) {
    log::warn("non-finite gradient for " + state.name + "; update skipped");
    return false;
  }
  Eigen::Map<VecX<T>> p(params, count);
  const double b1 = state.hyper.beta1, b2 = state.hyper.beta2;
  ++state.step;
  state.m = T(b1) * state.m + T(1 - b1) * g;
  state.v = T(b2) * state.v + T(1 - b2) * g.cwiseProduct(g);
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(state.step));
  const T scale = static_cast<T>(state.lr / c1);
  const T inv_c2 = static_cast<T>(1.0 / c2);
  const T eps = static_cast<T>(state.hyper.epsilon);
  // aligned temporary: the result must not depend on where `params` lives
  const VecX<T> delta = (scale * state.m.array() / ((state.v.array() * inv_c2).sqrt() + eps)).matrix();
  p -= delta;
  return true;
}

template <class T>
bool adam_step(AdamState<T>& state, VecX<T>& params, const VecX<T>& grads) {
  if (grads.size() != params.size())
    throw Error(ErrorCode::invalid_argument, "gradient and parameter sizes differ for '" + state.name + "'");
  return adam_step(state, params.data(), grads.data(), params.size());
}

template <class T>
bool adam_step(AdamState<T>& state, std::vector<Vec3<T>>& params, const std::vector<Vec3<T>>& grads) {
  static_assert(sizeof(Vec3<T>) == 3 * sizeof(T), "Vec3 must be tightly packed");
  if (grads.size() != params.size())
    throw Error(ErrorCode::invalid_argument, "gradient and parameter sizes differ for '" + state.name + "'");
  return adam_step(state, params.empty() ? nullptr : params.front().data(),
                   grads.empty() ? nullptr : grads.front().data(), static_cast<Eigen::Index>(3 * params.size()));
}

}  // namespace mvr
