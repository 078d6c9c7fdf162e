#pragma once

#include "mvr/common.hpp"

#include <Eigen/Dense>
#include <limits>

namespace mvr {

/// Points closer than this to the camera plane (camera-space z) count as
/// behind the camera.
inline constexpr double kNearPlane = 1e-3;

/// Pinhole camera, OpenCV convention: x right, y down, z forward. Pixel
/// (i, j) covers [i, i+1) x [j, j+1); its center is (i + 0.5, j + 0.5).
template <class T>
struct Camera {
  Mat3<T> K = Mat3<T>::Identity();  // intrinsics, pixels
  Mat3<T> R = Mat3<T>::Identity();  // world -> camera rotation
  Vec3<T> t = Vec3<T>::Zero();
  int width = 0;
  int height = 0;

  Vec3<T> center() const { return -R.transpose() * t; }

  template <class U>
  Camera<U> cast() const {
    Camera<U> c;
    c.K = K.template cast<U>();
    c.R = R.template cast<U>();
    c.t = t.template cast<U>();
    c.width = width;
    c.height = height;
    return c;
  }
};

template <class T>
void validate(const Camera<T>& cam) {
  const Mat3<double> R = cam.R.template cast<double>();
  if ((R * R.transpose() - Mat3<double>::Identity()).cwiseAbs().maxCoeff() > 1e-6 || std::abs(R.determinant() - 1.0) > 1e-6)
    throw Error(ErrorCode::invalid_argument, "camera rotation is not orthonormal with determinant +1");
  if (!(std::abs(static_cast<double>(cam.K.template cast<double>().determinant())) > 1e-12))
    throw Error(ErrorCode::invalid_argument, "camera intrinsics are not invertible");
  if (cam.width <= 0 || cam.height <= 0) throw Error(ErrorCode::invalid_argument, "camera resolution must be positive");
}

template <class T>
struct Projection {
  Vec2<T> pixel = Vec2<T>::Zero();
  T depth = T(0);
  bool behind = false;
};

template <class T>
Projection<T> project(const Camera<T>& cam, const Vec3<T>& point) {
  const Vec3<T> pc = cam.R * point + cam.t;
  const Vec3<T> h = cam.K * pc;
  Projection<T> out;
  out.depth = pc.z();
  out.behind = !(static_cast<double>(pc.z()) > kNearPlane);
  if (h.z() != T(0)) out.pixel = Vec2<T>(h.x() / h.z(), h.y() / h.z());
  return out;
}

/// Rows: d(u)/dX, d(v)/dX, d(depth)/dX for a world point X in front of the camera.
template <class T>
Eigen::Matrix<T, 3, 3> project_jacobian(const Camera<T>& cam, const Vec3<T>& point) {
  const Vec3<T> pc = cam.R * point + cam.t;
  const Vec3<T> h = cam.K * pc;
  const T u = h.x() / h.z(), v = h.y() / h.z();
  Eigen::Matrix<T, 3, 3> J;
  J.row(0) = (cam.K.row(0) - u * cam.K.row(2)) / h.z();
  J.row(1) = (cam.K.row(1) - v * cam.K.row(2)) / h.z();
  J.row(2) = Vec3<T>(0, 0, 1).transpose();
  return J * cam.R;
}

/// World point at camera-space depth `depth` behind pixel `pixel`.
template <class T>
Vec3<T> unproject(const Camera<T>& cam, const Vec2<T>& pixel, T depth) {
  const Vec3<T> ray = cam.K.inverse() * Vec3<T>(pixel.x(), pixel.y(), T(1));
  const Vec3<T> pc = ray * (depth / ray.z());
  return cam.R.transpose() * (pc - cam.t);
}

/// Unnormalized world-space direction of the ray through `pixel`.
template <class T>
Vec3<T> pixel_ray(const Camera<T>& cam, const Mat3<T>& K_inv, T u, T v) {
  return cam.R.transpose() * (K_inv * Vec3<T>(u, v, T(1)));
}

/// Same camera rendering at another resolution (intrinsics rescaled).
template <class T>
Camera<T> with_resolution(const Camera<T>& cam, int width, int height) {
  Camera<T> out = cam;
  const T sx = T(width) / T(cam.width), sy = T(height) / T(cam.height);
  out.K.row(0) *= sx;
  out.K.row(1) *= sy;
  out.width = width;
  out.height = height;
  return out;
}

template <class T>
Mat3<T> intrinsics(T focal, int width, int height) {
  Mat3<T> K = Mat3<T>::Identity();
  K(0, 0) = focal;
  K(1, 1) = focal;
  K(0, 2) = T(width) / T(2);
  K(1, 2) = T(height) / T(2);
  return K;
}

/// Camera at `eye` looking at `target` with world `up` mapped to image-up.
template <class T>
Camera<T> look_at(const Vec3<T>& eye, const Vec3<T>& target, Vec3<T> up, int width, int height, T focal) {
  const Vec3<T> forward = (target - eye).normalized();
  if (forward.cross(up).norm() < T(1e-6)) up = std::abs(forward.y()) < T(0.9) ? Vec3<T>::UnitY() : Vec3<T>::UnitX();
  const Vec3<T> right = forward.cross(up).normalized();
  const Vec3<T> down = forward.cross(right);
  Camera<T> cam;
  cam.R.row(0) = right.transpose();
  cam.R.row(1) = down.transpose();
  cam.R.row(2) = forward.transpose();
  cam.t = -cam.R * eye;
  cam.K = intrinsics(focal, width, height);
  cam.width = width;
  cam.height = height;
  return cam;
}

/// Camera on a sphere around `target`; +z is up, azimuth is measured from +x
/// toward +y, elevation from the xy-plane.
template <class T>
Camera<T> orbit_camera(T azimuth_deg, T elevation_deg, T radius, const Vec3<T>& target, int width, int height, T focal) {
  const T deg = T(3.14159265358979323846) / T(180);
  const T az = azimuth_deg * deg, el = elevation_deg * deg;
  const Vec3<T> eye = target + radius * Vec3<T>(std::cos(el) * std::cos(az), std::cos(el) * std::sin(az), std::sin(el));
  return look_at<T>(eye, target, Vec3<T>::UnitZ(), width, height, focal);
}

}  // namespace mvr
