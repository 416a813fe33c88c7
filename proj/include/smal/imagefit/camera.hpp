#pragma once

#include "smal/common.hpp"

namespace smal {

/// Pinhole camera at the origin with identity extrinsics, looking down +z.
struct Camera {
  double focal = 500.0;        // pixels
  Vec2 principal{256.0, 256.0};  // pixels
  int width = 512;
  int height = 512;

  void validate() const {
    if (focal <= 0) throw validation_error("focal length must be positive");
    if (principal.x() < 0 || principal.x() > width || principal.y() < 0 ||
        principal.y() > height)
      throw validation_error("principal point outside the image");
  }

  /// Camera for pyramid level l (downsampled by 2^l).
  Camera level(int l) const {
    Camera c = *this;
    const double s = 1.0 / (1 << l);
    c.focal *= s;
    c.principal *= s;
    c.width = std::max(1, width >> l);
    c.height = std::max(1, height >> l);
    return c;
  }
};

inline Vec2 project(const Vec3& p, const Camera& cam) {
  if (p.z() <= 0)
    throw validation_error("point behind the camera (z <= 0)");
  return Vec2(cam.focal * p.x() / p.z() + cam.principal.x(),
              cam.focal * p.y() / p.z() + cam.principal.y());
}

/// d(pixel)/d(point), 2x3.
inline Eigen::Matrix<double, 2, 3> projection_jacobian(const Vec3& p,
                                                       const Camera& cam) {
  Eigen::Matrix<double, 2, 3> j;
  const double iz = 1.0 / p.z();
  j << cam.focal * iz, 0, -cam.focal * p.x() * iz * iz,
      0, cam.focal * iz, -cam.focal * p.y() * iz * iz;
  return j;
}

/// d(pixel)/d(focal).
inline Vec2 projection_focal_derivative(const Vec3& p) {
  return Vec2(p.x() / p.z(), p.y() / p.z());
}

}  // namespace smal
