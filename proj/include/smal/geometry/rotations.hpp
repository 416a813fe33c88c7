#pragma once

#include <algorithm>
#include <array>
#include <cmath>

#include "smal/common.hpp"

namespace smal {

inline Mat3 skew(const Vec3& v) {
  Mat3 m;
  m << 0, -v.z(), v.y(), v.z(), 0, -v.x(), -v.y(), v.x(), 0;
  return m;
}

// Angle below which the trig coefficients switch to their Taylor expansions.
inline constexpr double kSmallAngle = 1e-8;

/// Rotation matrix of an axis-angle (Rodrigues) vector. Smooth through r = 0.
inline Mat3 rodrigues_to_matrix(const Vec3& r) {
  const double theta2 = r.squaredNorm();
  const double theta = std::sqrt(theta2);
  double a, b;  // sin(t)/t and (1-cos(t))/t^2
  if (theta < kSmallAngle) {
    a = 1.0 - theta2 / 6.0;
    b = 0.5 - theta2 / 24.0;
  } else {
    a = std::sin(theta) / theta;
    b = (1.0 - std::cos(theta)) / theta2;
  }
  const Mat3 k = skew(r);
  return Mat3::Identity() + a * k + b * k * k;
}

/// Right Jacobian of SO(3): R(r + dr) = R(r) * exp([J_r(r) dr]x) to first order.
inline Mat3 so3_right_jacobian(const Vec3& r) {
  const double theta2 = r.squaredNorm();
  const double theta = std::sqrt(theta2);
  double b, c;  // (1-cos(t))/t^2 and (t - sin(t))/t^3
  if (theta < kSmallAngle) {
    b = 0.5 - theta2 / 24.0;
    c = 1.0 / 6.0 - theta2 / 120.0;
  } else {
    b = (1.0 - std::cos(theta)) / theta2;
    c = (theta - std::sin(theta)) / (theta2 * theta);
  }
  const Mat3 k = skew(r);
  return Mat3::Identity() - b * k + c * k * k;
}

inline Mat3 so3_right_jacobian_inverse(const Vec3& r) {
  const double theta2 = r.squaredNorm();
  const double theta = std::sqrt(theta2);
  double c;
  if (theta < kSmallAngle) {
    c = 1.0 / 12.0 + theta2 / 720.0;
  } else {
    c = 1.0 / theta2 - (1.0 + std::cos(theta)) / (2.0 * theta * std::sin(theta));
  }
  const Mat3 k = skew(r);
  return Mat3::Identity() + 0.5 * k + c * k * k;
}

/// Partial derivatives dR/dr_c, c = 0,1,2. Uses dR = R [J_r(r) e_c]x.
inline std::array<Mat3, 3> rotation_matrix_derivatives(const Vec3& r) {
  const Mat3 rot = rodrigues_to_matrix(r);
  const Mat3 jr = so3_right_jacobian(r);
  std::array<Mat3, 3> d;
  for (int c = 0; c < 3; ++c) d[c] = rot * skew(jr.col(c));
  return d;
}

/// Pullback through R(r): given dE/dR, returns dE/dr.
inline Vec3 rotation_pullback(const Vec3& r, const Mat3& rot_grad) {
  const Mat3 rot = rodrigues_to_matrix(r);
  const Mat3 jr = so3_right_jacobian(r);
  Vec3 g;
  for (int c = 0; c < 3; ++c)
    g[c] = rot_grad.cwiseProduct(rot * skew(jr.col(c))).sum();
  return g;
}

/// Log map: axis-angle vector of a rotation matrix, angle in [0, pi].
inline Vec3 matrix_to_rodrigues(const Mat3& rot) {
  const double cos_theta =
      std::clamp((rot.trace() - 1.0) * 0.5, -1.0, 1.0);
  const double theta = std::acos(cos_theta);
  Vec3 w(rot(2, 1) - rot(1, 2), rot(0, 2) - rot(2, 0), rot(1, 0) - rot(0, 1));
  if (theta < kSmallAngle) return 0.5 * w;
  if (theta > M_PI - 1e-6) {
    // Near pi the off-diagonal differences vanish; recover the axis from
    // the symmetric part instead.
    const Mat3 s = 0.5 * (rot + Mat3::Identity());
    Vec3 axis(std::sqrt(std::max(0.0, s(0, 0))),
              std::sqrt(std::max(0.0, s(1, 1))),
              std::sqrt(std::max(0.0, s(2, 2))));
    int k;
    axis.maxCoeff(&k);
    for (int i = 0; i < 3; ++i)
      if (i != k && s(k, i) < 0) axis[i] = -axis[i];
    if (w[k] < 0) axis = -axis;
    return theta * axis.normalized();
  }
  return (theta / (2.0 * std::sin(theta))) * w;
}

/// Relative rotation q = log(R(parent)^T R(child)) with analytic Jacobians
/// w.r.t. both Rodrigues parameters.
struct RelativeRotation {
  Vec3 q;
  Mat3 dq_dchild;
  Mat3 dq_dparent;
};

inline RelativeRotation relative_rodrigues(const Vec3& r_parent,
                                           const Vec3& r_child) {
  const Mat3 rp = rodrigues_to_matrix(r_parent);
  const Mat3 rc = rodrigues_to_matrix(r_child);
  const Mat3 rel = rp.transpose() * rc;
  RelativeRotation out;
  out.q = matrix_to_rodrigues(rel);
  const Mat3 jinv = so3_right_jacobian_inverse(out.q);
  out.dq_dchild = jinv * so3_right_jacobian(r_child);
  out.dq_dparent = -jinv * rel.transpose() * so3_right_jacobian(r_parent);
  return out;
}

}  // namespace smal
