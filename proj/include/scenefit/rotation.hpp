#pragma once

#include "scenefit/geometry.hpp"

#include <array>
#include <cmath>

namespace scenefit {

inline Mat3 skew(const Vec3& v) {
  Mat3 m;
  m << 0, -v[2], v[1],
       v[2], 0, -v[0],
       -v[1], v[0], 0;
  return m;
}

/// Axis-angle to rotation matrix (Rodrigues), series-expanded near zero.
inline Mat3 so3_exp(const Vec3& w) {
  const double theta2 = w.squaredNorm();
  const Mat3 k = skew(w);
  if (theta2 < 1e-16) {
    return Mat3::Identity() + k + 0.5 * k * k;
  }
  const double theta = std::sqrt(theta2);
  return Mat3::Identity() + (std::sin(theta) / theta) * k +
         ((1.0 - std::cos(theta)) / theta2) * k * k;
}

/// Rotation matrix to axis-angle, |result| <= pi.
inline Vec3 so3_log(const Mat3& r) {
  const double cos_theta = std::min(1.0, std::max(-1.0, (r.trace() - 1.0) / 2.0));
  const double theta = std::acos(cos_theta);
  const Vec3 axis_raw(r(2, 1) - r(1, 2), r(0, 2) - r(2, 0), r(1, 0) - r(0, 1));
  if (theta < 1e-8) return 0.5 * axis_raw;
  if (theta > M_PI - 1e-6) {
    // Near pi the skew part vanishes; recover the axis from the symmetric part.
    const Mat3 s = 0.5 * (r + Mat3::Identity());
    Vec3 axis(std::sqrt(std::max(0.0, s(0, 0))), std::sqrt(std::max(0.0, s(1, 1))),
              std::sqrt(std::max(0.0, s(2, 2))));
    int major;
    axis.cwiseAbs().maxCoeff(&major);
    for (int k = 0; k < 3; ++k) {
      if (k != major && s(major, k) < 0) axis[k] = -axis[k];
    }
    axis.normalize();
    // Pick the sign matching the (small but informative) skew part.
    if (axis.dot(axis_raw) < 0) axis = -axis;
    return theta * axis;
  }
  return (theta / (2.0 * std::sin(theta))) * axis_raw;
}

/// Partial derivatives dR/dw_i of the exponential map at w.
/// Gallego & Yezzi closed form away from zero, second-order series near it.
inline std::array<Mat3, 3> so3_exp_jacobian(const Vec3& w) {
  std::array<Mat3, 3> jac;
  const double theta2 = w.squaredNorm();
  if (theta2 < 1e-8) {
    const Mat3 k = skew(w);
    for (int i = 0; i < 3; ++i) {
      const Mat3 ei = skew(Vec3::Unit(i));
      jac[i] = ei + 0.5 * (ei * k + k * ei);
    }
    return jac;
  }
  const Mat3 r = so3_exp(w);
  const Mat3 one_minus_r = Mat3::Identity() - r;
  for (int i = 0; i < 3; ++i) {
    const Vec3 col = w.cross(one_minus_r.col(i));
    jac[i] = ((w[i] * skew(w) + skew(col)) / theta2) * r;
  }
  return jac;
}

}  // namespace scenefit
