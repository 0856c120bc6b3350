#pragma once

#include "scenefit/geometry.hpp"

#include <stdexcept>

namespace scenefit {

/// Perspective pinhole camera with identity pose; the scene is pre-aligned
/// to the camera frame. No lens distortion (inputs are rectified upstream).
struct PinholeCamera {
  double fx = 0, fy = 0;  // focal lengths, pixels
  double cx = 0, cy = 0;  // principal point, pixels
  int width = 0, height = 0;

  void validate() const {
    if (fx <= 0 || fy <= 0)
      throw std::invalid_argument("camera: focal lengths must be positive");
    if (cx <= 0 || cx >= width || cy <= 0 || cy >= height)
      throw std::invalid_argument("camera: principal point outside the image");
  }

  bool in_image(const Vec2& px) const {
    return px[0] >= 0 && px[0] < width && px[1] >= 0 && px[1] < height;
  }

  Vec2 project(const Vec3& p) const {
    if (p[2] <= 1e-6) throw std::domain_error("camera: point behind camera");
    return {fx * p[0] / p[2] + cx, fy * p[1] / p[2] + cy};
  }

  /// d(project)/dp, 2x3.
  Eigen::Matrix<double, 2, 3> project_jacobian(const Vec3& p) const {
    const double inv_z = 1.0 / p[2];
    Eigen::Matrix<double, 2, 3> jac;
    jac << fx * inv_z, 0, -fx * p[0] * inv_z * inv_z,
           0, fy * inv_z, -fy * p[1] * inv_z * inv_z;
    return jac;
  }

  Vec3 unproject(const Vec2& px, double depth) const {
    return {(px[0] - cx) / fx * depth, (px[1] - cy) / fy * depth, depth};
  }

  /// Unit-direction camera ray through a pixel; origin is the camera center.
  Vec3 pixel_ray(const Vec2& px) const {
    const Vec3 dir((px[0] - cx) / fx, (px[1] - cy) / fy, 1.0);
    return dir.normalized();
  }
};

}  // namespace scenefit
