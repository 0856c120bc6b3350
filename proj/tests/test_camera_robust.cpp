#include "scenefit/camera.hpp"
#include "scenefit/robust.hpp"
#include "scenefit/rotation.hpp"

#include "test_util.hpp"

#include <doctest.h>

using namespace scenefit;

namespace {
PinholeCamera test_camera() {
  PinholeCamera cam;
  cam.fx = cam.fy = 500;
  cam.cx = 320;
  cam.cy = 240;
  cam.width = 640;
  cam.height = 480;
  return cam;
}
}  // namespace

TEST_CASE("projection basics") {
  const PinholeCamera cam = test_camera();
  CHECK(cam.project(Vec3(0, 0, 2)).isApprox(Vec2(320, 240), 1e-12));
  CHECK(cam.project(Vec3(1, 0, 1)).isApprox(Vec2(820, 240), 1e-12));
  CHECK_THROWS_AS(cam.project(Vec3(0, 0, -1)), std::domain_error);
}

TEST_CASE("project / unproject round-trip") {
  const PinholeCamera cam = test_camera();
  auto gen = test::rng(2);
  for (int i = 0; i < 100; ++i) {
    Vec3 p = test::random_point(gen);
    p[2] = 1.0 + std::abs(p[2]) * 4.0;
    const Vec3 back = cam.unproject(cam.project(p), p[2]);
    CHECK((back - p).norm() < 1e-9);
  }
}

TEST_CASE("pixel rays") {
  const PinholeCamera cam = test_camera();
  CHECK(cam.pixel_ray(Vec2(320, 240)).isApprox(Vec3(0, 0, 1), 1e-12));
  const Vec3 diag = cam.pixel_ray(Vec2(320 + 500, 240));
  CHECK(diag.isApprox(Vec3(1, 0, 1).normalized(), 1e-12));
}

TEST_CASE("pixel_ray passes through the original point and re-projects") {
  const PinholeCamera cam = test_camera();
  auto gen = test::rng(4);
  for (int i = 0; i < 100; ++i) {
    Vec3 p = test::random_point(gen);
    p[2] = 1.0 + std::abs(p[2]) * 3.0;
    const Vec2 px = cam.project(p);
    const Vec3 dir = cam.pixel_ray(px);
    // point-to-line distance from p to the ray through the origin
    CHECK((p - p.dot(dir) * dir).norm() < 1e-9);
    // any depth along the ray projects back to the pixel
    for (double depth : {0.5, 2.0, 7.5}) {
      const Vec3 q = dir * (depth / dir[2]);
      CHECK((cam.project(q) - px).norm() < 1e-6);
    }
  }
}

TEST_CASE("camera projection jacobian matches finite differences") {
  const PinholeCamera cam = test_camera();
  auto gen = test::rng(6);
  for (int i = 0; i < 50; ++i) {
    Vec3 p = test::random_point(gen);
    p[2] = 1.0 + std::abs(p[2]) * 3.0;
    const auto jac = cam.project_jacobian(p);
    const double h = 1e-6;
    for (int k = 0; k < 3; ++k) {
      Vec3 lo = p, hi = p;
      lo[k] -= h;
      hi[k] += h;
      const Vec2 fd = (cam.project(hi) - cam.project(lo)) / (2 * h);
      CHECK((jac.col(k) - fd).norm() < 1e-4);
    }
  }
}

TEST_CASE("geman-mcclure values") {
  const GemanMcClure kernel(2.0);
  CHECK(kernel.rho(0) == 0.0);
  CHECK(kernel.rho(2.0) == doctest::Approx(2.0));  // sigma^2 / 2
  CHECK(kernel.rho(2e6) == doctest::Approx(4.0).epsilon(1e-6));
  CHECK(kernel.drho(0) == 0.0);
  CHECK(kernel.drho(1e9) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK_THROWS_AS(GemanMcClure(0.0), std::invalid_argument);
}

TEST_CASE("geman-mcclure is bounded and increasing; gradient matches FD") {
  const GemanMcClure kernel(0.05);
  auto gen = test::rng(8);
  std::uniform_real_distribution<double> dist(1e-4, 10.0);
  double prev = -1;
  for (double e = 0; e < 1.0; e += 0.01) {
    const double r = kernel.rho(e);
    CHECK(r >= 0.0);
    CHECK(r < 0.05 * 0.05);
    CHECK(r > prev);
    prev = r;
  }
  for (int i = 0; i < 100; ++i) {
    const double e = dist(gen);
    const double h = 1e-7 * std::max(1.0, e);
    const double fd = (kernel.rho(e + h) - kernel.rho(e - h)) / (2 * h);
    CHECK(kernel.drho(e) == doctest::Approx(fd).epsilon(1e-6));
  }
}

TEST_CASE("axis-angle exponential map and jacobian") {
  auto gen = test::rng(10);
  // exp of zero is identity; jacobian at zero is the generator basis
  CHECK(so3_exp(Vec3::Zero()).isApprox(Mat3::Identity(), 1e-14));
  const auto jac0 = so3_exp_jacobian(Vec3::Zero());
  for (int i = 0; i < 3; ++i) CHECK(jac0[i].isApprox(skew(Vec3::Unit(i)), 1e-12));

  for (int i = 0; i < 60; ++i) {
    Vec3 w = test::random_point(gen, -2, 2);
    if (i % 10 == 0) w *= 1e-5;  // exercise the small-angle branch
    const Mat3 r = so3_exp(w);
    CHECK((r * r.transpose() - Mat3::Identity()).norm() < 1e-12);
    CHECK(r.determinant() == doctest::Approx(1.0));
    CHECK((so3_exp(so3_log(r)) - r).norm() < 1e-9);

    const auto jac = so3_exp_jacobian(w);
    const double h = 1e-7;
    for (int k = 0; k < 3; ++k) {
      Vec3 lo = w, hi = w;
      lo[k] -= h;
      hi[k] += h;
      const Mat3 fd = (so3_exp(hi) - so3_exp(lo)) / (2 * h);
      CHECK((jac[k] - fd).norm() < 1e-5);
    }
  }
}
