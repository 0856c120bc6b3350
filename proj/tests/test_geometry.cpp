#include "scenefit/bvh.hpp"
#include "scenefit/geometry.hpp"

#include "test_util.hpp"

#include <doctest.h>

#include <algorithm>

using namespace scenefit;

TEST_CASE("face normal of a planar triangle") {
  TriMesh mesh;
  mesh.vertices = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}};
  mesh.faces = {{0, 1, 2}};
  mesh.update_normals();
  CHECK(mesh.face_normals[0].isApprox(Vec3(0, 0, 1), 1e-12));
}

TEST_CASE("cube vertex normals point away from the centroid") {
  TriMesh cube;
  cube.vertices = {{0, 0, 0}, {1, 0, 0}, {1, 1, 0}, {0, 1, 0},
                   {0, 0, 1}, {1, 0, 1}, {1, 1, 1}, {0, 1, 1}};
  cube.faces = {{0, 2, 1}, {0, 3, 2}, {4, 5, 6}, {4, 6, 7}, {0, 1, 5}, {0, 5, 4},
                {1, 2, 6}, {1, 6, 5}, {2, 3, 7}, {2, 7, 6}, {3, 0, 4}, {3, 4, 7}};
  cube.update_normals();
  CHECK(orientation_report(cube).consistent());
  const Vec3 centroid(0.5, 0.5, 0.5);
  for (int v = 0; v < cube.vertex_count(); ++v)
    CHECK(cube.vertex_normals[v].dot(cube.vertices[v] - centroid) > 0);
}

TEST_CASE("icosphere vertex normals align with the radial direction") {
  const TriMesh sphere = test::icosphere(2, 1.0);
  double worst = 0;
  for (int v = 0; v < sphere.vertex_count(); ++v) {
    const double c = sphere.vertex_normals[v].dot(sphere.vertices[v].normalized());
    worst = std::max(worst, std::acos(std::min(1.0, c)));
  }
  CHECK(worst < 5.0 * M_PI / 180.0);
}

TEST_CASE("degenerate faces are flagged and skipped") {
  TriMesh mesh;
  mesh.vertices = {{0, 0, 0}, {1, 0, 0}, {2, 0, 0}, {0, 1, 0}};
  mesh.faces = {{0, 1, 2}, {0, 1, 3}};  // first face has zero area
  mesh.update_normals();
  CHECK(mesh.degenerate_faces[0] == 1);
  CHECK(mesh.degenerate_faces[1] == 0);
  CHECK(mesh.face_normals[0].norm() == 0.0);
  CHECK(mesh.vertex_normals[0].norm() == doctest::Approx(1.0));
}

TEST_CASE("validate rejects bad faces") {
  TriMesh mesh;
  mesh.vertices = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}};
  mesh.faces = {{0, 1, 3}};
  CHECK_THROWS_AS(mesh.validate(), std::invalid_argument);
  mesh.faces = {{0, 1, 1}};
  CHECK_THROWS_AS(mesh.validate(), std::invalid_argument);
}

TEST_CASE("raycast: axis-aligned analytic hit") {
  TriMesh mesh;
  mesh.vertices = {{-1, -1, 2}, {1, -1, 2}, {0, 1, 2}};
  mesh.faces = {{0, 1, 2}};
  mesh.update_normals();
  const Bvh bvh(mesh);
  const auto hits = bvh.raycast_all(Vec3(0, 0, 0), Vec3(0, 0, 1));
  REQUIRE(hits.size() == 1);
  CHECK(hits[0].t == doctest::Approx(2.0));
  CHECK(hits[0].point.isApprox(Vec3(0, 0, 2), 1e-12));
  CHECK(hits[0].bary.sum() == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(hits[0].bary.minCoeff() >= 0.0);
}

TEST_CASE("raycast through stacked triangles returns ascending hits") {
  TriMesh mesh;
  mesh.vertices = {{-1, -1, 2}, {1, -1, 2}, {0, 1, 2},
                   {-1, -1, 5}, {1, -1, 5}, {0, 1, 5}};
  mesh.faces = {{0, 1, 2}, {3, 4, 5}};
  mesh.update_normals();
  const Bvh bvh(mesh);
  const auto hits = bvh.raycast_all(Vec3(0, 0, 0), Vec3(0, 0, 1));
  REQUIRE(hits.size() == 2);
  CHECK(hits[0].t == doctest::Approx(2.0));
  CHECK(hits[1].t == doctest::Approx(5.0));
  const auto first = bvh.raycast_first(Vec3(0, 0, 0), Vec3(0, 0, 1));
  REQUIRE(first.has_value());
  CHECK(first->tri == hits[0].tri);
}

TEST_CASE("bvh raycast equals brute force on random soup") {
  auto gen = test::rng(11);
  const TriMesh mesh = test::random_soup(gen, 2000);
  const Bvh bvh(mesh);
  for (int i = 0; i < 200; ++i) {
    const Vec3 origin = test::random_point(gen, -2, 2);
    const Vec3 dir = test::random_unit(gen);
    const auto fast = bvh.raycast_all(origin, dir);

    std::vector<RayHit> brute;
    for (int t = 0; t < mesh.face_count(); ++t) {
      if (auto hit = intersect_triangle(mesh, t, origin, dir)) brute.push_back(*hit);
    }
    std::sort(brute.begin(), brute.end(), [](const RayHit& a, const RayHit& b) {
      return a.t != b.t ? a.t < b.t : a.tri < b.tri;
    });

    REQUIRE(fast.size() == brute.size());
    for (std::size_t k = 0; k < fast.size(); ++k) {
      CHECK(fast[k].tri == brute[k].tri);
      CHECK(fast[k].t == brute[k].t);  // identical predicate, bit-equal
    }
  }
}

TEST_CASE("nearest vertex: exact and tie-break") {
  const std::vector<Vec3> points = {{0, 0, 0}, {1, 0, 0}, {2, 0, 0}, {0, 0, 1e-3},
                                    {5, 5, 5}, {1, 1, 0}, {3, 0, 0},  {4, 0, 0},
                                    {0, 4, 0}, {2, 2, 2}};
  const PointIndex index(points);
  CHECK(index.nearest(points[7]).first == 7);
  CHECK(index.nearest(points[7]).second == 0.0);
  // equidistant between 1 and 2: lowest index wins
  const auto [idx, dist] = index.nearest(Vec3(1.5, 0, 0));
  CHECK(idx == 1);
  CHECK(dist == doctest::Approx(0.5));
}

TEST_CASE("nearest vertex matches a linear scan on random queries") {
  auto gen = test::rng(3);
  std::vector<Vec3> points;
  for (int i = 0; i < 700; ++i) points.push_back(test::random_point(gen, -2, 2));
  const PointIndex index(points);
  for (int q = 0; q < 1000; ++q) {
    const Vec3 query = test::random_point(gen, -2.5, 2.5);
    int best = 0;
    double best_d2 = (points[0] - query).squaredNorm();
    for (int i = 1; i < static_cast<int>(points.size()); ++i) {
      const double d2 = (points[i] - query).squaredNorm();
      if (d2 < best_d2) {
        best_d2 = d2;
        best = i;
      }
    }
    const auto [idx, dist] = index.nearest(query);
    CHECK(idx == best);
    CHECK(dist == doctest::Approx(std::sqrt(best_d2)));
  }
}

TEST_CASE("nearest vertex is invariant under a shared rigid transform") {
  auto gen = test::rng(5);
  std::vector<Vec3> points;
  for (int i = 0; i < 200; ++i) points.push_back(test::random_point(gen));
  const PointIndex index(points);

  const Mat3 rot = Eigen::AngleAxisd(0.8, test::random_unit(gen)).toRotationMatrix();
  const Vec3 shift(0.3, -1.2, 2.0);
  std::vector<Vec3> moved = points;
  for (Vec3& p : moved) p = rot * p + shift;
  const PointIndex moved_index(moved);

  for (int q = 0; q < 100; ++q) {
    const Vec3 query = test::random_point(gen, -1.5, 1.5);
    CHECK(index.nearest(query).first == moved_index.nearest(rot * query + shift).first);
  }
}

TEST_CASE("k_ring basics and BFS equivalence") {
  const TriMesh grid = test::flat_grid(7, 1.0);
  const std::set<int> seeds = {24};  // interior vertex

  CHECK(k_ring(grid, seeds, 0) == seeds);

  const auto ring1 = k_ring(grid, seeds, 1);
  const auto adjacency = vertex_adjacency(grid);
  std::set<int> expected = seeds;
  for (int n : adjacency[24]) expected.insert(n);
  CHECK(ring1 == expected);

  // BFS oracle for k=3 from several seeds
  const std::set<int> multi = {0, 13, 40};
  const auto result = k_ring(grid, multi, 3);
  std::set<int> bfs = multi;
  std::set<int> frontier = multi;
  for (int depth = 0; depth < 3; ++depth) {
    std::set<int> next;
    for (int v : frontier) {
      for (int n : adjacency[v]) {
        if (bfs.insert(n).second) next.insert(n);
      }
    }
    frontier = std::move(next);
  }
  CHECK(result == bfs);

  for (int k = 0; k < 4; ++k) {
    const auto a = k_ring(grid, multi, k);
    const auto b = k_ring(grid, multi, k + 1);
    CHECK(std::includes(b.begin(), b.end(), a.begin(), a.end()));
  }
}

TEST_CASE("chamfer distance: trivial cases and naive oracle") {
  const std::vector<Vec3> single_a = {{0, 0, 0}};
  const std::vector<Vec3> single_b = {{1, 0, 0}};
  CHECK(chamfer_distance(single_a, single_a) == 0.0);
  CHECK(chamfer_distance(single_a, single_b) == doctest::Approx(1.0));
  CHECK_THROWS_AS(chamfer_distance({}, single_a), std::invalid_argument);

  auto gen = test::rng(17);
  std::vector<Vec3> a, b;
  for (int i = 0; i < 120; ++i) a.push_back(test::random_point(gen));
  for (int i = 0; i < 80; ++i) b.push_back(test::random_point(gen));

  double naive = 0;
  for (const Vec3& p : a) {
    double best = std::numeric_limits<double>::infinity();
    for (const Vec3& q : b) best = std::min(best, (p - q).norm());
    naive += best;
  }
  for (const Vec3& q : b) {
    double best = std::numeric_limits<double>::infinity();
    for (const Vec3& p : a) best = std::min(best, (p - q).norm());
    naive += best;
  }
  naive /= static_cast<double>(a.size() + b.size());

  CHECK(chamfer_distance(a, b) == doctest::Approx(naive).epsilon(1e-9));
  CHECK(chamfer_distance(a, b) == doctest::Approx(chamfer_distance(b, a)));
}

TEST_CASE("orientation report flags flipped faces") {
  TriMesh mesh;
  mesh.vertices = {{0, 0, 0}, {1, 0, 0}, {1, 1, 0}, {0, 1, 0}};
  mesh.faces = {{0, 1, 2}, {0, 2, 3}};
  CHECK(orientation_report(mesh).consistent());
  mesh.faces = {{0, 1, 2}, {0, 3, 2}};  // second face flipped
  const auto report = orientation_report(mesh);
  CHECK(report.inconsistent_edges == 1);
  CHECK_FALSE(report.consistent());
}

TEST_CASE("closest point on triangle covers the regions") {
  const Vec3 a(0, 0, 0), b(2, 0, 0), c(0, 2, 0);
  CHECK(closest_point_on_triangle(Vec3(0.5, 0.5, 1), a, b, c)
            .isApprox(Vec3(0.5, 0.5, 0), 1e-12));
  CHECK(closest_point_on_triangle(Vec3(-1, -1, 0), a, b, c).isApprox(a, 1e-12));
  CHECK(closest_point_on_triangle(Vec3(1, -1, 0), a, b, c).isApprox(Vec3(1, 0, 0), 1e-12));
  CHECK(closest_point_on_triangle(Vec3(3, 3, 0), a, b, c).isApprox(Vec3(1, 1, 0), 1e-12));
}
