#include "scenefit/contact.hpp"

#include "test_util.hpp"

#include <doctest.h>

#include <algorithm>
#include <deque>
#include <map>

using namespace scenefit;

namespace {

// Textbook DBSCAN with an O(n^2) range query, used as the reference.
std::vector<int> dbscan_naive(const std::vector<Vec3>& points, double eps, int min_pts) {
  const int n = static_cast<int>(points.size());
  auto neighbors = [&](int p) {
    std::vector<int> out;
    for (int q = 0; q < n; ++q)
      if ((points[p] - points[q]).norm() <= eps) out.push_back(q);
    return out;
  };
  constexpr int kUnvisited = -2;
  std::vector<int> label(n, kUnvisited);
  int cluster = 0;
  for (int p = 0; p < n; ++p) {
    if (label[p] != kUnvisited) continue;
    const auto nbrs = neighbors(p);
    if (static_cast<int>(nbrs.size()) < min_pts) {
      label[p] = -1;
      continue;
    }
    label[p] = cluster;
    std::deque<int> seeds(nbrs.begin(), nbrs.end());
    while (!seeds.empty()) {
      const int q = seeds.front();
      seeds.pop_front();
      if (label[q] == -1) label[q] = cluster;
      if (label[q] != kUnvisited) continue;
      label[q] = cluster;
      const auto qn = neighbors(q);
      if (static_cast<int>(qn.size()) >= min_pts) seeds.insert(seeds.end(), qn.begin(), qn.end());
    }
    ++cluster;
  }
  return label;
}

// Labels must agree up to a consistent relabeling (noise maps to noise).
bool labels_equivalent(const std::vector<int>& a, const std::vector<int>& b) {
  if (a.size() != b.size()) return false;
  std::map<int, int> fwd, bwd;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if ((a[i] == -1) != (b[i] == -1)) return false;
    if (a[i] == -1) continue;
    const auto f = fwd.emplace(a[i], b[i]);
    if (!f.second && f.first->second != b[i]) return false;
    const auto r = bwd.emplace(b[i], a[i]);
    if (!r.second && r.first->second != a[i]) return false;
  }
  return true;
}

PinholeCamera test_camera() {
  PinholeCamera cam;
  cam.fx = cam.fy = 500;
  cam.cx = 320;
  cam.cy = 240;
  cam.width = 640;
  cam.height = 480;
  return cam;
}

SubjectMask full_mask(const PinholeCamera& cam, std::uint8_t value = 255) {
  SubjectMask mask;
  mask.width = cam.width;
  mask.height = cam.height;
  mask.data.assign(static_cast<std::size_t>(cam.width) * cam.height, value);
  return mask;
}

}  // namespace

TEST_CASE("threshold_contacts boundary behavior") {
  ContactProbMap probs;
  probs.prob = {0.4, 0.5, 0.9};
  CHECK(threshold_contacts(probs, 0.5) == std::vector<int>{1, 2});
  probs.prob = {0.0, 0.0};
  CHECK(threshold_contacts(probs, 0.5).empty());
  CHECK_THROWS_AS(threshold_contacts(probs, 0.0), std::invalid_argument);

  auto gen = test::rng(51);
  std::uniform_real_distribution<double> dist(0, 1);
  probs.prob.clear();
  for (int i = 0; i < 500; ++i) probs.prob.push_back(dist(gen));
  const auto fast = threshold_contacts(probs, 0.37);
  std::vector<int> naive;
  for (int i = 0; i < 500; ++i)
    if (probs.prob[i] >= 0.37) naive.push_back(i);
  CHECK(fast == naive);
}

TEST_CASE("dbscan: dense blob forms one cluster") {
  auto gen = test::rng(53);
  std::vector<Vec3> points;
  for (int i = 0; i < 60; ++i) points.push_back(0.1 * test::random_unit(gen));
  const auto labels = dbscan(points, {0.5, 50});
  for (int l : labels) CHECK(l == 0);
}

TEST_CASE("dbscan: isolated points are noise") {
  std::vector<Vec3> points;
  for (int i = 0; i < 10; ++i) points.emplace_back(2.0 * i, 0, 0);
  const auto labels = dbscan(points, {0.5, 50});
  for (int l : labels) CHECK(l == -1);
}

TEST_CASE("dbscan: two far blobs, naive equivalence") {
  auto gen = test::rng(59);
  std::vector<Vec3> points;
  for (int i = 0; i < 100; ++i) points.push_back(0.2 * test::random_point(gen));
  for (int i = 0; i < 100; ++i)
    points.push_back(Vec3(10, 0, 0) + 0.2 * test::random_point(gen));
  const auto fast = dbscan(points, {0.5, 50});
  const auto naive = dbscan_naive(points, 0.5, 50);
  CHECK(labels_equivalent(fast, naive));
  CHECK(*std::max_element(fast.begin(), fast.end()) == 1);
}

TEST_CASE("dbscan matches the naive oracle on random sets") {
  auto gen = test::rng(61);
  std::uniform_int_distribution<int> count(30, 250);
  std::uniform_real_distribution<double> eps_dist(0.1, 1.0);
  std::uniform_int_distribution<int> pts_dist(2, 40);
  for (int trial = 0; trial < 30; ++trial) {
    std::vector<Vec3> points;
    const int n = count(gen);
    for (int i = 0; i < n; ++i) points.push_back(test::random_point(gen, -1.5, 1.5));
    DbscanConfig config{eps_dist(gen), pts_dist(gen)};
    CHECK(labels_equivalent(dbscan(points, config),
                            dbscan_naive(points, config.eps, config.min_pts)));
  }
}

TEST_CASE("dbscan is permutation-invariant up to relabeling") {
  auto gen = test::rng(67);
  std::vector<Vec3> points;
  for (int i = 0; i < 150; ++i) points.push_back(test::random_point(gen));
  const auto base = dbscan(points, {0.4, 6});

  std::vector<int> perm(points.size());
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), gen);
  std::vector<Vec3> shuffled(points.size());
  for (std::size_t i = 0; i < perm.size(); ++i) shuffled[i] = points[perm[i]];
  const auto permuted = dbscan(shuffled, {0.4, 6});

  std::vector<int> realigned(points.size());
  for (std::size_t i = 0; i < perm.size(); ++i) realigned[perm[i]] = permuted[i];
  CHECK(labels_equivalent(base, realigned));
}

TEST_CASE("find_scene_contacts: flat floor, analytic hit") {
  // floor plane y = 1 below a single body vertex at (0, 0.9, 2)
  const PinholeCamera cam = test_camera();
  TriMesh floor = test::flat_grid(9, 3.0, 1.0);
  TriMesh body;
  body.vertices = {{0, 0.9, 2.0}};
  body.faces = {};

  const Bvh bvh(floor);
  DbscanConfig relaxed{0.5, 1};
  const ContactSet contacts =
      find_scene_contacts(body, {0}, cam, full_mask(cam), bvh, floor, relaxed);
  REQUIRE(contacts.seen.size() == 1);
  CHECK(contacts.unseen.empty());
  // ray through the vertex hits the y=1 plane at the analytic scaling
  const Vec3 expected = Vec3(0, 0.9, 2.0) * (1.0 / 0.9);
  CHECK((contacts.seen[0].point - expected).norm() < 1e-9);
  CHECK(contacts.seen[0].body_vertex == 0);

  // barycentric validity on the scene surface
  const Face& face = floor.faces[contacts.seen[0].tri];
  const Vec3 reconstructed = contacts.seen[0].bary[0] * floor.vertices[face[0]] +
                             contacts.seen[0].bary[1] * floor.vertices[face[1]] +
                             contacts.seen[0].bary[2] * floor.vertices[face[2]];
  CHECK((reconstructed - contacts.seen[0].point).norm() < 1e-9);
}

TEST_CASE("find_scene_contacts: occluded pixels route to unseen") {
  const PinholeCamera cam = test_camera();
  TriMesh floor = test::flat_grid(9, 3.0, 1.0);
  TriMesh body;
  body.vertices = {{0, 0.9, 2.0}};
  const Bvh bvh(floor);
  const ContactSet contacts =
      find_scene_contacts(body, {0}, cam, full_mask(cam, 0), bvh, floor, {0.5, 1});
  CHECK(contacts.seen.empty());
  CHECK(contacts.unseen == std::vector<int>{0});
}

TEST_CASE("find_scene_contacts: stray far hits are discarded as noise") {
  const PinholeCamera cam = test_camera();
  // floor at y=1 plus a tiny wall patch 8 m away thatires a few stray rays
  TriMesh scene = test::flat_grid(15, 3.0, 1.0);
  const int base = scene.vertex_count();
  scene.vertices.insert(scene.vertices.end(), {{-1.0, -1.2, 8.0},
                                               {1.0, -1.2, 8.0},
                                               {0.0, -3.0, 8.0}});
  scene.faces.push_back(Face(base, base + 1, base + 2));
  scene.update_normals();
  const Bvh bvh(scene);

  // 100 "foot" vertices over the floor plus 5 strays aimed at the wall patch
  TriMesh body;
  std::vector<int> contact_vertices;
  auto gen = test::rng(71);
  for (int i = 0; i < 100; ++i) {
    body.vertices.push_back(Vec3(0.3 * test::random_point(gen)[0], 0.95,
                                 2.0 + 0.3 * test::random_point(gen)[2]));
    contact_vertices.push_back(i);
  }
  for (int i = 0; i < 5; ++i) {
    body.vertices.push_back(Vec3(0.05 * i - 0.1, -0.3, 2.0));  // projects high, hits wall
    contact_vertices.push_back(100 + i);
  }

  const ContactSet contacts = find_scene_contacts(body, contact_vertices, cam,
                                                  full_mask(cam), bvh, scene, {0.5, 50});
  CHECK(contacts.seen.size() == 100);
  CHECK(contacts.unseen.size() == 5);
  for (int v : contacts.unseen) CHECK(v >= 100);
  for (const SeenContact& c : contacts.seen) CHECK(c.point[1] == doctest::Approx(1.0));
}

TEST_CASE("every contact vertex lands in exactly one of seen/unseen") {
  const PinholeCamera cam = test_camera();
  TriMesh floor = test::flat_grid(9, 3.0, 1.0);
  const Bvh bvh(floor);
  auto gen = test::rng(73);

  TriMesh body;
  std::vector<int> contact_vertices;
  for (int i = 0; i < 60; ++i) {
    // some in front of the camera over the floor, some behind the camera
    const bool behind = i % 7 == 0;
    body.vertices.push_back(behind ? Vec3(0, 0, -1.0)
                                   : Vec3(test::random_point(gen)[0], 0.9,
                                          2.0 + std::abs(test::random_point(gen)[2])));
    contact_vertices.push_back(i);
  }
  const ContactSet contacts =
      find_scene_contacts(body, contact_vertices, cam, full_mask(cam), bvh, floor, {0.5, 3});

  std::set<int> seen_ids, unseen_ids;
  for (const SeenContact& c : contacts.seen) seen_ids.insert(c.body_vertex);
  unseen_ids.insert(contacts.unseen.begin(), contacts.unseen.end());
  CHECK(seen_ids.size() + unseen_ids.size() == contact_vertices.size());
  for (int v : seen_ids) CHECK(unseen_ids.count(v) == 0);
}

TEST_CASE("shrinking the mask never grows the seen set") {
  const PinholeCamera cam = test_camera();
  TriMesh floor = test::flat_grid(9, 3.0, 1.0);
  const Bvh bvh(floor);
  auto gen = test::rng(79);

  TriMesh body;
  std::vector<int> contact_vertices;
  for (int i = 0; i < 40; ++i) {
    body.vertices.push_back(
        Vec3(test::random_point(gen)[0], 0.9, 2.0 + std::abs(test::random_point(gen)[2])));
    contact_vertices.push_back(i);
  }

  SubjectMask mask = full_mask(cam);
  std::size_t previous = std::numeric_limits<std::size_t>::max();
  for (int shrink = 0; shrink < 4; ++shrink) {
    const ContactSet contacts =
        find_scene_contacts(body, contact_vertices, cam, mask, bvh, floor, {0.5, 2});
    CHECK(contacts.seen.size() <= previous);
    previous = contacts.seen.size();
    // zero out the left half, then more
    const int cols = cam.width / 2 + shrink * 60;
    for (int y = 0; y < mask.height; ++y)
      for (int x = 0; x < std::min(cols, mask.width); ++x)
        mask.data[static_cast<std::size_t>(y) * mask.width + x] = 0;
  }
}

TEST_CASE("empty contact set is not an error") {
  const PinholeCamera cam = test_camera();
  TriMesh floor = test::flat_grid(5, 3.0, 1.0);
  const Bvh bvh(floor);
  TriMesh body;
  body.vertices = {{0, 0.9, 2.0}};
  const ContactSet contacts =
      find_scene_contacts(body, {}, cam, full_mask(cam), bvh, floor, {0.5, 1});
  CHECK(contacts.empty());
}
