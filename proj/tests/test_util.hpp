#pragma once

#include "scenefit/geometry.hpp"

#include <cmath>
#include <random>

namespace scenefit::test {

inline std::mt19937_64 rng(std::uint64_t seed) { return std::mt19937_64(seed); }

inline Vec3 random_point(std::mt19937_64& gen, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> dist(lo, hi);
  return Vec3(dist(gen), dist(gen), dist(gen));
}

inline Vec3 random_unit(std::mt19937_64& gen) {
  std::normal_distribution<double> dist(0.0, 1.0);
  Vec3 v(dist(gen), dist(gen), dist(gen));
  while (v.norm() < 1e-6) v = Vec3(dist(gen), dist(gen), dist(gen));
  return v.normalized();
}

/// Triangle soup of n random triangles inside [-s, s]^3.
inline TriMesh random_soup(std::mt19937_64& gen, int n, double s = 1.0) {
  TriMesh mesh;
  std::uniform_real_distribution<double> dist(-s, s);
  for (int i = 0; i < n; ++i) {
    const Vec3 a(dist(gen), dist(gen), dist(gen));
    const Vec3 b = a + 0.3 * random_point(gen);
    const Vec3 c = a + 0.3 * random_point(gen);
    const int base = mesh.vertex_count();
    mesh.vertices.push_back(a);
    mesh.vertices.push_back(b);
    mesh.vertices.push_back(c);
    mesh.faces.push_back(Face(base, base + 1, base + 2));
  }
  mesh.update_normals();
  return mesh;
}

/// Subdivided icosahedron, radius r, centered at the origin.
inline TriMesh icosphere(int subdivisions = 2, double r = 1.0) {
  const double phi = (1.0 + std::sqrt(5.0)) / 2.0;
  TriMesh mesh;
  mesh.vertices = {{-1, phi, 0}, {1, phi, 0},  {-1, -phi, 0}, {1, -phi, 0},
                   {0, -1, phi}, {0, 1, phi},  {0, -1, -phi}, {0, 1, -phi},
                   {phi, 0, -1}, {phi, 0, 1},  {-phi, 0, -1}, {-phi, 0, 1}};
  for (Vec3& v : mesh.vertices) v.normalize();
  mesh.faces = {{0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11},
                {1, 5, 9},  {5, 11, 4}, {11, 10, 2}, {10, 7, 6}, {7, 1, 8},
                {3, 9, 4},  {3, 4, 2},  {3, 2, 6},   {3, 6, 8},  {3, 8, 9},
                {4, 9, 5},  {2, 4, 11}, {6, 2, 10},  {8, 6, 7},  {9, 8, 1}};
  for (int s = 0; s < subdivisions; ++s) {
    std::map<std::pair<int, int>, int> midpoint;
    auto mid = [&](int a, int b) {
      const std::pair<int, int> key{std::min(a, b), std::max(a, b)};
      const auto it = midpoint.find(key);
      if (it != midpoint.end()) return it->second;
      const int idx = mesh.vertex_count();
      mesh.vertices.push_back((mesh.vertices[a] + mesh.vertices[b]).normalized());
      midpoint[key] = idx;
      return idx;
    };
    std::vector<Face> faces;
    for (const Face& f : mesh.faces) {
      const int ab = mid(f[0], f[1]), bc = mid(f[1], f[2]), ca = mid(f[2], f[0]);
      faces.push_back(Face(f[0], ab, ca));
      faces.push_back(Face(f[1], bc, ab));
      faces.push_back(Face(f[2], ca, bc));
      faces.push_back(Face(ab, bc, ca));
    }
    mesh.faces = std::move(faces);
  }
  for (Vec3& v : mesh.vertices) v *= r;
  mesh.update_normals();
  return mesh;
}

/// Flat grid in the y=height plane spanning [-half, half]^2, n x n vertices,
/// wound with normals toward -y.
inline TriMesh flat_grid(int n, double half, double height = 0.0) {
  TriMesh mesh;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      mesh.vertices.emplace_back(-half + 2 * half * i / (n - 1), height,
                                 -half + 2 * half * j / (n - 1));
    }
  }
  auto at = [&](int i, int j) { return i * n + j; };
  for (int i = 0; i + 1 < n; ++i) {
    for (int j = 0; j + 1 < n; ++j) {
      mesh.faces.push_back(Face(at(i, j), at(i + 1, j), at(i + 1, j + 1)));
      mesh.faces.push_back(Face(at(i, j), at(i + 1, j + 1), at(i, j + 1)));
    }
  }
  mesh.update_normals();
  return mesh;
}

}  // namespace scenefit::test
