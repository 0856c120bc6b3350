#include "scenefit/bvh.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace scenefit {

std::optional<RayHit> intersect_triangle(const TriMesh& mesh, int tri,
                                         const Vec3& origin, const Vec3& dir) {
  const Face& face = mesh.faces[tri];
  const Vec3& a = mesh.vertices[face[0]];
  const Vec3& b = mesh.vertices[face[1]];
  const Vec3& c = mesh.vertices[face[2]];

  const Vec3 e1 = b - a;
  const Vec3 e2 = c - a;
  const Vec3 pvec = dir.cross(e2);
  const double det = e1.dot(pvec);
  if (std::abs(det) < kRayDetEpsilon) return std::nullopt;

  const double inv_det = 1.0 / det;
  const Vec3 svec = origin - a;
  const double u = svec.dot(pvec) * inv_det;
  if (u < 0.0 || u > 1.0) return std::nullopt;

  const Vec3 qvec = svec.cross(e1);
  const double v = dir.dot(qvec) * inv_det;
  if (v < 0.0 || u + v > 1.0) return std::nullopt;

  const double t = e2.dot(qvec) * inv_det;
  if (t <= kRayTMin) return std::nullopt;

  RayHit hit;
  hit.tri = tri;
  hit.bary = Vec3(1.0 - u - v, u, v);
  hit.t = t;
  hit.point = origin + t * dir;
  Vec3 n = hit.bary[0] * mesh.vertex_normals[face[0]] +
           hit.bary[1] * mesh.vertex_normals[face[1]] +
           hit.bary[2] * mesh.vertex_normals[face[2]];
  const double len = n.norm();
  hit.normal = len > 1e-14 ? Vec3(n / len) : mesh.face_normals[tri];
  return hit;
}

namespace {

// Conservative slab test: padding keeps boxes inclusive under rounding so
// pruning can never lose a true triangle hit.
constexpr double kBoxPad = 1e-9;

bool ray_box(const Vec3& lo, const Vec3& hi, const Vec3& origin, const Vec3& dir) {
  double tmin = 0.0;
  double tmax = std::numeric_limits<double>::infinity();
  for (int k = 0; k < 3; ++k) {
    const double l = lo[k] - kBoxPad;
    const double h = hi[k] + kBoxPad;
    if (std::abs(dir[k]) < 1e-300) {
      if (origin[k] < l || origin[k] > h) return false;
      continue;
    }
    const double inv = 1.0 / dir[k];
    double t0 = (l - origin[k]) * inv;
    double t1 = (h - origin[k]) * inv;
    if (t0 > t1) std::swap(t0, t1);
    tmin = std::max(tmin, t0);
    tmax = std::min(tmax, t1);
    if (tmin > tmax) return false;
  }
  return true;
}

}  // namespace

Bvh::Bvh(const TriMesh& mesh, int leaf_size) : mesh_(&mesh) {
  if (!mesh.has_normals())
    throw std::invalid_argument("Bvh: mesh normals are missing or stale");
  if (mesh.faces.empty()) throw std::invalid_argument("Bvh: empty mesh");
  order_.resize(mesh.faces.size());
  std::iota(order_.begin(), order_.end(), 0);
  centroids_.resize(mesh.faces.size());
  for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
    centroids_[f] = (mesh.vertices[mesh.faces[f][0]] + mesh.vertices[mesh.faces[f][1]] +
                     mesh.vertices[mesh.faces[f][2]]) /
                    3.0;
  }
  root_ = build(0, static_cast<int>(order_.size()), std::max(1, leaf_size));
  centroids_.clear();
  centroids_.shrink_to_fit();
}

int Bvh::build(int begin, int end, int leaf_size) {
  Node node;
  node.lo = Vec3::Constant(std::numeric_limits<double>::infinity());
  node.hi = Vec3::Constant(-std::numeric_limits<double>::infinity());
  for (int i = begin; i < end; ++i) {
    const Face& face = mesh_->faces[order_[i]];
    for (int k = 0; k < 3; ++k) {
      node.lo = node.lo.cwiseMin(mesh_->vertices[face[k]]);
      node.hi = node.hi.cwiseMax(mesh_->vertices[face[k]]);
    }
  }
  const int index = static_cast<int>(nodes_.size());
  nodes_.push_back(node);
  if (end - begin <= leaf_size) {
    nodes_[index].first = begin;
    nodes_[index].count = end - begin;
    std::sort(order_.begin() + begin, order_.begin() + end);
    return index;
  }
  int axis = 0;
  (node.hi - node.lo).maxCoeff(&axis);
  const int mid = (begin + end) / 2;
  std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                   [&](int a, int b) {
                     if (centroids_[a][axis] != centroids_[b][axis])
                       return centroids_[a][axis] < centroids_[b][axis];
                     return a < b;
                   });
  const int left = build(begin, mid, leaf_size);
  const int right = build(mid, end, leaf_size);
  nodes_[index].left = left;
  nodes_[index].right = right;
  return index;
}

std::vector<RayHit> Bvh::raycast_all(const Vec3& origin, const Vec3& dir) const {
  std::vector<RayHit> hits;
  std::vector<int> stack{root_};
  while (!stack.empty()) {
    const int idx = stack.back();
    stack.pop_back();
    const Node& node = nodes_[idx];
    if (!ray_box(node.lo, node.hi, origin, dir)) continue;
    if (node.count > 0) {
      for (int i = node.first; i < node.first + node.count; ++i) {
        if (auto hit = intersect_triangle(*mesh_, order_[i], origin, dir))
          hits.push_back(*hit);
      }
    } else {
      stack.push_back(node.right);
      stack.push_back(node.left);
    }
  }
  std::sort(hits.begin(), hits.end(), [](const RayHit& a, const RayHit& b) {
    if (a.t != b.t) return a.t < b.t;
    return a.tri < b.tri;
  });
  return hits;
}

std::optional<RayHit> Bvh::raycast_first(const Vec3& origin, const Vec3& dir) const {
  const auto hits = raycast_all(origin, dir);
  if (hits.empty()) return std::nullopt;
  return hits.front();
}

}  // namespace scenefit
