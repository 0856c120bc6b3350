#pragma once

#include "scenefit/geometry.hpp"

#include <optional>
#include <vector>

namespace scenefit {

struct RayHit {
  int tri = -1;
  Vec3 bary = Vec3::Zero();  // weights of the face's three vertices
  double t = 0;              // meters along the (unit) ray direction
  Vec3 point = Vec3::Zero();
  Vec3 normal = Vec3::Zero();  // barycentric-interpolated vertex normal
};

// Hits closer than this are treated as self-hits at the origin and dropped.
inline constexpr double kRayTMin = 1e-6;
// Möller–Trumbore determinant cutoff; rays this parallel to a triangle miss.
inline constexpr double kRayDetEpsilon = 1e-9;

/// Single ray / single triangle test. Shared by the BVH and by brute-force
/// checks so both paths agree bit-for-bit on inclusion.
std::optional<RayHit> intersect_triangle(const TriMesh& mesh, int tri,
                                         const Vec3& origin, const Vec3& dir);

/// Bounding volume hierarchy over mesh triangles: median split on the
/// longest axis, leaves of up to 8 triangles. The mesh must outlive the
/// Bvh and must have up-to-date normals; both are immutable afterwards.
class Bvh {
 public:
  explicit Bvh(const TriMesh& mesh, int leaf_size = 8);

  /// Every intersection with t > kRayTMin, ascending t. `dir` must be unit.
  std::vector<RayHit> raycast_all(const Vec3& origin, const Vec3& dir) const;

  /// Front-most hit (minimal t), if any.
  std::optional<RayHit> raycast_first(const Vec3& origin, const Vec3& dir) const;

  const TriMesh& mesh() const { return *mesh_; }

 private:
  struct Node {
    Vec3 lo, hi;
    int left = -1, right = -1;
    int first = 0, count = 0;  // leaf triangle range into order_
  };

  int build(int begin, int end, int leaf_size);

  const TriMesh* mesh_;
  std::vector<Node> nodes_;
  std::vector<int> order_;
  std::vector<Vec3> centroids_;
  int root_ = -1;
};

}  // namespace scenefit
