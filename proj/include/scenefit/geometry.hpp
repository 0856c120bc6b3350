#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <cstdint>
#include <set>
#include <utility>
#include <vector>

namespace scenefit {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Mat4 = Eigen::Matrix4d;
using Face = Eigen::Vector3i;

/// Indexed triangle surface. Positions are meters in the camera frame
/// (right-handed, +x right, +y down, +z forward). Normals are derived
/// data; call update_normals() after any vertex edit.
struct TriMesh {
  std::vector<Vec3> vertices;
  std::vector<Face> faces;

  std::vector<Vec3> vertex_normals;
  std::vector<Vec3> face_normals;
  // Zero-area faces found by the last update_normals() call. Their face
  // normal is zero and they are excluded from vertex-normal averaging.
  std::vector<uint8_t> degenerate_faces;

  int vertex_count() const { return static_cast<int>(vertices.size()); }
  int face_count() const { return static_cast<int>(faces.size()); }
  bool has_normals() const {
    return vertex_normals.size() == vertices.size() &&
           face_normals.size() == faces.size();
  }

  /// Throws std::invalid_argument if any face index is out of range or a
  /// face repeats a vertex index.
  void validate() const;

  /// Face normals from normalized edge cross products; vertex normals as
  /// the area-weighted average of incident (non-degenerate) face normals.
  void update_normals();
};

/// Winding/orientation diagnosis of an oriented manifold-ish surface.
/// Reports, never repairs.
struct OrientationReport {
  std::size_t inconsistent_edges = 0;  // same direction on both sides
  std::size_t boundary_edges = 0;
  std::size_t nonmanifold_edges = 0;  // shared by three or more faces
  bool consistent() const { return inconsistent_edges == 0 && nonmanifold_edges == 0; }
};
OrientationReport orientation_report(const TriMesh& mesh);

/// Vertex -> neighboring vertices over mesh edges, sorted, deduplicated.
std::vector<std::vector<int>> vertex_adjacency(const TriMesh& mesh);

/// All vertices reachable from `seeds` via at most k edges (seeds included).
std::set<int> k_ring(const TriMesh& mesh, const std::set<int>& seeds, int k);

/// Nearest-neighbor index over a fixed point set (kd-tree). Ties on exact
/// distance resolve to the lowest original index.
class PointIndex {
 public:
  explicit PointIndex(std::vector<Vec3> points);

  /// (index, Euclidean distance) of the closest point to `query`.
  std::pair<int, double> nearest(const Vec3& query) const;

  /// Indices of all points within `radius` of `query` (inclusive), ascending.
  std::vector<int> radius_query(const Vec3& query, double radius) const;

  const std::vector<Vec3>& points() const { return points_; }
  int size() const { return static_cast<int>(points_.size()); }

 private:
  struct Node {
    Vec3 lo, hi;
    int left = -1, right = -1;  // children; -1 on leaves
    int first = 0, count = 0;   // leaf range into order_
  };

  int build(int begin, int end, int depth);
  void nearest_recurse(int node, const Vec3& q, double& best_d2, int& best_idx) const;
  void radius_recurse(int node, const Vec3& q, double r2, std::vector<int>& out) const;

  std::vector<Vec3> points_;
  std::vector<int> order_;
  std::vector<Node> nodes_;
  int root_ = -1;
};

/// Pooled symmetric Chamfer distance: every nearest-neighbor distance from
/// a to b and from b to a, averaged over |a|+|b| terms. Plain Euclidean
/// distances, no squaring. Throws std::invalid_argument on an empty set.
double chamfer_distance(const std::vector<Vec3>& a, const std::vector<Vec3>& b);

/// Closest point on triangle (a,b,c) to p.
Vec3 closest_point_on_triangle(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c);

/// Unsigned distance from p to the surface of `mesh` (brute force over faces).
double point_mesh_distance(const Vec3& p, const TriMesh& mesh);

}  // namespace scenefit
