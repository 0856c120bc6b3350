#pragma once

#include "scenefit/bvh.hpp"
#include "scenefit/camera.hpp"
#include "scenefit/geometry.hpp"

#include <cstdint>
#include <vector>

namespace scenefit {

/// Per-body-vertex contact probability in [0,1] (produced upstream).
struct ContactProbMap {
  std::vector<double> prob;
  void validate(int body_vertex_count) const;
};

/// Binary bitmap over image pixels marking the non-occluded subject.
struct SubjectMask {
  int width = 0, height = 0;
  std::vector<std::uint8_t> data;  // row-major, nonzero = subject

  bool contains(const Vec2& px) const {
    const int x = static_cast<int>(std::floor(px[0]));
    const int y = static_cast<int>(std::floor(px[1]));
    if (x < 0 || x >= width || y < 0 || y >= height) return false;
    return data[static_cast<std::size_t>(y) * width + x] != 0;
  }
};

/// One validated body-vertex-to-scene correspondence. The hit is pinned to
/// its triangle by barycentric coordinates so it can be re-evaluated after
/// the scene deforms; `point` caches the position at raycast time.
struct SeenContact {
  int body_vertex = -1;
  int tri = -1;
  Vec3 bary = Vec3::Zero();
  Vec3 point = Vec3::Zero();
};

struct ContactSet {
  std::vector<SeenContact> seen;
  std::vector<int> unseen;  // contact-labeled body vertices without a validated hit

  bool empty() const { return seen.empty() && unseen.empty(); }
};

struct DbscanConfig {
  double eps = 0.5;   // meters
  int min_pts = 50;
  void validate() const;
};

/// Indices with probability >= tau, ascending.
std::vector<int> threshold_contacts(const ContactProbMap& probs, double tau = 0.5);

/// Density clustering. Returns one label per point: 0..k-1 for clusters in
/// discovery order, -1 for noise. A point is a core point when at least
/// min_pts points (itself included) lie within eps of it.
std::vector<int> dbscan(const std::vector<Vec3>& points, const DbscanConfig& config);

/// Raycast contact policy: project each contact-labeled body vertex, drop
/// occluded ones to `unseen`, raycast the camera ray of the visible ones
/// against the scene, keep front-most hits, then denoise the pooled hit
/// points with DBSCAN, retaining only the largest cluster. Vertices whose
/// hits are discarded also land in `unseen`.
ContactSet find_scene_contacts(const TriMesh& posed_body,
                               const std::vector<int>& contact_vertices,
                               const PinholeCamera& camera, const SubjectMask& mask,
                               const Bvh& scene_bvh, const TriMesh& scene,
                               const DbscanConfig& dbscan_config);

/// Current position of a seen contact on (a possibly deformed copy of) the
/// scene mesh.
Vec3 seen_contact_position(const SeenContact& contact, const TriMesh& scene);

}  // namespace scenefit
