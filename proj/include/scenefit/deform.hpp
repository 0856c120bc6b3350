#pragma once

#include "scenefit/geometry.hpp"

#include <set>
#include <vector>

namespace scenefit {

/// Per-scene-vertex semantic class plus the set of classes allowed to deform.
struct SemanticLabels {
  std::vector<int> classes;
  std::set<int> deformable_classes;

  void validate(int scene_vertex_count) const;
  bool deformable(int vertex) const {
    return deformable_classes.count(classes[vertex]) > 0;
  }
};

enum class RotationScope {
  kAllMovable,    // rotation fitted per movable vertex (default)
  kControlsOnly,  // literal variant: rotations only at control vertices
};

struct DeformConfig {
  int k = 3;                   // neighbor-propagation order for the movable region
  int max_iterations = 50;     // local-global iterations
  double tolerance = 1e-6;     // max vertex movement (meters) to declare convergence
  RotationScope rotation_scope = RotationScope::kAllMovable;
  void validate() const;
};

/// Scene vertices allowed to move: nearest scene vertices of all body
/// vertices, kept when their class is deformable, propagated k edges out.
std::vector<int> movable_region(const TriMesh& scene, const SemanticLabels& labels,
                                const TriMesh& posed_body, const PointIndex& scene_index,
                                const DeformConfig& config);

enum class Collision { kOutside, kColliding };

/// Normal-based collision test: the body point is colliding when the vector
/// from it to its nearest scene vertex runs along the scene normal, i.e. the
/// body point sits beneath the surface.
Collision classify_collision(const Vec3& body_point, const Vec3& body_normal,
                             const Vec3& scene_point, const Vec3& scene_normal);

struct ControlTargets {
  std::vector<int> controls;    // scene vertex indices, ascending
  std::vector<Vec3> targets;    // matching target positions
  std::vector<double> depths;   // penetration depth of the claiming body vertex
};

/// Control selection: scene vertex v_c with target at body vertex v_b iff
/// (1) v_c is v_b's nearest scene vertex and is movable, (2) v_b is contact
/// labeled, (3) v_b collides, (4) the two normals oppose. When several body
/// vertices claim one scene vertex, the deepest penetration wins.
ControlTargets select_controls(const TriMesh& scene, const TriMesh& posed_body,
                               const std::vector<int>& contact_vertices,
                               const std::vector<int>& movable,
                               const PointIndex& scene_index);

/// Sparse symmetric cotangent weights of a mesh: w = (cot a + cot b) / 2
/// over the angles opposite each edge, clamped below at 1e-6.
struct EdgeWeights {
  // Per vertex: sorted (neighbor, weight) pairs.
  std::vector<std::vector<std::pair<int, double>>> neighbors;
};
EdgeWeights cotangent_weights(const TriMesh& mesh);

struct ArapProblem {
  const TriMesh* rest = nullptr;   // rest state; weights live on this mesh
  std::vector<int> movable;        // ascending
  std::vector<int> controls;       // subset of movable, ascending
  std::vector<Vec3> targets;
  EdgeWeights weights;
  DeformConfig config;
};

/// Validates the inputs and computes rest-mesh cotangent weights.
ArapProblem build_arap_problem(const TriMesh& rest, const std::vector<int>& movable,
                               const ControlTargets& controls, const DeformConfig& config);

struct ArapReport {
  int iterations = 0;
  std::vector<double> energy_trace;  // energy after each local-global iteration
};

/// Local-global solve: per-vertex rotations from the SVD of the weighted
/// edge covariance, then a Laplacian solve over free movable vertices with
/// controls pinned to their targets and everything else pinned to rest.
/// Returns the full vertex array; non-movable entries are bit-identical to
/// the rest mesh. Throws std::runtime_error naming the component when a
/// movable component has no constraint to hold it.
std::vector<Vec3> arap_solve(const ArapProblem& problem, ArapReport* report = nullptr);

/// Deformation energy of a candidate state given per-vertex rotations; the
/// quantity the local-global iteration monotonically decreases.
double arap_energy(const ArapProblem& problem, const std::vector<Vec3>& positions,
                   const std::vector<Mat3>& rotations);

}  // namespace scenefit
