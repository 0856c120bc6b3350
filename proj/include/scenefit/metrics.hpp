#pragma once

#include "scenefit/geometry.hpp"

#include <string>
#include <vector>

namespace scenefit {

/// Mean per-joint Euclidean error, millimeters.
double pje(const std::vector<Vec3>& predicted, const std::vector<Vec3>& truth);

/// Mean vertex-to-vertex Euclidean error, millimeters (same topology).
double v2v(const std::vector<Vec3>& predicted, const std::vector<Vec3>& truth);

/// Closed-form similarity alignment (rotation + translation + uniform
/// scale) of `predicted` onto `truth`, minimizing squared error. Throws on
/// fewer than three points or a degenerate (collinear) configuration.
/// Set with_scale = false for a rigid-only alignment.
std::vector<Vec3> procrustes_align(const std::vector<Vec3>& predicted,
                                   const std::vector<Vec3>& truth,
                                   bool with_scale = true);

/// Percentage of body vertices not classified as penetrating the scene
/// (normal test against the nearest scene vertex). Pass the deformed scene
/// when one exists.
double non_collision_score(const TriMesh& posed_body, const TriMesh& scene,
                           const PointIndex& scene_index);

struct EvalFrame {
  int frame = 0;
  double pje = 0, v2v = 0, p_pje = 0, p_v2v = 0;  // mm
  double non_collision = 0;                        // percent
};

struct EvalReport {
  std::vector<EvalFrame> frames;
  double mean_pje = 0, mean_v2v = 0, mean_p_pje = 0, mean_p_v2v = 0;
  double mean_non_collision = 0;
  std::vector<std::string> joint_set;  // joints PJE was evaluated over

  void finalize();  // fills the means from the per-frame rows
  std::string table() const;  // plain-text table, one row per frame + mean
};

}  // namespace scenefit
