#pragma once

#include "scenefit/body_model.hpp"
#include "scenefit/camera.hpp"
#include "scenefit/config.hpp"
#include "scenefit/contact.hpp"
#include "scenefit/robust.hpp"

#include <optional>
#include <string>
#include <vector>

namespace scenefit {

/// 2D joint detections for one frame: pixel positions plus confidences,
/// addressed by a joint-name header.
struct Keypoints2d {
  std::vector<std::string> names;
  std::vector<Vec2> pixels;
  std::vector<double> confidence;

  int size() const { return static_cast<int>(pixels.size()); }
  void validate() const;
};

/// Resolved keypoint-to-model-joint pairs; unmapped keypoints are ignored.
struct JointMap {
  std::vector<std::pair<int, int>> pairs;  // (keypoint index, model joint index)
};
JointMap resolve_joint_map(const std::map<std::string, std::string>& table,
                           const Keypoints2d& keypoints, const BodyModel& model);

/// Value and gradient over the flattened [pose | translation | shape] layout.
struct TermResult {
  double value = 0;
  Eigen::VectorXd grad;
};

/// Confidence-weighted robust reprojection error of mapped joints. Joints
/// behind the camera are skipped with a warning.
TermResult e_reprojection(const PoseDerivatives& body, const PinholeCamera& camera,
                          const Keypoints2d& keypoints, const JointMap& map,
                          const GemanMcClure& kernel);

/// Quadratic pull of non-root joint rotations toward the rest pose. Stands
/// in for a learned pose prior behind the same interface.
TermResult e_pose_prior(const PoseDerivatives& body);

/// Sum of exp(sign * theta_component) over the configured bending DoFs.
TermResult e_bend_prior(const PoseDerivatives& body, const std::vector<BendDof>& dofs);

/// ||shape||^2.
TermResult e_shape_prior(const PoseDerivatives& body);

/// Seen contacts: robust distance between each contact body vertex and its
/// raycast hit. Stage 2 uses the fixed raycast output; stage 3 passes the
/// current deformed scene so the stored (triangle, barycentric) hit rides
/// the deformation.
TermResult e_seen_contacts(const PoseDerivatives& body, const ContactSet& contacts,
                           const GemanMcClure& kernel,
                           const TriMesh* deformed_scene = nullptr);

/// Unseen contacts: robust one-sided Chamfer from each unseen contact body
/// vertex to its nearest scene vertex, recomputed every evaluation.
TermResult e_unseen_contacts(const PoseDerivatives& body, const ContactSet& contacts,
                             const PointIndex& scene_index, const GemanMcClure& kernel);

/// Squared parameter drift versus the previous frame; theta and gamma parts
/// are returned separately so they take separate weights. Zero (with zero
/// gradient) when there is no previous frame.
struct TemporalResult {
  TermResult theta;
  TermResult gamma;
};
TemporalResult e_temporal(const PoseDerivatives& body,
                          const std::optional<BodyParams>& previous);

/// Body vertices currently classified as penetrating, each registered to
/// its nearest scene vertex. Frozen while an inner optimizer runs.
/// The normal test is only meaningful near the surface; pairs farther than
/// kPenetrationRange apart are treated as outside, and resting contact
/// within kPenetrationTolerance of the surface does not count as
/// penetration.
inline constexpr double kPenetrationRange = 0.10;      // meters
inline constexpr double kPenetrationTolerance = 2e-3;  // meters
struct PenetrationSet {
  std::vector<std::pair<int, int>> pairs;  // (body vertex, scene vertex)
};
PenetrationSet classify_penetrating(const TriMesh& posed_body, const TriMesh& scene,
                                    const PointIndex& scene_index);

/// Robust distance between each frozen penetrating body vertex and its
/// registered scene vertex (positions from the current scene mesh).
TermResult e_penetration(const PoseDerivatives& body, const PenetrationSet& penetrating,
                         const TriMesh& scene, const GemanMcClure& kernel);

enum class Stage { kInitial = 1, kGlobal = 2, kRefine = 3 };

/// Everything a stage objective can touch. Stage 1 needs camera/keypoints;
/// stage 2 adds contacts, scene, and the previous frame; stage 3 adds the
/// frozen penetration set and evaluates contacts on the current mesh.
struct StageInputs {
  const BodyModel* model = nullptr;
  const PinholeCamera* camera = nullptr;
  const Keypoints2d* keypoints = nullptr;
  const JointMap* joint_map = nullptr;
  const ContactSet* contacts = nullptr;
  const TriMesh* scene = nullptr;
  const PointIndex* scene_index = nullptr;
  const PenetrationSet* penetrating = nullptr;
  std::optional<BodyParams> previous;
  const StageConfig* config = nullptr;
};

/// Weighted stage objective:
///   stage 1: E_J + l_th E_th + l_a E_a + l_b E_b
///   stage 2: E_J + l_obs E_obs + l_un E_un + l_tth E_tth + l_tg E_tg
///   stage 3: stage-2 objective on the current mesh + l_pen E_pen
TermResult stage_energy(Stage stage, const StageInputs& inputs, const BodyParams& params);

}  // namespace scenefit
