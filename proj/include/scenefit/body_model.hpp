#pragma once

#include "scenefit/geometry.hpp"

#include <Eigen/Dense>

#include <filesystem>
#include <string>
#include <vector>

namespace scenefit {

/// Parameters of one body configuration: shape coefficients, per-joint
/// axis-angle rotations (radians), and the global translation (meters).
struct BodyParams {
  Eigen::VectorXd shape;
  std::vector<Vec3> pose;
  Vec3 translation = Vec3::Zero();
};

/// Flattened parameter layout shared by the energies and the optimizers:
/// [pose (3 per joint) | translation (3) | shape (S)].
struct ParamLayout {
  int joints = 0;
  int shape_dims = 0;

  int pose_offset() const { return 0; }
  int translation_offset() const { return 3 * joints; }
  int shape_offset() const { return 3 * joints + 3; }
  int size() const { return 3 * joints + 3 + shape_dims; }
};

Eigen::VectorXd flatten(const BodyParams& params);
BodyParams unflatten(const ParamLayout& layout, const Eigen::VectorXd& x);

struct PosedBody {
  TriMesh mesh;
  std::vector<Vec3> joints;
};

/// Skinned parametric body: kinematic tree, linear shape blend, joint
/// regression from the shaped template, and linear blend skinning.
struct BodyModel {
  std::vector<Vec3> template_vertices;
  std::vector<Face> faces;
  std::vector<int> parents;  // parents[0] == -1, parents[i] < i
  std::vector<std::string> joint_names;
  Eigen::MatrixXd joint_regressor;            // J x V, rows sum to 1
  Eigen::MatrixXd skin_weights;               // V x J, rows sum to 1
  std::vector<Eigen::Matrix3Xd> shape_dirs;   // S entries, 3 x V each

  int vertex_count() const { return static_cast<int>(template_vertices.size()); }
  int joint_count() const { return static_cast<int>(parents.size()); }
  int shape_dim() const { return static_cast<int>(shape_dirs.size()); }
  ParamLayout layout() const { return {joint_count(), shape_dim()}; }

  BodyParams neutral_params() const;

  /// Throws std::invalid_argument on any structural invariant violation.
  void validate() const;

  /// Template plus shape blend.
  std::vector<Vec3> shaped_vertices(const Eigen::VectorXd& beta) const;

  /// Joint regressor applied to the shaped template.
  std::vector<Vec3> rest_joints(const Eigen::VectorXd& beta) const;

  /// Forward kinematics + linear blend skinning + global translation.
  /// The returned mesh has updated normals.
  PosedBody pose(const BodyParams& params) const;
};

/// Forward pass plus analytic first derivatives of posed joints and
/// vertices with respect to the flattened parameter vector. Built once per
/// energy evaluation and shared across terms.
class PoseDerivatives {
 public:
  PoseDerivatives(const BodyModel& model, const BodyParams& params);

  const BodyModel& model() const { return *model_; }
  const BodyParams& params() const { return params_; }
  const ParamLayout& layout() const { return layout_; }

  const std::vector<Vec3>& joints() const { return joints_; }
  const std::vector<Vec3>& vertices() const { return vertices_; }

  /// 3 x layout().size() jacobian of posed joint j.
  Eigen::Matrix3Xd joint_jacobian(int joint) const;
  /// 3 x layout().size() jacobian of posed vertex v.
  Eigen::Matrix3Xd vertex_jacobian(int vertex) const;

 private:
  const BodyModel* model_;
  BodyParams params_;
  ParamLayout layout_;

  std::vector<Vec3> shaped_;             // shape-blended template
  std::vector<Vec3> rest_joints_;
  std::vector<Eigen::Matrix3Xd> rest_joint_shape_grad_;  // per shape dim, 3 x J

  std::vector<Mat3> world_rot_;          // per joint
  std::vector<Vec3> world_pos_;
  std::vector<Vec3> joints_;             // world_pos_ + translation
  std::vector<Vec3> vertices_;           // skinned + translation

  // Derivative blocks indexed [param * J + joint]; rotation blocks exist
  // for pose parameters only (shape cannot rotate a joint frame).
  int pose_params_;
  std::vector<Mat3> d_world_rot_;        // pose params
  std::vector<Vec3> d_world_pos_pose_;   // pose params
  std::vector<Vec3> d_world_pos_shape_;  // shape params

  std::vector<std::vector<std::pair<int, double>>> vertex_bones_;
};

/// Versioned JSON container for BodyModel. storage="inline" keeps all
/// numeric arrays in the JSON document; storage="sidecar" writes them as
/// little-endian float64 into <path>.bin and stores offsets instead.
BodyModel load_body_model(const std::filesystem::path& path);
void save_body_model(const BodyModel& model, const std::filesystem::path& path,
                     const std::string& storage = "inline");

}  // namespace scenefit
