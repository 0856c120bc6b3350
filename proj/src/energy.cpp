#include "scenefit/energy.hpp"

#include "scenefit/deform.hpp"
#include "scenefit/log.hpp"

#include <cmath>
#include <stdexcept>

namespace scenefit {

void StageConfig::validate() const {
  const double weights[] = {lambda_theta, lambda_alpha, lambda_beta,  lambda_obs,
                            lambda_un,    lambda_t_theta, lambda_t_gamma, lambda_pen};
  for (double w : weights) {
    if (w < 0) throw std::invalid_argument("stage config: weights must be non-negative");
  }
  if (sigma_joint_px <= 0 || sigma_contact_m <= 0)
    throw std::invalid_argument("stage config: robust scales must be positive");
  if (!(contact_threshold > 0 && contact_threshold < 1))
    throw std::invalid_argument("stage config: contact threshold must lie in (0,1)");
  if (stage1_iterations < 1 || stage2_iterations < 1 || stage3_iterations < 1 ||
      stage3_outer_iterations < 1)
    throw std::invalid_argument("stage config: iteration budgets must be positive");
  if (stage2_learning_rate <= 0 || stage3_learning_rate <= 0)
    throw std::invalid_argument("stage config: learning rates must be positive");
}

void Keypoints2d::validate() const {
  if (names.size() != pixels.size() || names.size() != confidence.size())
    throw std::invalid_argument("keypoints: name/pixel/confidence lengths differ");
  for (double c : confidence) {
    if (!(c >= 0.0 && c <= 1.0))
      throw std::invalid_argument("keypoints: confidence outside [0,1]");
  }
}

JointMap resolve_joint_map(const std::map<std::string, std::string>& table,
                           const Keypoints2d& keypoints, const BodyModel& model) {
  JointMap map;
  for (int k = 0; k < keypoints.size(); ++k) {
    const auto entry = table.find(keypoints.names[k]);
    if (entry == table.end()) continue;
    for (int j = 0; j < model.joint_count(); ++j) {
      if (model.joint_names[j] == entry->second) {
        map.pairs.emplace_back(k, j);
        break;
      }
    }
  }
  return map;
}

namespace {

TermResult zero_term(const ParamLayout& layout) {
  TermResult term;
  term.grad = Eigen::VectorXd::Zero(layout.size());
  return term;
}

}  // namespace

TermResult e_reprojection(const PoseDerivatives& body, const PinholeCamera& camera,
                          const Keypoints2d& keypoints, const JointMap& map,
                          const GemanMcClure& kernel) {
  TermResult term = zero_term(body.layout());
  for (const auto& [k, j] : map.pairs) {
    const double conf = keypoints.confidence[k];
    if (conf <= 0.0) continue;
    const Vec3& joint = body.joints()[j];
    if (joint[2] <= 1e-6) {
      log_warn("reprojection: joint ", body.model().joint_names[j],
               " behind camera; term skipped");
      continue;
    }
    const Vec2 residual = camera.project(joint) - keypoints.pixels[k];
    const double e = residual.norm();
    term.value += conf * kernel.rho(e);
    if (e > 1e-12) {
      // d rho(|r|)/d params = rho'(|r|) * (r/|r|)^T * dproj * djoint
      const Eigen::Matrix<double, 2, 3> dproj = camera.project_jacobian(joint);
      const Eigen::RowVectorXd chain =
          (conf * kernel.drho(e) / e) * (residual.transpose() * dproj) * body.joint_jacobian(j);
      term.grad += chain.transpose();
    }
  }
  return term;
}

TermResult e_pose_prior(const PoseDerivatives& body) {
  TermResult term = zero_term(body.layout());
  const auto& pose = body.params().pose;
  for (std::size_t j = 1; j < pose.size(); ++j) {  // root orientation is free
    term.value += pose[j].squaredNorm();
    term.grad.segment<3>(3 * static_cast<int>(j)) = 2.0 * pose[j];
  }
  return term;
}

TermResult e_bend_prior(const PoseDerivatives& body, const std::vector<BendDof>& dofs) {
  TermResult term = zero_term(body.layout());
  for (const BendDof& dof : dofs) {
    if (dof.joint < 0 || dof.joint >= body.layout().joints || dof.axis < 0 || dof.axis > 2)
      throw std::invalid_argument("bending prior: invalid joint/axis");
    const double theta = body.params().pose[dof.joint][dof.axis];
    const double value = std::exp(dof.sign * theta);
    term.value += value;
    term.grad[3 * dof.joint + dof.axis] += dof.sign * value;
  }
  return term;
}

TermResult e_shape_prior(const PoseDerivatives& body) {
  TermResult term = zero_term(body.layout());
  const Eigen::VectorXd& shape = body.params().shape;
  term.value = shape.squaredNorm();
  term.grad.tail(shape.size()) = 2.0 * shape;
  return term;
}

namespace {

// Shared shape of the three point-registration terms:
// sum_i rho(|vertex_i - target_i|).
void add_point_pull(const PoseDerivatives& body, int vertex, const Vec3& target,
                    const GemanMcClure& kernel, TermResult& term) {
  const Vec3 residual = body.vertices()[vertex] - target;
  const double e = residual.norm();
  term.value += kernel.rho(e);
  if (e > 1e-12) {
    const Eigen::RowVectorXd chain =
        (kernel.drho(e) / e) * residual.transpose() * body.vertex_jacobian(vertex);
    term.grad += chain.transpose();
  }
}

}  // namespace

TermResult e_seen_contacts(const PoseDerivatives& body, const ContactSet& contacts,
                           const GemanMcClure& kernel, const TriMesh* deformed_scene) {
  TermResult term = zero_term(body.layout());
  for (const SeenContact& contact : contacts.seen) {
    const Vec3 target = deformed_scene ? seen_contact_position(contact, *deformed_scene)
                                       : contact.point;
    add_point_pull(body, contact.body_vertex, target, kernel, term);
  }
  return term;
}

TermResult e_unseen_contacts(const PoseDerivatives& body, const ContactSet& contacts,
                             const PointIndex& scene_index, const GemanMcClure& kernel) {
  TermResult term = zero_term(body.layout());
  for (int v : contacts.unseen) {
    const int nearest = scene_index.nearest(body.vertices()[v]).first;
    add_point_pull(body, v, scene_index.points()[nearest], kernel, term);
  }
  return term;
}

TemporalResult e_temporal(const PoseDerivatives& body,
                          const std::optional<BodyParams>& previous) {
  TemporalResult result;
  result.theta = zero_term(body.layout());
  result.gamma = zero_term(body.layout());
  if (!previous) return result;

  const auto& pose = body.params().pose;
  for (std::size_t j = 0; j < pose.size(); ++j) {
    const Vec3 diff = pose[j] - previous->pose[j];
    result.theta.value += diff.squaredNorm();
    result.theta.grad.segment<3>(3 * static_cast<int>(j)) = 2.0 * diff;
  }
  const Vec3 dg = body.params().translation - previous->translation;
  result.gamma.value = dg.squaredNorm();
  result.gamma.grad.segment<3>(body.layout().translation_offset()) = 2.0 * dg;
  return result;
}

PenetrationSet classify_penetrating(const TriMesh& posed_body, const TriMesh& scene,
                                    const PointIndex& scene_index) {
  if (!scene.has_normals() || !posed_body.has_normals())
    throw std::invalid_argument("classify_penetrating: meshes need up-to-date normals");
  PenetrationSet set;
  for (int v = 0; v < posed_body.vertex_count(); ++v) {
    const auto [nearest, distance] = scene_index.nearest(posed_body.vertices[v]);
    if (distance > kPenetrationRange) continue;
    const double depth = (scene.vertices[nearest] - posed_body.vertices[v])
                             .dot(scene.vertex_normals[nearest]);
    if (depth > kPenetrationTolerance) set.pairs.emplace_back(v, nearest);
  }
  return set;
}

TermResult e_penetration(const PoseDerivatives& body, const PenetrationSet& penetrating,
                         const TriMesh& scene, const GemanMcClure& kernel) {
  TermResult term = zero_term(body.layout());
  for (const auto& [bv, sv] : penetrating.pairs)
    add_point_pull(body, bv, scene.vertices[sv], kernel, term);
  return term;
}

TermResult stage_energy(Stage stage, const StageInputs& inputs, const BodyParams& params) {
  if (!inputs.model || !inputs.camera || !inputs.keypoints || !inputs.joint_map ||
      !inputs.config)
    throw std::invalid_argument("stage_energy: missing base inputs");
  const StageConfig& cfg = *inputs.config;
  const PoseDerivatives body(*inputs.model, params);
  const GemanMcClure joint_kernel(cfg.sigma_joint_px);

  TermResult total =
      e_reprojection(body, *inputs.camera, *inputs.keypoints, *inputs.joint_map, joint_kernel);

  if (stage == Stage::kInitial) {
    const TermResult pose = e_pose_prior(body);
    const TermResult bend = e_bend_prior(body, cfg.bending);
    const TermResult shape = e_shape_prior(body);
    total.value += cfg.lambda_theta * pose.value + cfg.lambda_alpha * bend.value +
                   cfg.lambda_beta * shape.value;
    total.grad += cfg.lambda_theta * pose.grad + cfg.lambda_alpha * bend.grad +
                  cfg.lambda_beta * shape.grad;
    return total;
  }

  if (!inputs.contacts || !inputs.scene || !inputs.scene_index)
    throw std::invalid_argument("stage_energy: stage 2/3 needs contacts and scene");
  const GemanMcClure contact_kernel(cfg.sigma_contact_m);

  const TermResult obs = e_seen_contacts(body, *inputs.contacts, contact_kernel);
  const TermResult un =
      e_unseen_contacts(body, *inputs.contacts, *inputs.scene_index, contact_kernel);
  const TemporalResult temporal = e_temporal(body, inputs.previous);

  total.value += cfg.lambda_obs * obs.value + cfg.lambda_un * un.value +
                 cfg.lambda_t_theta * temporal.theta.value +
                 cfg.lambda_t_gamma * temporal.gamma.value;
  total.grad += cfg.lambda_obs * obs.grad + cfg.lambda_un * un.grad +
                cfg.lambda_t_theta * temporal.theta.grad +
                cfg.lambda_t_gamma * temporal.gamma.grad;

  if (stage == Stage::kRefine) {
    if (!inputs.penetrating)
      throw std::invalid_argument("stage_energy: stage 3 needs a penetration set");
    const TermResult pen =
        e_penetration(body, *inputs.penetrating, *inputs.scene, contact_kernel);
    total.value += cfg.lambda_pen * pen.value;
    total.grad += cfg.lambda_pen * pen.grad;
  }
  return total;
}

}  // namespace scenefit
