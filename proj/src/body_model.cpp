#include "scenefit/body_model.hpp"

#include "scenefit/rotation.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace scenefit {

using nlohmann::json;

Eigen::VectorXd flatten(const BodyParams& params) {
  const int joints = static_cast<int>(params.pose.size());
  const int shape = static_cast<int>(params.shape.size());
  Eigen::VectorXd x(3 * joints + 3 + shape);
  for (int j = 0; j < joints; ++j) x.segment<3>(3 * j) = params.pose[j];
  x.segment<3>(3 * joints) = params.translation;
  x.tail(shape) = params.shape;
  return x;
}

BodyParams unflatten(const ParamLayout& layout, const Eigen::VectorXd& x) {
  if (x.size() != layout.size())
    throw std::invalid_argument("unflatten: parameter vector size mismatch");
  BodyParams params;
  params.pose.resize(layout.joints);
  for (int j = 0; j < layout.joints; ++j) params.pose[j] = x.segment<3>(3 * j);
  params.translation = x.segment<3>(layout.translation_offset());
  params.shape = x.tail(layout.shape_dims);
  return params;
}

BodyParams BodyModel::neutral_params() const {
  BodyParams params;
  params.shape = Eigen::VectorXd::Zero(shape_dim());
  params.pose.assign(joint_count(), Vec3::Zero());
  params.translation = Vec3::Zero();
  return params;
}

void BodyModel::validate() const {
  const int v = vertex_count();
  const int j = joint_count();
  if (j == 0 || v == 0) throw std::invalid_argument("body model: empty model");
  if (parents[0] != -1) throw std::invalid_argument("body model: parents[0] must be -1");
  for (int i = 1; i < j; ++i) {
    if (parents[i] < 0 || parents[i] >= i)
      throw std::invalid_argument("body model: joints must be topologically ordered");
  }
  if (joint_regressor.rows() != j || joint_regressor.cols() != v)
    throw std::invalid_argument("body model: joint regressor shape mismatch");
  if (skin_weights.rows() != v || skin_weights.cols() != j)
    throw std::invalid_argument("body model: skin weight shape mismatch");
  for (int i = 0; i < j; ++i) {
    if (std::abs(joint_regressor.row(i).sum() - 1.0) > 1e-6)
      throw std::invalid_argument("body model: regressor row " + std::to_string(i) +
                                  " does not sum to 1");
  }
  for (int i = 0; i < v; ++i) {
    if (std::abs(skin_weights.row(i).sum() - 1.0) > 1e-6)
      throw std::invalid_argument("body model: skin weight row " + std::to_string(i) +
                                  " does not sum to 1");
  }
  for (const auto& dirs : shape_dirs) {
    if (dirs.cols() != v) throw std::invalid_argument("body model: shape basis shape mismatch");
  }
  TriMesh shell;
  shell.vertices = template_vertices;
  shell.faces = faces;
  shell.validate();
}

std::vector<Vec3> BodyModel::shaped_vertices(const Eigen::VectorXd& beta) const {
  if (beta.size() != shape_dim())
    throw std::invalid_argument("body model: shape vector has " +
                                std::to_string(beta.size()) + " dims, expected " +
                                std::to_string(shape_dim()));
  std::vector<Vec3> shaped = template_vertices;
  for (int s = 0; s < shape_dim(); ++s) {
    if (beta[s] == 0.0) continue;
    for (int v = 0; v < vertex_count(); ++v) shaped[v] += beta[s] * shape_dirs[s].col(v);
  }
  return shaped;
}

std::vector<Vec3> BodyModel::rest_joints(const Eigen::VectorXd& beta) const {
  const std::vector<Vec3> shaped = shaped_vertices(beta);
  std::vector<Vec3> joints(joint_count(), Vec3::Zero());
  for (int j = 0; j < joint_count(); ++j) {
    for (int v = 0; v < vertex_count(); ++v) {
      const double w = joint_regressor(j, v);
      if (w != 0.0) joints[j] += w * shaped[v];
    }
  }
  return joints;
}

PosedBody BodyModel::pose(const BodyParams& params) const {
  const PoseDerivatives fk(*this, params);  // forward pass only is cheap at this scale
  PosedBody out;
  out.joints = fk.joints();
  out.mesh.vertices = fk.vertices();
  out.mesh.faces = faces;
  out.mesh.update_normals();
  return out;
}

// ---------------------------------------------------------------------------
// PoseDerivatives

PoseDerivatives::PoseDerivatives(const BodyModel& model, const BodyParams& params)
    : model_(&model), params_(params), layout_(model.layout()) {
  const int joints = model.joint_count();
  const int verts = model.vertex_count();
  const int shape = model.shape_dim();
  pose_params_ = 3 * joints;

  if (static_cast<int>(params.pose.size()) != joints)
    throw std::invalid_argument("pose: wrong joint count in parameters");
  for (const Vec3& aa : params.pose) {
    if (!aa.allFinite()) throw std::invalid_argument("pose: non-finite pose parameters");
  }
  if (!params.translation.allFinite() || !params.shape.allFinite())
    throw std::invalid_argument("pose: non-finite parameters");

  shaped_ = model.shaped_vertices(params.shape);
  rest_joints_ = model.rest_joints(params.shape);

  rest_joint_shape_grad_.assign(shape, Eigen::Matrix3Xd::Zero(3, joints));
  for (int s = 0; s < shape; ++s) {
    for (int j = 0; j < joints; ++j) {
      Vec3 g = Vec3::Zero();
      for (int v = 0; v < verts; ++v) {
        const double w = model.joint_regressor(j, v);
        if (w != 0.0) g += w * model.shape_dirs[s].col(v);
      }
      rest_joint_shape_grad_[s].col(j) = g;
    }
  }

  // Forward kinematics. Local transform of joint i is a rotation about its
  // rest position offset from the parent.
  std::vector<Mat3> local_rot(joints);
  std::vector<std::array<Mat3, 3>> local_rot_jac(joints);
  std::vector<Vec3> local_off(joints);
  for (int i = 0; i < joints; ++i) {
    local_rot[i] = so3_exp(params.pose[i]);
    local_rot_jac[i] = so3_exp_jacobian(params.pose[i]);
    local_off[i] = i == 0 ? rest_joints_[0] : Vec3(rest_joints_[i] - rest_joints_[model.parents[i]]);
  }

  world_rot_.resize(joints);
  world_pos_.resize(joints);
  for (int i = 0; i < joints; ++i) {
    if (i == 0) {
      world_rot_[0] = local_rot[0];
      world_pos_[0] = local_off[0];
    } else {
      const int p = model.parents[i];
      world_rot_[i] = world_rot_[p] * local_rot[i];
      world_pos_[i] = world_rot_[p] * local_off[i] + world_pos_[p];
    }
  }

  // Pose-parameter derivatives of every joint frame, propagated down the tree.
  d_world_rot_.assign(static_cast<std::size_t>(pose_params_) * joints, Mat3::Zero());
  d_world_pos_pose_.assign(static_cast<std::size_t>(pose_params_) * joints, Vec3::Zero());
  for (int k = 0; k < joints; ++k) {
    for (int a = 0; a < 3; ++a) {
      const int p_idx = 3 * k + a;
      Mat3* drot = &d_world_rot_[static_cast<std::size_t>(p_idx) * joints];
      Vec3* dpos = &d_world_pos_pose_[static_cast<std::size_t>(p_idx) * joints];
      for (int i = k; i < joints; ++i) {  // ancestors of k are unaffected
        const Mat3 d_local = (i == k) ? local_rot_jac[k][a] : Mat3::Zero();
        if (i == 0) {
          drot[0] = d_local;
          dpos[0] = Vec3::Zero();
        } else {
          const int p = model.parents[i];
          drot[i] = drot[p] * local_rot[i] + world_rot_[p] * d_local;
          dpos[i] = drot[p] * local_off[i] + dpos[p];
        }
      }
    }
  }

  // Shape derivatives move rest joints, hence the translation chain only.
  d_world_pos_shape_.assign(static_cast<std::size_t>(shape) * joints, Vec3::Zero());
  for (int s = 0; s < shape; ++s) {
    Vec3* dpos = &d_world_pos_shape_[static_cast<std::size_t>(s) * joints];
    for (int i = 0; i < joints; ++i) {
      const Vec3 d_off = i == 0 ? Vec3(rest_joint_shape_grad_[s].col(0))
                                : Vec3(rest_joint_shape_grad_[s].col(i) -
                                       rest_joint_shape_grad_[s].col(model.parents[i]));
      if (i == 0) {
        dpos[0] = d_off;
      } else {
        const int p = model.parents[i];
        dpos[i] = world_rot_[p] * d_off + dpos[p];
      }
    }
  }

  joints_.resize(joints);
  for (int i = 0; i < joints; ++i) joints_[i] = world_pos_[i] + params.translation;

  vertex_bones_.resize(verts);
  for (int v = 0; v < verts; ++v) {
    for (int j = 0; j < joints; ++j) {
      const double w = model.skin_weights(v, j);
      if (w > 1e-12) vertex_bones_[v].emplace_back(j, w);
    }
  }

  vertices_.resize(verts);
  for (int v = 0; v < verts; ++v) {
    Vec3 x = Vec3::Zero();
    for (const auto& [j, w] : vertex_bones_[v]) {
      // Skinning transform maps rest-space points rotated about rest joint j.
      x += w * (world_rot_[j] * (shaped_[v] - rest_joints_[j]) + world_pos_[j]);
    }
    vertices_[v] = x + params.translation;
  }
}

Eigen::Matrix3Xd PoseDerivatives::joint_jacobian(int joint) const {
  const int joints = model_->joint_count();
  Eigen::Matrix3Xd jac = Eigen::Matrix3Xd::Zero(3, layout_.size());
  for (int p = 0; p < pose_params_; ++p)
    jac.col(p) = d_world_pos_pose_[static_cast<std::size_t>(p) * joints + joint];
  jac.block<3, 3>(0, layout_.translation_offset()) = Mat3::Identity();
  for (int s = 0; s < layout_.shape_dims; ++s)
    jac.col(layout_.shape_offset() + s) =
        d_world_pos_shape_[static_cast<std::size_t>(s) * joints + joint];
  return jac;
}

Eigen::Matrix3Xd PoseDerivatives::vertex_jacobian(int vertex) const {
  const int joints = model_->joint_count();
  Eigen::Matrix3Xd jac = Eigen::Matrix3Xd::Zero(3, layout_.size());
  const Vec3& shaped = shaped_[vertex];
  for (const auto& [j, w] : vertex_bones_[vertex]) {
    const Vec3 local = shaped - rest_joints_[j];
    for (int p = 0; p < pose_params_; ++p) {
      const std::size_t idx = static_cast<std::size_t>(p) * joints + j;
      jac.col(p) += w * (d_world_rot_[idx] * local + d_world_pos_pose_[idx]);
    }
    for (int s = 0; s < layout_.shape_dims; ++s) {
      const std::size_t idx = static_cast<std::size_t>(s) * joints + j;
      const Vec3 d_local = Vec3(model_->shape_dirs[s].col(vertex)) -
                           Vec3(rest_joint_shape_grad_[s].col(j));
      jac.col(layout_.shape_offset() + s) +=
          w * (world_rot_[j] * d_local + d_world_pos_shape_[idx]);
    }
  }
  jac.block<3, 3>(0, layout_.translation_offset()) = Mat3::Identity();
  return jac;
}

// ---------------------------------------------------------------------------
// Serialization

namespace {

constexpr int kFormatVersion = 1;

class SidecarWriter {
 public:
  explicit SidecarWriter(const std::filesystem::path& path)
      : out_(path, std::ios::binary), path_(path) {
    if (!out_) throw std::runtime_error(path.string() + ": cannot open for writing");
  }

  json write(const std::vector<double>& values) {
    const std::uint64_t offset = static_cast<std::uint64_t>(out_.tellp());
    out_.write(reinterpret_cast<const char*>(values.data()),
               static_cast<std::streamsize>(values.size() * sizeof(double)));
    if (!out_) throw std::runtime_error(path_.string() + ": write failed");
    return json{{"offset", offset}, {"count", values.size()}};
  }

 private:
  std::ofstream out_;
  std::filesystem::path path_;
};

class SidecarReader {
 public:
  explicit SidecarReader(const std::filesystem::path& path) : in_(path, std::ios::binary) {
    if (!in_) throw std::runtime_error(path.string() + ": cannot open sidecar payload");
  }

  std::vector<double> read(const json& ref) {
    const auto offset = ref.at("offset").get<std::uint64_t>();
    const auto count = ref.at("count").get<std::size_t>();
    std::vector<double> values(count);
    in_.seekg(static_cast<std::streamoff>(offset));
    in_.read(reinterpret_cast<char*>(values.data()),
             static_cast<std::streamsize>(count * sizeof(double)));
    if (!in_) throw std::runtime_error("sidecar payload truncated");
    return values;
  }

 private:
  std::ifstream in_;
};

json encode_array(const std::vector<double>& values, SidecarWriter* sidecar) {
  if (sidecar) return sidecar->write(values);
  return json(values);
}

std::vector<double> decode_array(const json& node, SidecarReader* sidecar) {
  if (node.is_object()) {
    if (!sidecar) throw std::runtime_error("body model: sidecar reference without payload");
    return sidecar->read(node);
  }
  return node.get<std::vector<double>>();
}

std::vector<double> matrix_to_flat(const Eigen::MatrixXd& m) {
  std::vector<double> flat(static_cast<std::size_t>(m.size()));
  Eigen::Map<Eigen::MatrixXd>(flat.data(), m.rows(), m.cols()) = m;
  return flat;
}

Eigen::MatrixXd flat_to_matrix(const std::vector<double>& flat, int rows, int cols) {
  if (static_cast<int>(flat.size()) != rows * cols)
    throw std::runtime_error("body model: array length mismatch");
  return Eigen::Map<const Eigen::MatrixXd>(flat.data(), rows, cols);
}

}  // namespace

void save_body_model(const BodyModel& model, const std::filesystem::path& path,
                     const std::string& storage) {
  model.validate();
  if (storage != "inline" && storage != "sidecar")
    throw std::invalid_argument("save_body_model: storage must be inline or sidecar");

  std::unique_ptr<SidecarWriter> sidecar;
  const std::filesystem::path bin_path = path.string() + ".bin";
  if (storage == "sidecar") sidecar = std::make_unique<SidecarWriter>(bin_path);

  json doc;
  doc["format"] = "scenefit-body-model";
  doc["version"] = kFormatVersion;
  doc["storage"] = storage;
  if (storage == "sidecar") doc["payload"] = bin_path.filename().string();
  doc["counts"] = {{"vertices", model.vertex_count()},
                   {"joints", model.joint_count()},
                   {"shape_dims", model.shape_dim()}};
  doc["joint_names"] = model.joint_names;
  doc["parents"] = model.parents;

  std::vector<double> verts;
  verts.reserve(model.template_vertices.size() * 3);
  for (const Vec3& v : model.template_vertices)
    verts.insert(verts.end(), {v[0], v[1], v[2]});
  doc["template_vertices"] = encode_array(verts, sidecar.get());

  std::vector<int> face_flat;
  face_flat.reserve(model.faces.size() * 3);
  for (const Face& f : model.faces) face_flat.insert(face_flat.end(), {f[0], f[1], f[2]});
  doc["faces"] = face_flat;

  doc["joint_regressor"] = encode_array(matrix_to_flat(model.joint_regressor), sidecar.get());
  doc["skin_weights"] = encode_array(matrix_to_flat(model.skin_weights), sidecar.get());
  json dirs = json::array();
  for (const auto& d : model.shape_dirs) dirs.push_back(encode_array(matrix_to_flat(d), sidecar.get()));
  doc["shape_dirs"] = dirs;

  std::ofstream out(path);
  if (!out) throw std::runtime_error(path.string() + ": cannot open for writing");
  out << doc.dump(2) << '\n';
  if (!out) throw std::runtime_error(path.string() + ": write failed");
}

BodyModel load_body_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error(path.string() + ": cannot open");
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw std::runtime_error(path.string() + ": " + e.what());
  }
  if (doc.value("format", "") != "scenefit-body-model")
    throw std::runtime_error(path.string() + ": not a body model file");
  if (doc.value("version", 0) != kFormatVersion)
    throw std::runtime_error(path.string() + ": unsupported version");

  std::unique_ptr<SidecarReader> sidecar;
  if (doc.value("storage", "inline") == "sidecar") {
    const auto payload = path.parent_path() / doc.at("payload").get<std::string>();
    sidecar = std::make_unique<SidecarReader>(payload);
  }

  BodyModel model;
  const int verts = doc.at("counts").at("vertices").get<int>();
  const int joints = doc.at("counts").at("joints").get<int>();
  const int shape = doc.at("counts").at("shape_dims").get<int>();

  model.joint_names = doc.at("joint_names").get<std::vector<std::string>>();
  model.parents = doc.at("parents").get<std::vector<int>>();

  const std::vector<double> vert_flat = decode_array(doc.at("template_vertices"), sidecar.get());
  if (static_cast<int>(vert_flat.size()) != 3 * verts)
    throw std::runtime_error(path.string() + ": template vertex array length mismatch");
  model.template_vertices.resize(verts);
  for (int v = 0; v < verts; ++v)
    model.template_vertices[v] = Vec3(vert_flat[3 * v], vert_flat[3 * v + 1], vert_flat[3 * v + 2]);

  const auto face_flat = doc.at("faces").get<std::vector<int>>();
  if (face_flat.size() % 3 != 0) throw std::runtime_error(path.string() + ": bad face array");
  model.faces.resize(face_flat.size() / 3);
  for (std::size_t f = 0; f < model.faces.size(); ++f)
    model.faces[f] = Face(face_flat[3 * f], face_flat[3 * f + 1], face_flat[3 * f + 2]);

  model.joint_regressor =
      flat_to_matrix(decode_array(doc.at("joint_regressor"), sidecar.get()), joints, verts);
  model.skin_weights =
      flat_to_matrix(decode_array(doc.at("skin_weights"), sidecar.get()), verts, joints);
  for (const json& d : doc.at("shape_dirs"))
    model.shape_dirs.push_back(flat_to_matrix(decode_array(d, sidecar.get()), 3, verts));
  if (model.shape_dim() != shape)
    throw std::runtime_error(path.string() + ": shape basis count mismatch");

  model.validate();
  return model;
}

}  // namespace scenefit
