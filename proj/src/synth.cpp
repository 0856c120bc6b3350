#include "scenefit/synth.hpp"

#include "scenefit/formats.hpp"
#include "scenefit/mesh_io.hpp"
#include "scenefit/rotation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <random>
#include <stdexcept>

namespace scenefit {

namespace {

// ---------------------------------------------------------------------------
// Test body

struct CapsuleSpec {
  Vec3 p0, p1;
  double radius;
  int owner;            // joint the capsule is rigidly bound to
  int blend_joint = -1; // vertices near p1 share weight with this joint
};

void append_capsule(const CapsuleSpec& spec, TriMesh& mesh, std::vector<int>& owner,
                    std::vector<int>& blend, int n_around = 7, int n_seg = 2,
                    int n_cap = 2) {
  const int base = mesh.vertex_count();
  const double length = (spec.p1 - spec.p0).norm();
  Vec3 w = length > 1e-12 ? Vec3((spec.p1 - spec.p0) / length) : Vec3(0, -1, 0);
  Vec3 u = std::abs(w[0]) < 0.9 ? Vec3(1, 0, 0) : Vec3(0, 0, 1);
  u = (u - u.dot(w) * w).normalized();
  const Vec3 v = w.cross(u);

  // Rings along the axis: bottom cap, cylinder, top cap; poles at the ends.
  std::vector<std::pair<double, double>> rings;  // (offset along w, radius)
  for (int i = 1; i <= n_cap; ++i) {
    const double phi = -M_PI / 2 + i * (M_PI / 2) / n_cap;
    rings.emplace_back(spec.radius * std::sin(phi), spec.radius * std::cos(phi));
  }
  for (int s = 1; s <= n_seg; ++s) rings.emplace_back(length * s / n_seg, spec.radius);
  for (int i = 1; i < n_cap; ++i) {
    const double phi = i * (M_PI / 2) / n_cap;
    rings.emplace_back(length + spec.radius * std::sin(phi), spec.radius * std::cos(phi));
  }

  auto push = [&](const Vec3& p) {
    mesh.vertices.push_back(p);
    owner.push_back(spec.owner);
    const double toward_end = (p - spec.p1).norm();
    blend.push_back(spec.blend_joint >= 0 && toward_end < 0.09 ? spec.blend_joint : -1);
  };

  push(spec.p0 - spec.radius * w);  // bottom pole
  for (const auto& [offset, radius] : rings) {
    const Vec3 center = spec.p0 + offset * w;
    for (int j = 0; j < n_around; ++j) {
      const double psi = 2.0 * M_PI * j / n_around;
      push(center + radius * (std::cos(psi) * u + std::sin(psi) * v));
    }
  }
  push(spec.p1 + spec.radius * w);  // top pole

  const int ring_count = static_cast<int>(rings.size());
  const int bottom_pole = base;
  const int top_pole = base + 1 + ring_count * n_around;
  auto ring_vertex = [&](int ring, int j) { return base + 1 + ring * n_around + j % n_around; };

  for (int j = 0; j < n_around; ++j)
    mesh.faces.push_back(Face(bottom_pole, ring_vertex(0, j + 1), ring_vertex(0, j)));
  for (int ring = 0; ring + 1 < ring_count; ++ring) {
    for (int j = 0; j < n_around; ++j) {
      const int a = ring_vertex(ring, j);
      const int b = ring_vertex(ring, j + 1);
      const int c = ring_vertex(ring + 1, j + 1);
      const int d = ring_vertex(ring + 1, j);
      mesh.faces.push_back(Face(a, b, c));
      mesh.faces.push_back(Face(a, c, d));
    }
  }
  for (int j = 0; j < n_around; ++j)
    mesh.faces.push_back(Face(top_pole, ring_vertex(ring_count - 1, j),
                              ring_vertex(ring_count - 1, j + 1)));
}

}  // namespace

BodyModel make_test_body() {
  // Joint layout, camera convention: +y down, subject facing -z.
  const std::vector<std::string> names = {"pelvis", "spine",  "neck",   "head",
                                          "l_shoulder", "r_shoulder", "l_hip", "l_knee",
                                          "l_ankle", "r_hip", "r_knee", "r_ankle"};
  const std::vector<int> parents = {-1, 0, 1, 2, 1, 1, 0, 6, 7, 0, 9, 10};
  const std::vector<Vec3> joints = {
      {0.00, 0.00, 0.00},   // pelvis
      {0.00, -0.25, 0.00},  // spine
      {0.00, -0.50, 0.00},  // neck
      {0.00, -0.64, 0.00},  // head
      {0.20, -0.45, 0.00},  // l_shoulder
      {-0.20, -0.45, 0.00}, // r_shoulder
      {0.10, 0.05, 0.00},   // l_hip
      {0.10, 0.50, 0.00},   // l_knee
      {0.10, 0.90, 0.00},   // l_ankle
      {-0.10, 0.05, 0.00},  // r_hip
      {-0.10, 0.50, 0.00},  // r_knee
      {-0.10, 0.90, 0.00},  // r_ankle
  };
  const int J = static_cast<int>(names.size());

  TriMesh shell;
  std::vector<int> owner, blend;
  auto add = [&](Vec3 p0, Vec3 p1, double r, const char* o, const char* b,
                 int dense = 0) {
    const auto idx_of = [&](const char* n) {
      return static_cast<int>(std::find(names.begin(), names.end(), n) - names.begin());
    };
    CapsuleSpec spec;
    spec.p0 = p0;
    spec.p1 = p1;
    spec.radius = r;
    spec.owner = idx_of(o);
    spec.blend_joint = b ? idx_of(b) : -1;
    // Contact-bearing parts get a finer tessellation: contact reasoning and
    // control selection need dense vertices near the support surfaces.
    // Feet densify all around; torso/thighs only along the axis, where the
    // seated contact strips run.
    if (dense == 1) append_capsule(spec, shell, owner, blend, 9, 2, 3);
    else if (dense == 3) append_capsule(spec, shell, owner, blend, 6, 1, 2);
    else if (dense == 2) append_capsule(spec, shell, owner, blend, 7, 9, 2);
    else append_capsule(spec, shell, owner, blend);
  };

  add(joints[0], joints[1], 0.13, "pelvis", "spine", 2);                    // lower torso
  add(joints[1], joints[2], 0.12, "spine", "neck");                         // upper torso
  add(joints[2], joints[3], 0.05, "neck", "head");                          // neck
  add(joints[3], joints[3] + Vec3(0, -0.05, 0), 0.09, "head", nullptr);     // head
  add(joints[4], joints[4] + Vec3(0.34, 0.04, 0), 0.045, "l_shoulder", nullptr, 3);
  add(joints[5], joints[5] + Vec3(-0.34, 0.04, 0), 0.045, "r_shoulder", nullptr, 3);
  add(joints[6], joints[7], 0.075, "l_hip", "l_knee", 2);                   // l thigh
  add(joints[7], joints[8], 0.055, "l_knee", "l_ankle");                    // l shin
  add(joints[8] + Vec3(0, 0.045, 0.02), joints[8] + Vec3(0, 0.055, -0.14), 0.045,
      "l_ankle", nullptr, 1);                                               // l foot
  add(joints[9], joints[10], 0.075, "r_hip", "r_knee", 2);
  add(joints[10], joints[11], 0.055, "r_knee", "r_ankle");
  add(joints[11] + Vec3(0, 0.045, 0.02), joints[11] + Vec3(0, 0.055, -0.14), 0.045,
      "r_ankle", nullptr, 1);

  BodyModel model;
  model.template_vertices = shell.vertices;
  model.faces = shell.faces;
  model.parents = parents;
  model.joint_names = names;
  const int V = model.vertex_count();

  model.skin_weights = Eigen::MatrixXd::Zero(V, J);
  for (int v = 0; v < V; ++v) {
    if (blend[v] >= 0) {
      model.skin_weights(v, owner[v]) = 0.6;
      model.skin_weights(v, blend[v]) = 0.4;
    } else {
      model.skin_weights(v, owner[v]) = 1.0;
    }
  }

  // Joint regressor: uniform average of the 6 nearest template vertices.
  model.joint_regressor = Eigen::MatrixXd::Zero(J, V);
  for (int j = 0; j < J; ++j) {
    std::vector<std::pair<double, int>> by_distance;
    for (int v = 0; v < V; ++v)
      by_distance.emplace_back((model.template_vertices[v] - joints[j]).norm(), v);
    std::sort(by_distance.begin(), by_distance.end());
    for (int k = 0; k < 6; ++k) model.joint_regressor(j, by_distance[k].second) = 1.0 / 6.0;
  }

  // Shape basis: height, width, girth, then small smooth harmonics.
  const int S = 10;
  model.shape_dirs.assign(S, Eigen::Matrix3Xd::Zero(3, V));
  for (int v = 0; v < V; ++v) {
    const Vec3& p = model.template_vertices[v];
    model.shape_dirs[0].col(v) = Vec3(0, 0.06 * p[1], 0);
    model.shape_dirs[1].col(v) = Vec3(0.08 * p[0], 0, 0.08 * p[2]);
    const double belly = std::exp(-std::pow((p[1] + 0.15) / 0.18, 2));
    model.shape_dirs[2].col(v) = Vec3(0.05 * belly * p[0], 0, 0.05 * belly * (p[2] - 0.02));
    for (int s = 3; s < S; ++s) {
      const double phase = 1.7 * s;
      const double wave = 0.015 * std::sin((s - 1) * p[1] * 2.1 + phase);
      model.shape_dirs[s].col(v) = Vec3(wave * p[0], 0.01 * std::cos(s + 3.0 * p[1]),
                                        wave * p[2]);
    }
  }

  model.validate();
  return model;
}

// ---------------------------------------------------------------------------
// Scenario construction

namespace {

constexpr int kImageW = 640, kImageH = 480;
constexpr double kFocal = 500.0;
constexpr double kContactDistance = 0.02;  // meters; contact-label threshold
constexpr int kSplatRadius = 8;            // pixels; subject mask dilation

// Classes shared by all scenarios.
const std::vector<std::string> kClassNames = {"floor", "wall", "sofa", "bed", "panel"};
constexpr int kFloor = 0, kWall = 1, kSofa = 2, kBed = 3, kPanel = 4;

/// World frame: y up, floor at y=0, camera at (0, height, 0) looking along
/// -z with a downward pitch. Camera frame: +x right, +y down, +z forward.
struct WorldCamera {
  double height = 2.2;
  double pitch = 0.35;  // radians, downward

  Mat3 rotation() const {
    const double c = std::cos(pitch), s = std::sin(pitch);
    Mat3 r;
    r.row(0) = Vec3(1, 0, 0);
    r.row(1) = Vec3(0, -c, s);
    r.row(2) = Vec3(0, -s, -c);
    return r;
  }
  Vec3 to_camera(const Vec3& p_world) const {
    return rotation() * (p_world - Vec3(0, height, 0));
  }
  Vec3 to_world(const Vec3& p_camera) const {
    return rotation().transpose() * p_camera + Vec3(0, height, 0);
  }
  /// Root orientation mapping the (+y down, facing -z) body template to an
  /// upright subject facing the camera.
  Vec3 root_pose() const {
    Mat3 flip = Mat3::Identity();
    flip(1, 1) = -1;
    flip(2, 2) = -1;
    return so3_log(rotation() * flip);
  }
};

struct ScenePiece {
  TriMesh mesh;  // world frame
  int label = 0;
};

ScenePiece grid_xz(double x0, double x1, double z0, double z1, double y, double spacing,
                   int label) {
  ScenePiece piece;
  piece.label = label;
  const int nx = std::max(2, static_cast<int>(std::round((x1 - x0) / spacing)) + 1);
  const int nz = std::max(2, static_cast<int>(std::round((z1 - z0) / spacing)) + 1);
  for (int i = 0; i < nx; ++i) {
    for (int j = 0; j < nz; ++j) {
      piece.mesh.vertices.emplace_back(x0 + (x1 - x0) * i / (nx - 1), y,
                                       z0 + (z1 - z0) * j / (nz - 1));
    }
  }
  auto at = [&](int i, int j) { return i * nz + j; };
  for (int i = 0; i + 1 < nx; ++i) {
    for (int j = 0; j + 1 < nz; ++j) {
      // wound so normals face +y (up)
      piece.mesh.faces.push_back(Face(at(i, j), at(i + 1, j + 1), at(i + 1, j)));
      piece.mesh.faces.push_back(Face(at(i, j), at(i, j + 1), at(i + 1, j + 1)));
    }
  }
  return piece;
}

/// Rigid skirt faces boxing in a horizontal pad between y0 (bottom) and its
/// top edge: four outward-facing strips so nothing reads the pad rim as a
/// free-floating open edge.
ScenePiece pad_skirt(double x0, double x1, double z0, double z1, double y_top,
                     double depth, double spacing, int label);

ScenePiece grid_xy(double x0, double x1, double y0, double y1, double z, double spacing,
                   int label) {
  // Thin two-faced slab: scanned occluders are closed surfaces, and the
  // normal-based collision test needs a back face for anything behind them.
  ScenePiece piece;
  piece.label = label;
  const int nx = std::max(2, static_cast<int>(std::round((x1 - x0) / spacing)) + 1);
  const int ny = std::max(2, static_cast<int>(std::round((y1 - y0) / spacing)) + 1);
  for (const double face_z : {z, z - 0.02}) {
    const int base = piece.mesh.vertex_count();
    for (int i = 0; i < nx; ++i) {
      for (int j = 0; j < ny; ++j) {
        piece.mesh.vertices.emplace_back(x0 + (x1 - x0) * i / (nx - 1),
                                         y0 + (y1 - y0) * j / (ny - 1), face_z);
      }
    }
    auto at = [&](int i, int j) { return base + i * ny + j; };
    const bool front = face_z == z;
    for (int i = 0; i + 1 < nx; ++i) {
      for (int j = 0; j + 1 < ny; ++j) {
        if (front) {  // normals toward the camera at the origin (+z)
          piece.mesh.faces.push_back(Face(at(i, j), at(i + 1, j), at(i + 1, j + 1)));
          piece.mesh.faces.push_back(Face(at(i, j), at(i + 1, j + 1), at(i, j + 1)));
        } else {  // back face, normals away
          piece.mesh.faces.push_back(Face(at(i, j), at(i + 1, j + 1), at(i + 1, j)));
          piece.mesh.faces.push_back(Face(at(i, j), at(i, j + 1), at(i + 1, j + 1)));
        }
      }
    }
  }
  return piece;
}

ScenePiece pad_skirt(double x0, double x1, double z0, double z1, double y_top,
                     double depth, double spacing, int label) {
  ScenePiece piece;
  piece.label = label;
  auto strip = [&](Vec3 a, Vec3 b, const Vec3& outward) {
    // quad strip from edge a-b down by `depth`, normals along `outward`
    const int n = std::max(2, static_cast<int>(std::round((b - a).norm() / spacing)) + 1);
    const int base = piece.mesh.vertex_count();
    for (int i = 0; i < n; ++i) {
      const Vec3 top = a + (b - a) * (double(i) / (n - 1));
      piece.mesh.vertices.push_back(top);
      piece.mesh.vertices.push_back(top - Vec3(0, depth, 0));
    }
    for (int i = 0; i + 1 < n; ++i) {
      const int t0 = base + 2 * i, b0 = t0 + 1, t1 = t0 + 2, b1 = t0 + 3;
      // wind so the normal points along `outward`
      const Vec3 edge1 = piece.mesh.vertices[t1] - piece.mesh.vertices[t0];
      const Vec3 edge2 = piece.mesh.vertices[b0] - piece.mesh.vertices[t0];
      if (edge1.cross(edge2).dot(outward) > 0) {
        piece.mesh.faces.push_back(Face(t0, t1, b0));
        piece.mesh.faces.push_back(Face(t1, b1, b0));
      } else {
        piece.mesh.faces.push_back(Face(t0, b0, t1));
        piece.mesh.faces.push_back(Face(t1, b0, b1));
      }
    }
  };
  strip(Vec3(x0, y_top, z0), Vec3(x1, y_top, z0), Vec3(0, 0, -1));
  strip(Vec3(x0, y_top, z1), Vec3(x1, y_top, z1), Vec3(0, 0, 1));
  strip(Vec3(x0, y_top, z0), Vec3(x0, y_top, z1), Vec3(-1, 0, 0));
  strip(Vec3(x1, y_top, z0), Vec3(x1, y_top, z1), Vec3(1, 0, 0));
  return piece;
}

void merge_pieces(const std::vector<ScenePiece>& pieces, TriMesh& mesh,
                  std::vector<int>& labels) {
  for (const ScenePiece& piece : pieces) {
    const int base = mesh.vertex_count();
    for (const Vec3& v : piece.mesh.vertices) mesh.vertices.push_back(v);
    for (const Face& f : piece.mesh.faces)
      mesh.faces.push_back(Face(f[0] + base, f[1] + base, f[2] + base));
    labels.insert(labels.end(), piece.mesh.vertices.size(), piece.label);
  }
}

/// Ground-truth deformation field: each deformable vertex drops to the
/// underside of the posed body in its vertical column (the penetration
/// print), then a short constrained relaxation grows a smooth rim the way
/// fabric bridges around a load. Purely geometric; independent of the
/// deformation solver under test.
std::vector<double> body_print(const TriMesh& rest_world, const std::vector<int>& labels,
                               const TriMesh& body_world) {
  std::vector<double> drop(rest_world.vertex_count(), 0.0);
  const Bvh body_bvh(body_world);
  for (int v = 0; v < rest_world.vertex_count(); ++v) {
    if (labels[v] != kSofa && labels[v] != kBed) continue;
    const Vec3& p = rest_world.vertices[v];
    const Vec3 origin(p[0], p[1] + 2.0, p[2]);
    double lowest = std::numeric_limits<double>::infinity();
    for (const RayHit& hit : body_bvh.raycast_all(origin, Vec3(0, -1, 0)))
      lowest = std::min(lowest, hit.point[1]);
    if (std::isfinite(lowest) && lowest < p[1]) drop[v] = p[1] - lowest;
  }
  // Rim relaxation: neighbors sag toward the print with a fixed per-ring falloff.
  const auto adjacency = vertex_adjacency(rest_world);
  constexpr double kRimFalloff = 0.005;
  for (int pass = 0; pass < 6; ++pass) {
    std::vector<double> next = drop;
    for (int v = 0; v < rest_world.vertex_count(); ++v) {
      if (labels[v] != kSofa && labels[v] != kBed) continue;
      double best = 0;
      for (int nb : adjacency[v]) best = std::max(best, drop[nb] - kRimFalloff);
      next[v] = std::max(drop[v], best);
    }
    drop.swap(next);
  }
  return drop;
}

TriMesh apply_drop(const TriMesh& rest_world, const std::vector<double>& drop) {
  TriMesh out = rest_world;
  for (int v = 0; v < out.vertex_count(); ++v) out.vertices[v][1] -= drop[v];
  return out;
}

struct GtFrame {
  BodyParams params;  // camera frame
};

struct ScenarioPlan {
  WorldCamera world;
  std::vector<ScenePiece> pieces;
  std::vector<GtFrame> frames;
  std::vector<std::string> deformable = {"sofa", "bed"};
  // Per-joint keypoint confidence; joints a detector scores poorly when the
  // furniture hides them carry less reprojection weight.
  std::map<std::string, double> confidence;
};

/// Shifts the translation so the lowest body vertex over the given world
/// region sits at `target_height` above (negative: below) the plane y = plane_y.
void snap_to_height(const BodyModel& model, BodyParams& params, const WorldCamera& world,
                    double plane_y, double target_height, double x0, double x1, double z0,
                    double z1) {
  const PosedBody posed = model.pose(params);
  double min_height = std::numeric_limits<double>::infinity();
  for (const Vec3& p_cam : posed.mesh.vertices) {
    const Vec3 p = world.to_world(p_cam);
    if (p[0] < x0 || p[0] > x1 || p[2] < z0 || p[2] > z1) continue;
    min_height = std::min(min_height, p[1] - plane_y);
  }
  if (!std::isfinite(min_height))
    throw std::runtime_error("synth: body does not overlap the snap region");
  // Shift along world-up, expressed in the camera frame.
  const Vec3 up_cam = world.rotation() * Vec3(0, 1, 0);
  params.translation += (target_height - min_height) * up_cam;
}

BodyParams base_pose(const BodyModel& model, const WorldCamera& world,
                     const Vec3& pelvis_world) {
  BodyParams params = model.neutral_params();
  params.pose[0] = world.root_pose();
  const std::vector<Vec3> rest = model.rest_joints(params.shape);
  params.translation = world.to_camera(pelvis_world) - rest[0];
  return params;
}

int joint_index(const BodyModel& model, const char* name) {
  const auto it = std::find(model.joint_names.begin(), model.joint_names.end(), name);
  return static_cast<int>(it - model.joint_names.begin());
}

// Sitting pose: hips flexed forward, knees folded down, arms slightly out.
// The seat is low relative to the shins, so the knees ride slightly high
// and the weight concentrates under the pelvis.
void apply_sit_pose(const BodyModel& model, BodyParams& params) {
  params.pose[joint_index(model, "l_hip")] = Vec3(-M_PI / 2, 0, 0);
  params.pose[joint_index(model, "r_hip")] = Vec3(-M_PI / 2, 0, 0);
  params.pose[joint_index(model, "l_knee")] = Vec3(M_PI / 2, 0, 0);
  params.pose[joint_index(model, "r_knee")] = Vec3(M_PI / 2, 0, 0);
  params.pose[joint_index(model, "spine")] = Vec3(-0.12, 0, 0);
  params.pose[joint_index(model, "l_shoulder")] = Vec3(0, 0, 0.25);
  params.pose[joint_index(model, "r_shoulder")] = Vec3(0, 0, -0.25);
}

ScenarioPlan plan_floor_walk(const BodyModel& model) {
  ScenarioPlan plan;
  plan.world.height = 2.2;
  plan.world.pitch = 0.35;
  plan.pieces.push_back(grid_xz(-2.0, 2.0, -4.6, -1.4, 0.0, 0.1, kFloor));

  const double step[] = {-0.22, -0.07, 0.08, 0.23};
  for (int t = 0; t < 4; ++t) {
    GtFrame frame;
    frame.params = base_pose(model, plan.world, Vec3(step[t], 0.98, -3.0));
    const double swing = 0.22 * ((t % 2 == 0) ? 1.0 : -1.0);
    frame.params.pose[joint_index(model, "l_hip")] = Vec3(swing, 0, 0);
    frame.params.pose[joint_index(model, "r_hip")] = Vec3(-swing, 0, 0);
    frame.params.pose[joint_index(model, "l_knee")] = Vec3(std::max(0.0, -swing) * 0.8, 0, 0);
    frame.params.pose[joint_index(model, "r_knee")] = Vec3(std::max(0.0, swing) * 0.8, 0, 0);
    snap_to_height(model, frame.params, plan.world, 0.0, 0.001, -2.0, 2.0, -4.6, -1.4);
    plan.frames.push_back(frame);
  }
  return plan;
}

ScenarioPlan plan_sit(const BodyModel& model, bool with_panel) {
  ScenarioPlan plan;
  plan.world.height = 2.2;
  plan.world.pitch = 0.35;

  plan.pieces.push_back(grid_xz(-2.0, 2.0, -4.6, -1.4, 0.0, 0.1, kFloor));
  const double seat_y = 0.45;
  const double cushion[4] = {-0.55, 0.55, -3.45, -2.55};  // x0 x1 z0 z1
  plan.pieces.push_back(
      grid_xz(cushion[0], cushion[1], cushion[2], cushion[3], seat_y, 0.025, kSofa));
  // The cushion overhangs its frame, so the skirt is inset from the rim.
  plan.pieces.push_back(pad_skirt(cushion[0] + 0.08, cushion[1] - 0.08, cushion[2] + 0.08,
                                  cushion[3] - 0.08, seat_y, 0.12, 0.05, kWall));
  // A table-height occluder sits between the camera and the seat, hiding
  // the contact zone; the occluded variant blocks the whole lower body.
  if (with_panel) plan.pieces.push_back(grid_xy(-0.9, 0.9, 0.02, 1.35, -1.8, 0.1, kPanel));
  else plan.pieces.push_back(grid_xy(-0.9, 0.9, 0.50, 0.92, -2.3, 0.1, kPanel));

  const int frame_count = with_panel ? 3 : 4;
  for (int t = 0; t < frame_count; ++t) {
    GtFrame frame;
    frame.params = base_pose(model, plan.world, Vec3(0, seat_y + 0.60, -3.0));
    apply_sit_pose(model, frame.params);
    snap_to_height(model, frame.params, plan.world, seat_y, -0.03, cushion[0], cushion[1],
                   cushion[2], cushion[3]);
    plan.frames.push_back(frame);
  }
  return plan;
}

ScenarioPlan plan_beanbag_fall(const BodyModel& model) {
  ScenarioPlan plan;
  plan.world.height = 2.2;
  plan.world.pitch = 0.35;
  plan.pieces.push_back(grid_xz(-2.0, 2.0, -4.6, -1.4, 0.0, 0.1, kFloor));
  const double top_y = 0.25;
  const double bag[4] = {-0.5, 0.5, -3.4, -2.6};
  plan.pieces.push_back(grid_xz(bag[0], bag[1], bag[2], bag[3], top_y, 0.025, kBed));
  plan.pieces.push_back(pad_skirt(bag[0] + 0.08, bag[1] - 0.08, bag[2] + 0.08, bag[3] - 0.08,
                                  top_y, 0.12, 0.05, kWall));

  const double height[] = {0.10, 0.04, 0.001, -0.03, -0.03};
  for (int t = 0; t < 5; ++t) {
    GtFrame frame;
    frame.params = base_pose(model, plan.world, Vec3(0, top_y + 1.1, -3.0));
    snap_to_height(model, frame.params, plan.world, top_y, height[t], bag[0], bag[1], bag[2],
                   bag[3]);
    plan.frames.push_back(frame);
  }
  return plan;
}

SubjectMask make_mask(const TriMesh& posed_body, const Bvh& gt_scene_bvh,
                      const PinholeCamera& camera) {
  SubjectMask mask;
  mask.width = camera.width;
  mask.height = camera.height;
  mask.data.assign(static_cast<std::size_t>(camera.width) * camera.height, 0);
  for (const Vec3& p : posed_body.vertices) {
    if (p[2] <= 1e-6) continue;
    const double depth = p.norm();
    const Vec3 dir = p / depth;
    const auto hit = gt_scene_bvh.raycast_first(Vec3::Zero(), dir);
    if (hit && hit->t < depth - 1e-3) continue;  // scene occludes this vertex
    const Vec2 px = camera.project(p);
    const int cx = static_cast<int>(std::lround(px[0]));
    const int cy = static_cast<int>(std::lround(px[1]));
    for (int dy = -kSplatRadius; dy <= kSplatRadius; ++dy) {
      for (int dx = -kSplatRadius; dx <= kSplatRadius; ++dx) {
        if (dx * dx + dy * dy > kSplatRadius * kSplatRadius) continue;
        const int x = cx + dx, y = cy + dy;
        if (x < 0 || x >= mask.width || y < 0 || y >= mask.height) continue;
        mask.data[static_cast<std::size_t>(y) * mask.width + x] = 255;
      }
    }
  }
  return mask;
}

RunManifest make_manifest(const std::filesystem::path& dir, std::uint64_t seed,
                          const BodyModel& model, double lambda_contact) {
  RunManifest m;
  m.seed = seed;
  m.scene_path = "scene.ply";
  m.labels_path = "labels.json";
  m.body_model_path = "body_model.json";
  m.frames_dir = "frames";
  m.output_dir = "results";
  m.camera.fx = kFocal;
  m.camera.fy = kFocal;
  m.camera.cx = kImageW / 2.0;
  m.camera.cy = kImageH / 2.0;
  m.camera.width = kImageW;
  m.camera.height = kImageH;
  m.base_dir = dir;

  // Desk-scale body: per-region contact counts are far below the full-size
  // defaults, so the scenario configs scale MinPts down while keeping eps.
  m.dbscan.eps = 0.5;
  m.dbscan.min_pts = 8;
  // Contact residuals on the small test body sit well under the full-scale
  // default kernel width; the scenario configs use a matching scale.
  m.stage.sigma_contact_m = 0.02;
  if (lambda_contact >= 1e4) m.stage.sigma_contact_m = 0.01;
  m.stage.lambda_obs = lambda_contact;
  m.stage.lambda_un = lambda_contact;
  // The penetration term registers to nearest vertices, so on coarse grids
  // it carries lateral quantization; it stays a mild pusher.
  m.stage.lambda_pen = 0.1 * lambda_contact;

  m.class_names = kClassNames;
  m.deformable_class_names = {"sofa", "bed"};
  // Sofa cushions rebound when load moves; beanbags (labeled "bed") retain
  // their dent, so only the sofa class resets between frames.
  m.elastic_class_names = {"sofa"};

  for (const std::string& name : model.joint_names) m.joint_map[name] = name;
  m.bending = {{"l_knee", "-x"}, {"r_knee", "-x"}};
  return m;
}

}  // namespace

Scenario generate_scenario(const std::string& id, std::uint64_t seed,
                           const std::filesystem::path& out_dir, double keypoint_noise_px) {
  namespace fs = std::filesystem;

  Scenario scenario;
  scenario.id = id;
  scenario.dir = out_dir;
  scenario.model = make_test_body();

  ScenarioPlan plan;
  if (id == "floor_walk") plan = plan_floor_walk(scenario.model);
  else if (id == "sofa_sit") plan = plan_sit(scenario.model, false);
  else if (id == "occluded_sit") plan = plan_sit(scenario.model, true);
  else if (id == "beanbag_fall") plan = plan_beanbag_fall(scenario.model);
  else throw std::invalid_argument("unknown scenario id '" + id + "'");

  // Assemble the rest scene in world coordinates, then move to camera frame.
  TriMesh scene_world;
  merge_pieces(plan.pieces, scene_world, scenario.labels);
  auto to_camera_mesh = [&](const TriMesh& world_mesh) {
    TriMesh cam = world_mesh;
    for (Vec3& v : cam.vertices) v = plan.world.to_camera(v);
    cam.update_normals();
    return cam;
  };
  scenario.scene = to_camera_mesh(scene_world);

  // Ground-support scenes balance the contact pull against the keypoint
  // term tightly; furniture scenes lean on contacts to expose penetrations.
  double lambda_contact = 6e4;            // strong registration for seated scenes
  if (id == "floor_walk") lambda_contact = 1e3;
  if (id == "beanbag_fall") lambda_contact = 1e3;
  scenario.manifest = make_manifest(out_dir, seed, scenario.model, lambda_contact);
  const PinholeCamera& camera = scenario.manifest.camera;
  const Bvh rest_bvh(scenario.scene);

  // Ground-truth sequence and perception inputs.
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, 1.0);
  std::vector<double> persistent_drop;
  for (std::size_t t = 0; t < plan.frames.size(); ++t) {
    const GtFrame& gt = plan.frames[t];
    scenario.gt_params.push_back(gt.params);

    const PosedBody posed = scenario.model.pose(gt.params);
    TriMesh body_world = posed.mesh;
    for (Vec3& v : body_world.vertices) v = plan.world.to_world(v);
    body_world.update_normals();

    const std::vector<double> print = body_print(scene_world, scenario.labels, body_world);
    if (persistent_drop.empty()) persistent_drop.assign(print.size(), 0.0);
    for (std::size_t v = 0; v < print.size(); ++v) {
      // Beanbags keep their deformed shape; elastic furniture follows the load.
      if (id == "beanbag_fall") persistent_drop[v] = std::max(persistent_drop[v], print[v]);
      else persistent_drop[v] = print[v];
    }
    const TriMesh gt_world = apply_drop(scene_world, persistent_drop);
    scenario.gt_meshes.push_back(to_camera_mesh(gt_world));
    const TriMesh& gt_scene = scenario.gt_meshes.back();

    FrameInput frame;
    frame.index = static_cast<int>(t);

    frame.keypoints.names = scenario.model.joint_names;
    for (std::size_t j = 0; j < posed.joints.size(); ++j) {
      Vec2 px = camera.project(posed.joints[j]);
      if (keypoint_noise_px > 0)
        px += keypoint_noise_px * Vec2(noise(rng), noise(rng));
      frame.keypoints.pixels.push_back(px);
      const auto conf = plan.confidence.find(scenario.model.joint_names[j]);
      frame.keypoints.confidence.push_back(conf == plan.confidence.end() ? 1.0
                                                                         : conf->second);
    }

    frame.contact_prob.prob.resize(posed.mesh.vertex_count());
    for (int v = 0; v < posed.mesh.vertex_count(); ++v) {
      const double d = point_mesh_distance(posed.mesh.vertices[v], gt_scene);
      frame.contact_prob.prob[v] = d < kContactDistance ? 1.0 : 0.0;
    }

    // Occlusion against the scan: a segmentation of the image cannot see
    // body parts buried in furniture folds, and the fitting pipeline only
    // knows the rest scan anyway.
    frame.mask = make_mask(posed.mesh, rest_bvh, camera);
    scenario.frames.push_back(std::move(frame));
  }

  // Generator self-checks on the constructed ground truth.
  if (id == "sofa_sit") {
    double deepest = 0;
    for (const GtFrame& gt : plan.frames) {
      const PosedBody posed = scenario.model.pose(gt.params);
      for (const Vec3& p_cam : posed.mesh.vertices) {
        const Vec3 p = plan.world.to_world(p_cam);
        if (p[0] > -0.55 && p[0] < 0.55 && p[2] > -3.45 && p[2] < -2.55)
          deepest = std::max(deepest, 0.45 - p[1]);
      }
    }
    if (std::abs(deepest - 0.03) > 1e-6)
      throw std::runtime_error("synth: sofa_sit hip dip is " + std::to_string(deepest) +
                               " m, expected 0.03 m");
  }

  // Write everything out.
  fs::create_directories(out_dir / "frames" / "keypoints");
  fs::create_directories(out_dir / "frames" / "contact_probs");
  fs::create_directories(out_dir / "frames" / "masks");
  fs::create_directories(out_dir / "gt" / "meshes");

  save_ply(scenario.scene, out_dir / "scene.ply");
  save_labels(scenario.labels, out_dir / "labels.json");
  save_body_model(scenario.model, out_dir / "body_model.json");
  save_manifest_toml(scenario.manifest, out_dir / "manifest.toml");
  save_manifest_json(scenario.manifest, out_dir / "manifest.json");
  save_params_sequence(scenario.gt_params, out_dir / "gt" / "params.json");

  for (std::size_t t = 0; t < scenario.frames.size(); ++t) {
    const int index = static_cast<int>(t);
    save_keypoints(scenario.frames[t].keypoints,
                   out_dir / "frames" / "keypoints" / frame_name(index, ".json"));
    save_contact_probs(scenario.frames[t].contact_prob,
                       out_dir / "frames" / "contact_probs" / frame_name(index, ".json"));
    save_mask_pgm(scenario.frames[t].mask,
                  out_dir / "frames" / "masks" / frame_name(index, ".pgm"));
    save_ply(scenario.gt_meshes[t], out_dir / "gt" / "meshes" / frame_name(index, ".ply"));
  }

  return scenario;
}

}  // namespace scenefit
