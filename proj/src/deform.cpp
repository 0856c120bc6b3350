#include "scenefit/deform.hpp"

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include <algorithm>
#include <cmath>
#include <deque>
#include <map>
#include <stdexcept>

namespace scenefit {

void SemanticLabels::validate(int scene_vertex_count) const {
  if (static_cast<int>(classes.size()) != scene_vertex_count)
    throw std::invalid_argument("semantic labels: expected " +
                                std::to_string(scene_vertex_count) + " entries, got " +
                                std::to_string(classes.size()));
}

void DeformConfig::validate() const {
  if (k < 0) throw std::invalid_argument("deform: k must be non-negative");
  if (max_iterations < 1) throw std::invalid_argument("deform: max_iterations must be >= 1");
  if (tolerance <= 0) throw std::invalid_argument("deform: tolerance must be positive");
}

std::vector<int> movable_region(const TriMesh& scene, const SemanticLabels& labels,
                                const TriMesh& posed_body, const PointIndex& scene_index,
                                const DeformConfig& config) {
  labels.validate(scene.vertex_count());
  config.validate();

  std::set<int> seeds;
  for (const Vec3& p : posed_body.vertices) {
    const int nearest = scene_index.nearest(p).first;
    if (labels.deformable(nearest)) seeds.insert(nearest);
  }

  // Propagation stays inside the deformable area: rigid-labeled vertices
  // never become movable.
  const auto adjacency = vertex_adjacency(scene);
  std::set<int> region = seeds;
  std::deque<std::pair<int, int>> frontier;
  for (int s : seeds) frontier.emplace_back(s, 0);
  while (!frontier.empty()) {
    const auto [v, depth] = frontier.front();
    frontier.pop_front();
    if (depth == config.k) continue;
    for (int n : adjacency[v]) {
      if (!labels.deformable(n)) continue;
      if (region.insert(n).second) frontier.emplace_back(n, depth + 1);
    }
  }
  return {region.begin(), region.end()};
}

Collision classify_collision(const Vec3& body_point, const Vec3& /*body_normal*/,
                             const Vec3& scene_point, const Vec3& scene_normal) {
  // Beneath the surface, the way back out runs along the outward normal.
  return (scene_point - body_point).dot(scene_normal) > 0 ? Collision::kColliding
                                                          : Collision::kOutside;
}

ControlTargets select_controls(const TriMesh& scene, const TriMesh& posed_body,
                               const std::vector<int>& contact_vertices,
                               const std::vector<int>& movable,
                               const PointIndex& scene_index) {
  if (!scene.has_normals() || !posed_body.has_normals())
    throw std::invalid_argument("select_controls: meshes need up-to-date normals");

  std::vector<int> contacts = contact_vertices;
  std::sort(contacts.begin(), contacts.end());

  struct Claim {
    double depth;
    int body_vertex;
    Vec3 target;
  };
  std::map<int, Claim> claims;
  for (int bv : contacts) {
    const Vec3& body_p = posed_body.vertices[bv];
    const int sv = scene_index.nearest(body_p).first;
    if (!std::binary_search(movable.begin(), movable.end(), sv)) continue;
    const Vec3& scene_p = scene.vertices[sv];
    const Vec3& scene_n = scene.vertex_normals[sv];
    const Vec3& body_n = posed_body.vertex_normals[bv];
    if (classify_collision(body_p, body_n, scene_p, scene_n) != Collision::kColliding)
      continue;
    if (body_n.dot(scene_n) >= 0) continue;  // normals must oppose

    const double depth = (scene_p - body_p).dot(scene_n);
    const auto it = claims.find(sv);
    // Ascending body-vertex order plus a strict comparison makes the
    // winner independent of the caller's enumeration order.
    if (it == claims.end() || depth > it->second.depth)
      claims[sv] = Claim{depth, bv, body_p};
  }

  ControlTargets out;
  for (const auto& [sv, claim] : claims) {
    out.controls.push_back(sv);
    out.targets.push_back(claim.target);
    out.depths.push_back(claim.depth);
  }
  return out;
}

EdgeWeights cotangent_weights(const TriMesh& mesh) {
  std::map<std::pair<int, int>, double> sums;
  auto edge_key = [](int a, int b) {
    return std::pair<int, int>(std::min(a, b), std::max(a, b));
  };

  for (const Face& face : mesh.faces) {
    for (int corner = 0; corner < 3; ++corner) {
      const int opp = face[corner];
      const int a = face[(corner + 1) % 3];
      const int b = face[(corner + 2) % 3];
      const Vec3 u = mesh.vertices[a] - mesh.vertices[opp];
      const Vec3 v = mesh.vertices[b] - mesh.vertices[opp];
      const double cross = u.cross(v).norm();
      const double cot = cross > 1e-14 ? u.dot(v) / cross : 0.0;
      sums[edge_key(a, b)] += 0.5 * cot;
    }
  }

  EdgeWeights weights;
  weights.neighbors.resize(mesh.vertex_count());
  for (const auto& [edge, w_raw] : sums) {
    const double w = std::max(w_raw, 1e-6);  // obtuse triangles go slightly positive
    weights.neighbors[edge.first].emplace_back(edge.second, w);
    weights.neighbors[edge.second].emplace_back(edge.first, w);
  }
  for (auto& nbrs : weights.neighbors) std::sort(nbrs.begin(), nbrs.end());
  return weights;
}

ArapProblem build_arap_problem(const TriMesh& rest, const std::vector<int>& movable,
                               const ControlTargets& controls, const DeformConfig& config) {
  config.validate();
  if (movable.empty()) throw std::invalid_argument("arap: movable set is empty");
  if (controls.controls.empty()) throw std::invalid_argument("arap: control set is empty");
  if (controls.controls.size() != controls.targets.size())
    throw std::invalid_argument("arap: controls and targets differ in length");

  ArapProblem problem;
  problem.rest = &rest;
  problem.movable = movable;
  std::sort(problem.movable.begin(), problem.movable.end());
  problem.controls = controls.controls;
  problem.targets = controls.targets;
  problem.config = config;

  for (int c : problem.controls) {
    if (!std::binary_search(problem.movable.begin(), problem.movable.end(), c))
      throw std::invalid_argument("arap: control vertex " + std::to_string(c) +
                                  " is not in the movable set");
  }
  problem.weights = cotangent_weights(rest);
  return problem;
}

namespace {

Mat3 fit_rotation(const Mat3& covariance) {
  const Eigen::JacobiSVD<Mat3> svd(covariance, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 r = svd.matrixV() * svd.matrixU().transpose();
  if (r.determinant() < 0) {
    Mat3 flip = Mat3::Identity();
    flip(2, 2) = -1;
    r = svd.matrixV() * flip * svd.matrixU().transpose();
  }
  return r;
}

}  // namespace

double arap_energy(const ArapProblem& problem, const std::vector<Vec3>& positions,
                   const std::vector<Mat3>& rotations) {
  const TriMesh& rest = *problem.rest;
  const bool controls_only = problem.config.rotation_scope == RotationScope::kControlsOnly;
  const std::vector<int>& centers = controls_only ? problem.controls : problem.movable;
  double energy = 0;
  for (int c : centers) {
    for (const auto& [n, w] : problem.weights.neighbors[c]) {
      const Vec3 rest_edge = rest.vertices[c] - rest.vertices[n];
      const Vec3 cur_edge = positions[c] - positions[n];
      energy += w * (cur_edge - rotations[c] * rest_edge).squaredNorm();
    }
  }
  return energy;
}

std::vector<Vec3> arap_solve(const ArapProblem& problem, ArapReport* report) {
  const TriMesh& rest = *problem.rest;
  const int n_verts = rest.vertex_count();
  const bool controls_only = problem.config.rotation_scope == RotationScope::kControlsOnly;

  std::vector<char> is_movable(n_verts, 0), is_control(n_verts, 0);
  for (int v : problem.movable) is_movable[v] = 1;
  for (int c : problem.controls) is_control[c] = 1;

  // Free vertices get a row in the linear system; everything else is pinned
  // (controls at targets, the rest of the scene at rest positions).
  std::vector<int> free_index(n_verts, -1);
  std::vector<int> free_verts;
  for (int v : problem.movable) {
    if (!is_control[v]) {
      free_index[v] = static_cast<int>(free_verts.size());
      free_verts.push_back(v);
    }
  }
  const int n_free = static_cast<int>(free_verts.size());

  // A free component that never touches a pinned vertex can translate
  // freely, which makes the system singular; report it instead of solving.
  {
    std::vector<int> component(n_verts, -1);
    int component_id = 0;
    for (int seed : free_verts) {
      if (component[seed] != -1) continue;
      bool anchored = false;
      std::deque<int> queue{seed};
      component[seed] = component_id;
      while (!queue.empty()) {
        const int v = queue.front();
        queue.pop_front();
        bool has_term_edge = false;
        for (const auto& [n, w] : problem.weights.neighbors[v]) {
          const bool edge_in_energy = !controls_only || is_control[v] || is_control[n];
          if (!edge_in_energy) continue;
          has_term_edge = true;
          if (free_index[n] < 0) {
            anchored = true;
          } else if (component[n] == -1) {
            component[n] = component_id;
            queue.push_back(n);
          }
        }
        if (!has_term_edge && controls_only) {
          throw std::runtime_error(
              "arap: free vertex " + std::to_string(v) +
              " has no energy term under controls_only rotations (component " +
              std::to_string(component_id) + ")");
        }
      }
      if (!anchored)
        throw std::runtime_error("arap: movable component " + std::to_string(component_id) +
                                 " (seed vertex " + std::to_string(seed) +
                                 ") has no pinned vertex");
      ++component_id;
    }
  }

  std::vector<Vec3> positions = rest.vertices;
  for (std::size_t i = 0; i < problem.controls.size(); ++i)
    positions[problem.controls[i]] = problem.targets[i];

  std::vector<Mat3> rotations(n_verts, Mat3::Identity());
  const std::vector<int>& rotation_centers =
      controls_only ? problem.controls : problem.movable;

  ArapReport local_report;
  ArapReport& rep = report ? *report : local_report;
  rep = ArapReport{};
  rep.energy_trace.push_back(arap_energy(problem, positions, rotations));

  // The Laplacian depends only on the pin pattern; factor it once.
  Eigen::SparseMatrix<double> laplacian(n_free, n_free);
  Eigen::MatrixX3d rhs(n_free, 3);
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver;
  if (n_free > 0) {
    std::vector<Eigen::Triplet<double>> triplets;
    for (int c : rotation_centers) {
      for (const auto& [n, w] : problem.weights.neighbors[c]) {
        const int fc = free_index[c];
        const int fn = free_index[n];
        if (fc >= 0) {
          triplets.emplace_back(fc, fc, w);
          if (fn >= 0) triplets.emplace_back(fc, fn, -w);
        }
        if (fn >= 0) {
          triplets.emplace_back(fn, fn, w);
          if (fc >= 0) triplets.emplace_back(fn, fc, -w);
        }
      }
    }
    laplacian.setFromTriplets(triplets.begin(), triplets.end());
    solver.compute(laplacian);
    if (solver.info() != Eigen::Success)
      throw std::runtime_error("arap: singular global-step system");
  }

  for (int iteration = 0; iteration < problem.config.max_iterations; ++iteration) {
    // Local step: per-center rotation from the weighted edge covariance.
    for (int c : rotation_centers) {
      Mat3 covariance = Mat3::Zero();
      for (const auto& [n, w] : problem.weights.neighbors[c]) {
        const Vec3 rest_edge = rest.vertices[c] - rest.vertices[n];
        const Vec3 cur_edge = positions[c] - positions[n];
        covariance += w * rest_edge * cur_edge.transpose();
      }
      rotations[c] = fit_rotation(covariance);
    }

    // Global step: positions from the pinned Laplacian system.
    double max_move = 0;
    if (n_free > 0) {
      rhs.setZero();
      for (int c : rotation_centers) {
        for (const auto& [n, w] : problem.weights.neighbors[c]) {
          const int fc = free_index[c];
          const int fn = free_index[n];
          const Vec3 rotated = rotations[c] * (rest.vertices[c] - rest.vertices[n]);
          if (fc >= 0) {
            rhs.row(fc) += w * rotated.transpose();
            if (fn < 0) rhs.row(fc) += w * positions[n].transpose();
          }
          if (fn >= 0) {
            rhs.row(fn) -= w * rotated.transpose();
            if (fc < 0) rhs.row(fn) += w * positions[c].transpose();
          }
        }
      }
      const Eigen::MatrixX3d solution = solver.solve(rhs);
      if (solver.info() != Eigen::Success)
        throw std::runtime_error("arap: global-step solve failed");
      for (int i = 0; i < n_free; ++i) {
        const Vec3 updated = solution.row(i).transpose();
        max_move = std::max(max_move, (updated - positions[free_verts[i]]).norm());
        positions[free_verts[i]] = updated;
      }
    }

    ++rep.iterations;
    rep.energy_trace.push_back(arap_energy(problem, positions, rotations));
    if (max_move < problem.config.tolerance) break;
  }

  return positions;
}

}  // namespace scenefit
