#include "scenefit/contact.hpp"

#include "scenefit/log.hpp"

#include <algorithm>
#include <deque>
#include <map>
#include <stdexcept>

namespace scenefit {

void ContactProbMap::validate(int body_vertex_count) const {
  if (static_cast<int>(prob.size()) != body_vertex_count)
    throw std::invalid_argument("contact probability map: expected " +
                                std::to_string(body_vertex_count) + " entries, got " +
                                std::to_string(prob.size()));
  for (double p : prob) {
    if (!(p >= 0.0 && p <= 1.0))
      throw std::invalid_argument("contact probability map: value outside [0,1]");
  }
}

void DbscanConfig::validate() const {
  if (eps <= 0) throw std::invalid_argument("dbscan: eps must be positive");
  if (min_pts < 1) throw std::invalid_argument("dbscan: min_pts must be >= 1");
}

std::vector<int> threshold_contacts(const ContactProbMap& probs, double tau) {
  if (!(tau > 0.0 && tau < 1.0))
    throw std::invalid_argument("threshold_contacts: tau must lie in (0,1)");
  std::vector<int> out;
  for (std::size_t v = 0; v < probs.prob.size(); ++v) {
    if (probs.prob[v] >= tau) out.push_back(static_cast<int>(v));
  }
  return out;
}

std::vector<int> dbscan(const std::vector<Vec3>& points, const DbscanConfig& config) {
  config.validate();
  if (points.empty()) throw std::invalid_argument("dbscan: empty point set");

  const PointIndex index(points);
  const int n = static_cast<int>(points.size());
  constexpr int kUnvisited = -2;
  std::vector<int> label(n, kUnvisited);

  int next_cluster = 0;
  for (int seed = 0; seed < n; ++seed) {
    if (label[seed] != kUnvisited) continue;
    std::vector<int> neighbors = index.radius_query(points[seed], config.eps);
    if (static_cast<int>(neighbors.size()) < config.min_pts) {
      label[seed] = -1;
      continue;
    }
    const int cluster = next_cluster++;
    label[seed] = cluster;
    std::deque<int> frontier(neighbors.begin(), neighbors.end());
    while (!frontier.empty()) {
      const int p = frontier.front();
      frontier.pop_front();
      if (label[p] == -1) label[p] = cluster;  // border point, claimed by first cluster
      if (label[p] != kUnvisited) continue;
      label[p] = cluster;
      const std::vector<int> nbrs = index.radius_query(points[p], config.eps);
      if (static_cast<int>(nbrs.size()) >= config.min_pts)
        frontier.insert(frontier.end(), nbrs.begin(), nbrs.end());
    }
  }
  return label;
}

ContactSet find_scene_contacts(const TriMesh& posed_body,
                               const std::vector<int>& contact_vertices,
                               const PinholeCamera& camera, const SubjectMask& mask,
                               const Bvh& scene_bvh, const TriMesh& scene,
                               const DbscanConfig& dbscan_config) {
  if (mask.width != camera.width || mask.height != camera.height)
    throw std::invalid_argument("find_scene_contacts: mask size does not match camera");

  ContactSet result;
  if (contact_vertices.empty()) return result;

  std::vector<SeenContact> candidates;
  for (int v : contact_vertices) {
    const Vec3& p = posed_body.vertices[v];
    if (p[2] <= 1e-6) {  // behind the camera: no usable re-projection
      result.unseen.push_back(v);
      continue;
    }
    const Vec2 px = camera.project(p);
    if (!mask.contains(px)) {  // occluded (or out of frame): keep as unseen
      result.unseen.push_back(v);
      continue;
    }
    const auto hit = scene_bvh.raycast_first(Vec3::Zero(), camera.pixel_ray(px));
    if (!hit) {
      result.unseen.push_back(v);
      continue;
    }
    SeenContact contact;
    contact.body_vertex = v;
    contact.tri = hit->tri;
    contact.bary = hit->bary;
    contact.point = hit->point;
    candidates.push_back(contact);
  }

  if (candidates.empty()) return result;

  std::vector<Vec3> hit_points;
  hit_points.reserve(candidates.size());
  for (const SeenContact& c : candidates) hit_points.push_back(c.point);
  const std::vector<int> labels = dbscan(hit_points, dbscan_config);

  std::map<int, int> cluster_sizes;
  for (int l : labels) {
    if (l >= 0) ++cluster_sizes[l];
  }

  int keep = -1;
  int best_size = 0;
  bool tie = false;
  for (const auto& [cluster, size] : cluster_sizes) {
    if (size > best_size) {
      keep = cluster;
      best_size = size;
      tie = false;
    } else if (size == best_size) {
      tie = true;
    }
  }
  if (keep < 0 || tie) {
    // All hits are noise, or no single dominant cluster: nothing is trusted.
    log_warn("raycast contacts: no dominant cluster among ", candidates.size(),
             " hits; routing all to unseen");
    for (const SeenContact& c : candidates) result.unseen.push_back(c.body_vertex);
    std::sort(result.unseen.begin(), result.unseen.end());
    return result;
  }

  for (std::size_t i = 0; i < candidates.size(); ++i) {
    if (labels[i] == keep)
      result.seen.push_back(candidates[i]);
    else
      result.unseen.push_back(candidates[i].body_vertex);
  }
  std::sort(result.unseen.begin(), result.unseen.end());
  return result;
}

Vec3 seen_contact_position(const SeenContact& contact, const TriMesh& scene) {
  const Face& face = scene.faces[contact.tri];
  return contact.bary[0] * scene.vertices[face[0]] +
         contact.bary[1] * scene.vertices[face[1]] +
         contact.bary[2] * scene.vertices[face[2]];
}

}  // namespace scenefit
