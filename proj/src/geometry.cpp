#include "scenefit/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <map>
#include <numeric>
#include <stdexcept>

namespace scenefit {

void TriMesh::validate() const {
  const int n = vertex_count();
  for (std::size_t f = 0; f < faces.size(); ++f) {
    const Face& face = faces[f];
    for (int k = 0; k < 3; ++k) {
      if (face[k] < 0 || face[k] >= n)
        throw std::invalid_argument("TriMesh: face " + std::to_string(f) +
                                    " references vertex " + std::to_string(face[k]) +
                                    " out of range [0, " + std::to_string(n) + ")");
    }
    if (face[0] == face[1] || face[1] == face[2] || face[0] == face[2])
      throw std::invalid_argument("TriMesh: face " + std::to_string(f) +
                                  " repeats a vertex index");
  }
}

void TriMesh::update_normals() {
  face_normals.assign(faces.size(), Vec3::Zero());
  degenerate_faces.assign(faces.size(), 0);
  std::vector<Vec3> accum(vertices.size(), Vec3::Zero());

  for (std::size_t f = 0; f < faces.size(); ++f) {
    const Vec3& a = vertices[faces[f][0]];
    const Vec3& b = vertices[faces[f][1]];
    const Vec3& c = vertices[faces[f][2]];
    const Vec3 cross = (b - a).cross(c - a);
    const double two_area = cross.norm();
    if (two_area < 1e-14) {
      degenerate_faces[f] = 1;
      continue;
    }
    face_normals[f] = cross / two_area;
    // Area weighting falls out of the un-normalized cross product.
    for (int k = 0; k < 3; ++k) accum[faces[f][k]] += cross;
  }

  vertex_normals.assign(vertices.size(), Vec3::Zero());
  for (std::size_t v = 0; v < vertices.size(); ++v) {
    const double len = accum[v].norm();
    if (len > 1e-14) vertex_normals[v] = accum[v] / len;
  }
}

OrientationReport orientation_report(const TriMesh& mesh) {
  // Count directed edges; a consistently wound interior edge appears once
  // in each direction.
  std::map<std::pair<int, int>, int> directed;
  for (const Face& face : mesh.faces) {
    for (int k = 0; k < 3; ++k) {
      const int a = face[k];
      const int b = face[(k + 1) % 3];
      ++directed[{a, b}];
    }
  }
  OrientationReport report;
  std::set<std::pair<int, int>> seen;
  for (const auto& [edge, count] : directed) {
    const std::pair<int, int> undirected{std::min(edge.first, edge.second),
                                         std::max(edge.first, edge.second)};
    if (!seen.insert(undirected).second) continue;
    const auto rev = directed.find({edge.second, edge.first});
    const int forward = count;
    const int backward = rev == directed.end() ? 0 : rev->second;
    if (forward + backward > 2)
      ++report.nonmanifold_edges;
    else if (forward + backward == 1)
      ++report.boundary_edges;
    else if (forward == 2 || backward == 2)
      ++report.inconsistent_edges;
  }
  return report;
}

std::vector<std::vector<int>> vertex_adjacency(const TriMesh& mesh) {
  std::vector<std::vector<int>> adj(mesh.vertices.size());
  for (const Face& face : mesh.faces) {
    for (int k = 0; k < 3; ++k) {
      const int a = face[k];
      const int b = face[(k + 1) % 3];
      adj[a].push_back(b);
      adj[b].push_back(a);
    }
  }
  for (auto& nbrs : adj) {
    std::sort(nbrs.begin(), nbrs.end());
    nbrs.erase(std::unique(nbrs.begin(), nbrs.end()), nbrs.end());
  }
  return adj;
}

std::set<int> k_ring(const TriMesh& mesh, const std::set<int>& seeds, int k) {
  const auto adj = vertex_adjacency(mesh);
  std::set<int> visited = seeds;
  std::deque<std::pair<int, int>> queue;  // (vertex, depth)
  for (int s : seeds) queue.emplace_back(s, 0);
  while (!queue.empty()) {
    const auto [v, depth] = queue.front();
    queue.pop_front();
    if (depth == k) continue;
    for (int n : adj[v]) {
      if (visited.insert(n).second) queue.emplace_back(n, depth + 1);
    }
  }
  return visited;
}

// ---------------------------------------------------------------------------
// PointIndex

PointIndex::PointIndex(std::vector<Vec3> points) : points_(std::move(points)) {
  if (points_.empty()) throw std::invalid_argument("PointIndex: empty point set");
  order_.resize(points_.size());
  std::iota(order_.begin(), order_.end(), 0);
  nodes_.reserve(2 * points_.size() / 8 + 8);
  root_ = build(0, static_cast<int>(points_.size()), 0);
}

int PointIndex::build(int begin, int end, int depth) {
  Node node;
  node.lo = Vec3::Constant(std::numeric_limits<double>::infinity());
  node.hi = Vec3::Constant(-std::numeric_limits<double>::infinity());
  for (int i = begin; i < end; ++i) {
    node.lo = node.lo.cwiseMin(points_[order_[i]]);
    node.hi = node.hi.cwiseMax(points_[order_[i]]);
  }
  const int index = static_cast<int>(nodes_.size());
  nodes_.push_back(node);
  if (end - begin <= 8) {
    nodes_[index].first = begin;
    nodes_[index].count = end - begin;
    // Ascending index order inside leaves keeps tie-breaking deterministic.
    std::sort(order_.begin() + begin, order_.begin() + end);
    return index;
  }
  int axis = 0;
  (node.hi - node.lo).maxCoeff(&axis);
  const int mid = (begin + end) / 2;
  std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                   [&](int a, int b) {
                     if (points_[a][axis] != points_[b][axis])
                       return points_[a][axis] < points_[b][axis];
                     return a < b;
                   });
  const int left = build(begin, mid, depth + 1);
  const int right = build(mid, end, depth + 1);
  nodes_[index].left = left;
  nodes_[index].right = right;
  return index;
}

namespace {
double box_distance2(const Vec3& lo, const Vec3& hi, const Vec3& q) {
  double d2 = 0;
  for (int k = 0; k < 3; ++k) {
    const double d = std::max({lo[k] - q[k], 0.0, q[k] - hi[k]});
    d2 += d * d;
  }
  return d2;
}
}  // namespace

void PointIndex::nearest_recurse(int node_idx, const Vec3& q, double& best_d2,
                                 int& best_idx) const {
  const Node& node = nodes_[node_idx];
  // '>' keeps boxes at exactly best_d2: an equal-distance point with a lower
  // index may live there, and the tie rule must match a linear scan.
  if (box_distance2(node.lo, node.hi, q) > best_d2) return;
  if (node.count > 0) {
    for (int i = node.first; i < node.first + node.count; ++i) {
      const int p = order_[i];
      const double d2 = (points_[p] - q).squaredNorm();
      if (d2 < best_d2 || (d2 == best_d2 && p < best_idx)) {
        best_d2 = d2;
        best_idx = p;
      }
    }
    return;
  }
  const double dl = box_distance2(nodes_[node.left].lo, nodes_[node.left].hi, q);
  const double dr = box_distance2(nodes_[node.right].lo, nodes_[node.right].hi, q);
  if (dl <= dr) {
    nearest_recurse(node.left, q, best_d2, best_idx);
    nearest_recurse(node.right, q, best_d2, best_idx);
  } else {
    nearest_recurse(node.right, q, best_d2, best_idx);
    nearest_recurse(node.left, q, best_d2, best_idx);
  }
}

std::pair<int, double> PointIndex::nearest(const Vec3& query) const {
  double best_d2 = std::numeric_limits<double>::infinity();
  int best_idx = std::numeric_limits<int>::max();
  nearest_recurse(root_, query, best_d2, best_idx);
  return {best_idx, std::sqrt(best_d2)};
}

void PointIndex::radius_recurse(int node_idx, const Vec3& q, double r2,
                                std::vector<int>& out) const {
  const Node& node = nodes_[node_idx];
  if (box_distance2(node.lo, node.hi, q) > r2) return;
  if (node.count > 0) {
    for (int i = node.first; i < node.first + node.count; ++i) {
      const int p = order_[i];
      if ((points_[p] - q).squaredNorm() <= r2) out.push_back(p);
    }
    return;
  }
  radius_recurse(node.left, q, r2, out);
  radius_recurse(node.right, q, r2, out);
}

std::vector<int> PointIndex::radius_query(const Vec3& query, double radius) const {
  std::vector<int> out;
  radius_recurse(root_, query, radius * radius, out);
  std::sort(out.begin(), out.end());
  return out;
}

// ---------------------------------------------------------------------------

double chamfer_distance(const std::vector<Vec3>& a, const std::vector<Vec3>& b) {
  if (a.empty() || b.empty())
    throw std::invalid_argument("chamfer_distance: empty point set");
  const PointIndex ia(a);
  const PointIndex ib(b);
  double sum = 0;
  for (const Vec3& p : a) sum += ib.nearest(p).second;
  for (const Vec3& p : b) sum += ia.nearest(p).second;
  return sum / static_cast<double>(a.size() + b.size());
}

Vec3 closest_point_on_triangle(const Vec3& p, const Vec3& a, const Vec3& b,
                               const Vec3& c) {
  // Ericson, Real-Time Collision Detection, 5.1.5.
  const Vec3 ab = b - a, ac = c - a, ap = p - a;
  const double d1 = ab.dot(ap), d2 = ac.dot(ap);
  if (d1 <= 0 && d2 <= 0) return a;

  const Vec3 bp = p - b;
  const double d3 = ab.dot(bp), d4 = ac.dot(bp);
  if (d3 >= 0 && d4 <= d3) return b;

  const double vc = d1 * d4 - d3 * d2;
  if (vc <= 0 && d1 >= 0 && d3 <= 0) return a + (d1 / (d1 - d3)) * ab;

  const Vec3 cp = p - c;
  const double d5 = ab.dot(cp), d6 = ac.dot(cp);
  if (d6 >= 0 && d5 <= d6) return c;

  const double vb = d5 * d2 - d1 * d6;
  if (vb <= 0 && d2 >= 0 && d6 <= 0) return a + (d2 / (d2 - d6)) * ac;

  const double va = d3 * d6 - d5 * d4;
  if (va <= 0 && (d4 - d3) >= 0 && (d5 - d6) >= 0)
    return b + ((d4 - d3) / ((d4 - d3) + (d5 - d6))) * (c - b);

  const double denom = 1.0 / (va + vb + vc);
  return a + ab * (vb * denom) + ac * (vc * denom);
}

double point_mesh_distance(const Vec3& p, const TriMesh& mesh) {
  double best = std::numeric_limits<double>::infinity();
  for (const Face& face : mesh.faces) {
    const Vec3 q = closest_point_on_triangle(p, mesh.vertices[face[0]],
                                             mesh.vertices[face[1]],
                                             mesh.vertices[face[2]]);
    best = std::min(best, (p - q).norm());
  }
  return best;
}

}  // namespace scenefit
