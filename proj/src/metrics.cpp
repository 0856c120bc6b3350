#include "scenefit/metrics.hpp"

#include "scenefit/energy.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace scenefit {

namespace {

double mean_distance_mm(const std::vector<Vec3>& a, const std::vector<Vec3>& b,
                        const char* what) {
  if (a.size() != b.size() || a.empty())
    throw std::invalid_argument(std::string(what) + ": point counts differ or empty");
  double sum = 0;
  for (std::size_t i = 0; i < a.size(); ++i) sum += (a[i] - b[i]).norm();
  return 1000.0 * sum / static_cast<double>(a.size());
}

}  // namespace

double pje(const std::vector<Vec3>& predicted, const std::vector<Vec3>& truth) {
  return mean_distance_mm(predicted, truth, "pje");
}

double v2v(const std::vector<Vec3>& predicted, const std::vector<Vec3>& truth) {
  return mean_distance_mm(predicted, truth, "v2v");
}

std::vector<Vec3> procrustes_align(const std::vector<Vec3>& predicted,
                                   const std::vector<Vec3>& truth, bool with_scale) {
  if (predicted.size() != truth.size())
    throw std::invalid_argument("procrustes: point counts differ");
  const int n = static_cast<int>(predicted.size());
  if (n < 3) throw std::invalid_argument("procrustes: need at least 3 points");

  Vec3 mean_p = Vec3::Zero(), mean_t = Vec3::Zero();
  for (int i = 0; i < n; ++i) {
    mean_p += predicted[i];
    mean_t += truth[i];
  }
  mean_p /= n;
  mean_t /= n;

  Mat3 covariance = Mat3::Zero();
  double var_p = 0;
  for (int i = 0; i < n; ++i) {
    const Vec3 p = predicted[i] - mean_p;
    const Vec3 t = truth[i] - mean_t;
    covariance += t * p.transpose();
    var_p += p.squaredNorm();
  }
  covariance /= n;
  var_p /= n;

  const Eigen::JacobiSVD<Mat3> svd(covariance, Eigen::ComputeFullU | Eigen::ComputeFullV);
  // Umeyama: rank must be at least 2 for the rotation to be determined.
  const double tol = 1e-12 * svd.singularValues()[0];
  int rank = 0;
  for (int i = 0; i < 3; ++i)
    if (svd.singularValues()[i] > tol) ++rank;
  if (var_p < 1e-24 || rank < 2)
    throw std::invalid_argument("procrustes: degenerate (collinear) point configuration");

  Mat3 d = Mat3::Identity();
  if ((svd.matrixU() * svd.matrixV().transpose()).determinant() < 0) d(2, 2) = -1;
  const Mat3 rotation = svd.matrixU() * d * svd.matrixV().transpose();
  const double scale =
      with_scale ? (svd.singularValues().asDiagonal() * d).trace() / var_p : 1.0;
  const Vec3 translation = mean_t - scale * rotation * mean_p;

  std::vector<Vec3> aligned(predicted.size());
  for (int i = 0; i < n; ++i) aligned[i] = scale * rotation * predicted[i] + translation;
  return aligned;
}

double non_collision_score(const TriMesh& posed_body, const TriMesh& scene,
                           const PointIndex& scene_index) {
  if (posed_body.vertex_count() == 0)
    throw std::invalid_argument("non_collision_score: empty body");
  const PenetrationSet penetrating = classify_penetrating(posed_body, scene, scene_index);
  const double colliding = static_cast<double>(penetrating.pairs.size());
  return 100.0 * (1.0 - colliding / posed_body.vertex_count());
}

void EvalReport::finalize() {
  mean_pje = mean_v2v = mean_p_pje = mean_p_v2v = mean_non_collision = 0;
  if (frames.empty()) return;
  for (const EvalFrame& f : frames) {
    mean_pje += f.pje;
    mean_v2v += f.v2v;
    mean_p_pje += f.p_pje;
    mean_p_v2v += f.p_v2v;
    mean_non_collision += f.non_collision;
  }
  const double n = static_cast<double>(frames.size());
  mean_pje /= n;
  mean_v2v /= n;
  mean_p_pje /= n;
  mean_p_v2v /= n;
  mean_non_collision /= n;
}

std::string EvalReport::table() const {
  std::string out;
  char line[160];
  std::snprintf(line, sizeof(line), "%6s %10s %10s %10s %10s %9s\n", "frame", "PJE",
                "V2V", "p.PJE", "p.V2V", "non-col");
  out += line;
  for (const EvalFrame& f : frames) {
    std::snprintf(line, sizeof(line), "%6d %10.2f %10.2f %10.2f %10.2f %8.2f%%\n", f.frame,
                  f.pje, f.v2v, f.p_pje, f.p_v2v, f.non_collision);
    out += line;
  }
  std::snprintf(line, sizeof(line), "%6s %10.2f %10.2f %10.2f %10.2f %8.2f%%\n", "mean",
                mean_pje, mean_v2v, mean_p_pje, mean_p_v2v, mean_non_collision);
  out += line;
  return out;
}

}  // namespace scenefit
