#include "scenefit/body_model.hpp"
#include "scenefit/rotation.hpp"
#include "scenefit/synth.hpp"

#include "test_util.hpp"

#include <doctest.h>

using namespace scenefit;

namespace {

// Two-bone chain with a handful of rigidly bound vertices.
BodyModel chain_model() {
  BodyModel model;
  model.joint_names = {"root", "child"};
  model.parents = {-1, 0};
  model.template_vertices = {{0, 0, 0}, {0.5, 0, 0}, {1, 0, 0}, {2, 0, 0}, {1.5, 0.2, 0}};
  model.faces = {{0, 1, 4}, {1, 2, 4}, {2, 3, 4}};
  model.joint_regressor = Eigen::MatrixXd::Zero(2, 5);
  model.joint_regressor(0, 0) = 1.0;  // root at vertex 0
  model.joint_regressor(1, 2) = 1.0;  // child at vertex 2
  model.skin_weights = Eigen::MatrixXd::Zero(5, 2);
  model.skin_weights(0, 0) = 1.0;
  model.skin_weights(1, 0) = 1.0;
  model.skin_weights(2, 1) = 1.0;
  model.skin_weights(3, 1) = 1.0;
  model.skin_weights(4, 0) = 0.5;
  model.skin_weights(4, 1) = 0.5;
  model.shape_dirs.assign(2, Eigen::Matrix3Xd::Zero(3, 5));
  model.shape_dirs[0].col(3) = Vec3(0.1, 0, 0);  // lengthens the far end
  model.shape_dirs[1].col(1) = Vec3(0, 0.05, 0);
  model.validate();
  return model;
}

BodyParams random_params(const BodyModel& model, std::mt19937_64& gen, double pose_scale) {
  std::uniform_real_distribution<double> dist(-1, 1);
  BodyParams params = model.neutral_params();
  for (auto& aa : params.pose) aa = pose_scale * test::random_point(gen);
  params.translation = test::random_point(gen) + Vec3(0, 0, 3);
  for (int s = 0; s < params.shape.size(); ++s) params.shape[s] = 0.5 * dist(gen);
  return params;
}

}  // namespace

TEST_CASE("rest joints: neutral shape and one-hot rows") {
  const BodyModel model = chain_model();
  const auto joints = model.rest_joints(Eigen::VectorXd::Zero(2));
  CHECK(joints[0].isApprox(model.template_vertices[0], 1e-14));
  CHECK(joints[1].isApprox(model.template_vertices[2], 1e-14));

  // dense matrix-product oracle at random shape
  auto gen = test::rng(21);
  Eigen::VectorXd beta(2);
  beta << 0.7, -0.3;
  const auto shaped = model.shaped_vertices(beta);
  Eigen::MatrixXd dense(5, 3);
  for (int v = 0; v < 5; ++v) dense.row(v) = shaped[v].transpose();
  const Eigen::MatrixXd expected = model.joint_regressor * dense;
  const auto joints_b = model.rest_joints(beta);
  for (int j = 0; j < 2; ++j)
    CHECK((joints_b[j] - expected.row(j).transpose()).norm() < 1e-12);

  CHECK_THROWS_AS(model.rest_joints(Eigen::VectorXd::Zero(5)), std::invalid_argument);
}

TEST_CASE("pose: identity and pure translation") {
  const BodyModel model = chain_model();
  BodyParams params = model.neutral_params();
  const PosedBody rest = model.pose(params);
  for (int v = 0; v < 5; ++v)
    CHECK(rest.mesh.vertices[v].isApprox(model.template_vertices[v], 1e-12));
  const auto rest_joints = model.rest_joints(params.shape);
  for (int j = 0; j < 2; ++j) CHECK(rest.joints[j].isApprox(rest_joints[j], 1e-12));

  params.translation = Vec3(0, 0, 1);
  const PosedBody moved = model.pose(params);
  for (int v = 0; v < 5; ++v)
    CHECK(moved.mesh.vertices[v].isApprox(model.template_vertices[v] + Vec3(0, 0, 1), 1e-12));
}

TEST_CASE("pose: child rotation matches hand-computed forward kinematics") {
  const BodyModel model = chain_model();
  BodyParams params = model.neutral_params();
  params.pose[1] = Vec3(0, 0, M_PI / 2);  // 90 degrees about z at the child joint

  const PosedBody posed = model.pose(params);
  // vertex 3 sits at (2,0,0), one unit along x from the child joint (1,0,0);
  // rotating 90 degrees about z moves it to (1,1,0)
  CHECK(posed.mesh.vertices[3].isApprox(Vec3(1, 1, 0), 1e-12));
  // the child joint itself stays put
  CHECK(posed.joints[1].isApprox(Vec3(1, 0, 0), 1e-12));
  // a root-bound vertex is unaffected
  CHECK(posed.mesh.vertices[1].isApprox(Vec3(0.5, 0, 0), 1e-12));
}

TEST_CASE("pose is equivariant under rigid motion applied via the root") {
  const BodyModel model = make_test_body();
  auto gen = test::rng(23);
  for (int trial = 0; trial < 5; ++trial) {
    const BodyParams params = random_params(model, gen, 0.4);
    const PosedBody base = model.pose(params);

    const Mat3 rot = so3_exp(test::random_point(gen, -1, 1));
    const Vec3 shift = test::random_point(gen);
    const Vec3 root = model.rest_joints(params.shape)[0];

    BodyParams moved = params;
    moved.pose[0] = so3_log(rot * so3_exp(params.pose[0]));
    moved.translation = rot * root - root + rot * params.translation + shift;
    const PosedBody transformed = model.pose(moved);

    for (int v = 0; v < model.vertex_count(); v += 17) {
      const Vec3 expected = rot * base.mesh.vertices[v] + shift;
      CHECK((transformed.mesh.vertices[v] - expected).norm() < 1e-9);
    }
    for (int j = 0; j < model.joint_count(); ++j) {
      const Vec3 expected = rot * base.joints[j] + shift;
      CHECK((transformed.joints[j] - expected).norm() < 1e-9);
    }
  }
}

TEST_CASE("skinned vertices are convex combinations of per-bone positions") {
  const BodyModel model = make_test_body();
  auto gen = test::rng(29);
  const BodyParams params = random_params(model, gen, 0.5);

  // weights form a convex combination
  for (int v = 0; v < model.vertex_count(); ++v) {
    CHECK(model.skin_weights.row(v).minCoeff() >= 0.0);
    CHECK(model.skin_weights.row(v).maxCoeff() <= 1.0);
    CHECK(model.skin_weights.row(v).sum() == doctest::Approx(1.0).epsilon(1e-9));
  }

  // per-bone rigid placements via single-bone variants of the same model
  std::vector<std::vector<Vec3>> per_bone(model.joint_count());
  for (int j = 0; j < model.joint_count(); ++j) {
    BodyModel solo = model;
    solo.skin_weights.setZero();
    solo.skin_weights.col(j).setOnes();
    per_bone[j] = solo.pose(params).mesh.vertices;
  }
  const PosedBody full = model.pose(params);
  for (int v = 0; v < model.vertex_count(); v += 7) {
    Vec3 blend = Vec3::Zero();
    for (int k = 0; k < model.joint_count(); ++k)
      blend += model.skin_weights(v, k) * per_bone[k][v];
    CHECK((full.mesh.vertices[v] - blend).norm() < 1e-10);
  }
}

TEST_CASE("posed joint and vertex jacobians match finite differences") {
  const BodyModel model = make_test_body();
  auto gen = test::rng(31);
  const ParamLayout layout = model.layout();

  for (int trial = 0; trial < 3; ++trial) {
    const BodyParams params = random_params(model, gen, 0.3);
    const PoseDerivatives fk(model, params);
    const Eigen::VectorXd x = flatten(params);

    const double h = 1e-6;
    for (int j = 0; j < model.joint_count(); j += 3) {
      const Eigen::Matrix3Xd jac = fk.joint_jacobian(j);
      for (int p = 0; p < layout.size(); p += 5) {
        Eigen::VectorXd lo = x, hi = x;
        lo[p] -= h;
        hi[p] += h;
        const Vec3 fd = (PoseDerivatives(model, unflatten(layout, hi)).joints()[j] -
                         PoseDerivatives(model, unflatten(layout, lo)).joints()[j]) /
                        (2 * h);
        const double scale = std::max(1.0, fd.norm());
        CHECK((jac.col(p) - fd).norm() / scale < 1e-4);
      }
    }
    for (int v = 0; v < model.vertex_count(); v += 131) {
      const Eigen::Matrix3Xd jac = fk.vertex_jacobian(v);
      for (int p = 0; p < layout.size(); p += 7) {
        Eigen::VectorXd lo = x, hi = x;
        lo[p] -= h;
        hi[p] += h;
        const Vec3 fd = (PoseDerivatives(model, unflatten(layout, hi)).vertices()[v] -
                         PoseDerivatives(model, unflatten(layout, lo)).vertices()[v]) /
                        (2 * h);
        const double scale = std::max(1.0, fd.norm());
        CHECK((jac.col(p) - fd).norm() / scale < 1e-4);
      }
    }
  }
}

TEST_CASE("flatten / unflatten round-trip") {
  const BodyModel model = make_test_body();
  auto gen = test::rng(37);
  const BodyParams params = random_params(model, gen, 1.0);
  const BodyParams back = unflatten(model.layout(), flatten(params));
  CHECK((flatten(back) - flatten(params)).norm() == 0.0);
}

TEST_CASE("test body satisfies the structural contract") {
  const BodyModel model = make_test_body();
  CHECK(model.joint_count() == 12);
  CHECK(model.vertex_count() > 400);
  CHECK(model.shape_dim() == 10);
  CHECK(model.parents[0] == -1);
  for (int j = 1; j < model.joint_count(); ++j) CHECK(model.parents[j] < j);
  TriMesh shell;
  shell.vertices = model.template_vertices;
  shell.faces = model.faces;
  shell.update_normals();
  CHECK(orientation_report(shell).consistent());
}

TEST_CASE("non-finite parameters are rejected") {
  const BodyModel model = chain_model();
  BodyParams params = model.neutral_params();
  params.pose[1][0] = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(model.pose(params), std::invalid_argument);
}
