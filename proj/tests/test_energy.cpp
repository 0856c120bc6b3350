#include "scenefit/energy.hpp"
#include "scenefit/synth.hpp"

#include "test_util.hpp"

#include <doctest.h>

using namespace scenefit;

namespace {

struct Fixture {
  BodyModel model = make_test_body();
  PinholeCamera camera;
  TriMesh scene = test::flat_grid(15, 2.0, 1.0);
  std::unique_ptr<PointIndex> scene_index;
  StageConfig config;

  Fixture() {
    camera.fx = camera.fy = 500;
    camera.cx = 320;
    camera.cy = 240;
    camera.width = 640;
    camera.height = 480;
    scene_index = std::make_unique<PointIndex>(scene.vertices);
    config.bending = {{7, 0, -1.0}, {10, 0, -1.0}};  // knees
  }

  BodyParams params_near(std::mt19937_64& gen, double pose_scale = 0.25) const {
    BodyParams params = model.neutral_params();
    for (auto& aa : params.pose) aa = pose_scale * test::random_point(gen);
    params.translation = Vec3(0.2 * test::random_point(gen)[0],
                              0.2 * test::random_point(gen)[1] - 0.3, 2.5);
    for (int s = 0; s < params.shape.size(); ++s)
      params.shape[s] = 0.3 * test::random_point(gen)[0];
    return params;
  }

  Keypoints2d keypoints_of(const BodyParams& params) const {
    const PosedBody posed = model.pose(params);
    Keypoints2d kp;
    kp.names = model.joint_names;
    for (const Vec3& j : posed.joints) {
      kp.pixels.push_back(camera.project(j));
      kp.confidence.push_back(1.0);
    }
    return kp;
  }

  JointMap identity_map(const Keypoints2d& kp) const {
    std::map<std::string, std::string> table;
    for (const std::string& name : model.joint_names) table[name] = name;
    return resolve_joint_map(table, kp, model);
  }
};

// central finite difference of a scalar term over the full layout
template <typename Term>
void check_gradient(const BodyModel& model, const BodyParams& params, Term&& term,
                    double tol = 1e-4) {
  const ParamLayout layout = model.layout();
  const Eigen::VectorXd x = flatten(params);
  const TermResult at_x = term(params);

  Eigen::VectorXd fd(layout.size());
  const double h = 1e-5;
  for (int p = 0; p < layout.size(); ++p) {
    Eigen::VectorXd lo = x, hi = x;
    lo[p] -= h;
    hi[p] += h;
    fd[p] = (term(unflatten(layout, hi)).value - term(unflatten(layout, lo)).value) / (2 * h);
  }
  const double scale = std::max(fd.norm(), 1e-10);
  CHECK((at_x.grad - fd).norm() / scale < tol);
}

}  // namespace

TEST_CASE("reprojection term: zero at ground truth, finite-difference gradient") {
  Fixture fx;
  auto gen = test::rng(97);
  const BodyParams truth = fx.params_near(gen);
  const Keypoints2d kp = fx.keypoints_of(truth);
  const JointMap map = fx.identity_map(kp);
  const GemanMcClure kernel(fx.config.sigma_joint_px);

  const PoseDerivatives at_truth(fx.model, truth);
  const TermResult self = e_reprojection(at_truth, fx.camera, kp, map, kernel);
  CHECK(self.value < 1e-18);
  CHECK(self.grad.norm() < 1e-9);

  Keypoints2d zero_conf = kp;
  std::fill(zero_conf.confidence.begin(), zero_conf.confidence.end(), 0.0);
  const TermResult silent = e_reprojection(at_truth, fx.camera, zero_conf, map, kernel);
  CHECK(silent.value == 0.0);

  for (int trial = 0; trial < 20; ++trial) {
    const BodyParams params = fx.params_near(gen);
    check_gradient(fx.model, params, [&](const BodyParams& p) {
      return e_reprojection(PoseDerivatives(fx.model, p), fx.camera, kp, map, kernel);
    });
  }
}

TEST_CASE("pose prior: rest zero, single-joint value, gradient") {
  Fixture fx;
  BodyParams params = fx.model.neutral_params();
  CHECK(e_pose_prior(PoseDerivatives(fx.model, params)).value == 0.0);

  params.pose[4] = Vec3(0.7, 0, 0);
  CHECK(e_pose_prior(PoseDerivatives(fx.model, params)).value == doctest::Approx(0.49));
  // root orientation is free
  params.pose[4].setZero();
  params.pose[0] = Vec3(0, 2, 0);
  CHECK(e_pose_prior(PoseDerivatives(fx.model, params)).value == 0.0);

  auto gen = test::rng(101);
  for (int trial = 0; trial < 5; ++trial) {
    check_gradient(fx.model, fx.params_near(gen), [&](const BodyParams& p) {
      return e_pose_prior(PoseDerivatives(fx.model, p));
    });
  }
}

TEST_CASE("bending prior: values and gradient") {
  Fixture fx;
  BodyParams params = fx.model.neutral_params();
  const auto term = [&](const BodyParams& p) {
    return e_bend_prior(PoseDerivatives(fx.model, p), fx.config.bending);
  };
  CHECK(term(params).value == doctest::Approx(2.0));  // exp(0) per configured DoF

  params.pose[7][0] = -std::log(2.0);  // sign -1: contributes exp(log 2) = 2
  CHECK(term(params).value == doctest::Approx(2.0 + 1.0));

  auto gen = test::rng(103);
  for (int trial = 0; trial < 5; ++trial)
    check_gradient(fx.model, fx.params_near(gen), term);
}

TEST_CASE("shape prior: values and gradient") {
  Fixture fx;
  BodyParams params = fx.model.neutral_params();
  CHECK(e_shape_prior(PoseDerivatives(fx.model, params)).value == 0.0);
  params.shape[0] = 1.0;
  const TermResult one = e_shape_prior(PoseDerivatives(fx.model, params));
  CHECK(one.value == doctest::Approx(1.0));
  CHECK(one.grad[fx.model.layout().shape_offset()] == doctest::Approx(2.0));

  auto gen = test::rng(107);
  check_gradient(fx.model, fx.params_near(gen), [&](const BodyParams& p) {
    return e_shape_prior(PoseDerivatives(fx.model, p));
  });
}

TEST_CASE("seen contact term: zeros and gradient") {
  Fixture fx;
  auto gen = test::rng(109);
  const BodyParams params = fx.params_near(gen);
  const PoseDerivatives body(fx.model, params);
  const GemanMcClure kernel(0.05);

  ContactSet contacts;
  CHECK(e_seen_contacts(body, contacts, kernel).value == 0.0);

  SeenContact exact;
  exact.body_vertex = 10;
  exact.point = body.vertices()[10];
  contacts.seen.push_back(exact);
  CHECK(e_seen_contacts(body, contacts, kernel).value < 1e-18);

  contacts.seen.clear();
  for (int v : {3, 50, 200, 411}) {
    SeenContact c;
    c.body_vertex = v;
    c.point = body.vertices()[v] + 0.04 * test::random_unit(gen);
    contacts.seen.push_back(c);
  }
  for (int trial = 0; trial < 10; ++trial) {
    check_gradient(fx.model, fx.params_near(gen), [&](const BodyParams& p) {
      return e_seen_contacts(PoseDerivatives(fx.model, p), contacts, kernel);
    });
  }
}

TEST_CASE("unseen contact term: zero at a scene vertex, naive-scan oracle") {
  Fixture fx;
  auto gen = test::rng(113);
  const BodyParams params = fx.params_near(gen);
  const PoseDerivatives body(fx.model, params);
  const GemanMcClure kernel(0.05);

  ContactSet contacts;
  CHECK(e_unseen_contacts(body, contacts, *fx.scene_index, kernel).value == 0.0);

  contacts.unseen = {5, 77, 300};
  const TermResult term = e_unseen_contacts(body, contacts, *fx.scene_index, kernel);
  double naive = 0;
  for (int v : contacts.unseen) {
    double best = std::numeric_limits<double>::infinity();
    for (const Vec3& s : fx.scene.vertices) best = std::min(best, (body.vertices()[v] - s).norm());
    naive += kernel.rho(best);
  }
  CHECK(term.value == doctest::Approx(naive).epsilon(1e-9));

  for (int trial = 0; trial < 10; ++trial) {
    check_gradient(fx.model, fx.params_near(gen), [&](const BodyParams& p) {
      return e_unseen_contacts(PoseDerivatives(fx.model, p), contacts, *fx.scene_index,
                               kernel);
    });
  }
}

TEST_CASE("temporal terms: identical frames are free; analytic value; gradient") {
  Fixture fx;
  auto gen = test::rng(127);
  const BodyParams previous = fx.params_near(gen);

  const PoseDerivatives at_same(fx.model, previous);
  const TemporalResult same = e_temporal(at_same, previous);
  CHECK(same.theta.value == 0.0);
  CHECK(same.gamma.value == 0.0);

  BodyParams shifted = previous;
  shifted.translation += Vec3(0, 0, 0.2);
  const TemporalResult moved = e_temporal(PoseDerivatives(fx.model, shifted), previous);
  CHECK(moved.gamma.value == doctest::Approx(0.04));
  CHECK(moved.theta.value == 0.0);

  const TemporalResult first = e_temporal(at_same, std::nullopt);
  CHECK(first.theta.value == 0.0);
  CHECK(first.gamma.value == 0.0);

  for (int trial = 0; trial < 5; ++trial) {
    check_gradient(fx.model, fx.params_near(gen), [&](const BodyParams& p) {
      return e_temporal(PoseDerivatives(fx.model, p), previous).theta;
    });
    check_gradient(fx.model, fx.params_near(gen), [&](const BodyParams& p) {
      return e_temporal(PoseDerivatives(fx.model, p), previous).gamma;
    });
  }
}

TEST_CASE("penetration term: analytic plane case and frozen-set gradient") {
  Fixture fx;
  const GemanMcClure kernel(0.05);

  // body entirely above the floor plane: nothing penetrates
  BodyParams above = fx.model.neutral_params();
  above.translation = Vec3(0, -0.5, 2.5);  // floor is at y=1
  const PosedBody posed_above = fx.model.pose(above);
  const PenetrationSet none =
      classify_penetrating(posed_above.mesh, fx.scene, *fx.scene_index);
  CHECK(none.pairs.empty());
  CHECK(e_penetration(PoseDerivatives(fx.model, above), none, fx.scene, kernel).value == 0.0);

  // hand-built pair 3 cm under its registered vertex
  PenetrationSet pair;
  pair.pairs = {{0, 112}};
  BodyParams params = above;
  const PoseDerivatives body(fx.model, params);
  const double dist = (body.vertices()[0] - fx.scene.vertices[112]).norm();
  const TermResult term = e_penetration(body, pair, fx.scene, kernel);
  CHECK(term.value == doctest::Approx(kernel.rho(dist)));

  auto gen = test::rng(131);
  for (int trial = 0; trial < 10; ++trial) {
    check_gradient(fx.model, fx.params_near(gen), [&](const BodyParams& p) {
      return e_penetration(PoseDerivatives(fx.model, p), pair, fx.scene, kernel);
    });
  }
}

TEST_CASE("penetration classification: plane oracle") {
  Fixture fx;
  // half-submerged: body centered at the floor plane height
  BodyParams half = fx.model.neutral_params();
  half.translation = Vec3(0, 1.0, 2.5);
  const PosedBody posed = fx.model.pose(half);
  const PenetrationSet pen = classify_penetrating(posed.mesh, fx.scene, *fx.scene_index);
  int expected = 0;
  for (const Vec3& v : posed.mesh.vertices) {
    // floor normal points toward -y; penetrating means below the plane,
    // within the classifier's range gate and depth tolerance
    const auto [sv, d] = fx.scene_index->nearest(v);
    const double depth = (fx.scene.vertices[sv] - v).dot(fx.scene.vertex_normals[sv]);
    if (d <= kPenetrationRange && depth > kPenetrationTolerance) ++expected;
  }
  CHECK(static_cast<int>(pen.pairs.size()) == expected);
  CHECK(pen.pairs.size() > 0);
}

TEST_CASE("stage energies: weighted sums, definitional identities, gradients") {
  Fixture fx;
  auto gen = test::rng(137);
  const BodyParams truth = fx.params_near(gen);
  const Keypoints2d kp = fx.keypoints_of(truth);
  const JointMap map = fx.identity_map(kp);

  StageInputs inputs;
  inputs.model = &fx.model;
  inputs.camera = &fx.camera;
  inputs.keypoints = &kp;
  inputs.joint_map = &map;
  inputs.config = &fx.config;

  // all lambdas zero: stage 1 equals the reprojection term alone
  StageConfig bare = fx.config;
  bare.lambda_theta = bare.lambda_alpha = bare.lambda_beta = 0;
  StageInputs bare_inputs = inputs;
  bare_inputs.config = &bare;
  const BodyParams params = fx.params_near(gen);
  const GemanMcClure kj(bare.sigma_joint_px);
  const double ej =
      e_reprojection(PoseDerivatives(fx.model, params), fx.camera, kp, map, kj).value;
  CHECK(stage_energy(Stage::kInitial, bare_inputs, params).value == doctest::Approx(ej));

  // stage 3 minus stage 2 equals the weighted penetration term
  ContactSet contacts;
  contacts.unseen = {10, 20};
  PenetrationSet pen;
  pen.pairs = {{0, 50}};
  StageInputs full = inputs;
  full.contacts = &contacts;
  full.scene = &fx.scene;
  full.scene_index = fx.scene_index.get();
  full.penetrating = &pen;
  full.previous = truth;

  const double e2 = stage_energy(Stage::kGlobal, full, params).value;
  const double e3 = stage_energy(Stage::kRefine, full, params).value;
  const GemanMcClure kc(fx.config.sigma_contact_m);
  const double epen =
      e_penetration(PoseDerivatives(fx.model, params), pen, fx.scene, kc).value;
  CHECK(e3 - e2 == doctest::Approx(fx.config.lambda_pen * epen).epsilon(1e-9));

  // linearity in the lambda vector
  StageConfig doubled = fx.config;
  doubled.lambda_obs *= 2;
  doubled.lambda_un *= 2;
  doubled.lambda_t_theta *= 2;
  doubled.lambda_t_gamma *= 2;
  StageInputs doubled_inputs = full;
  doubled_inputs.config = &doubled;
  const double e2_doubled = stage_energy(Stage::kGlobal, doubled_inputs, params).value;
  CHECK(e2_doubled - ej == doctest::Approx(2.0 * (e2 - ej)).epsilon(1e-9));

  // total gradient equals the finite difference of the total
  for (int trial = 0; trial < 3; ++trial) {
    check_gradient(fx.model, fx.params_near(gen), [&](const BodyParams& p) {
      return stage_energy(Stage::kRefine, full, p);
    });
  }
}

TEST_CASE("every term is non-negative at random configurations") {
  Fixture fx;
  auto gen = test::rng(139);
  const BodyParams truth = fx.params_near(gen);
  const Keypoints2d kp = fx.keypoints_of(truth);
  const JointMap map = fx.identity_map(kp);
  const GemanMcClure kj(100), kc(0.05);
  ContactSet contacts;
  contacts.unseen = {1, 2, 3};
  PenetrationSet pen;
  pen.pairs = {{4, 4}};

  for (int trial = 0; trial < 20; ++trial) {
    const BodyParams p = fx.params_near(gen, 0.6);
    const PoseDerivatives body(fx.model, p);
    CHECK(e_reprojection(body, fx.camera, kp, map, kj).value >= 0);
    CHECK(e_pose_prior(body).value >= 0);
    CHECK(e_bend_prior(body, fx.config.bending).value >= 0);
    CHECK(e_shape_prior(body).value >= 0);
    CHECK(e_unseen_contacts(body, contacts, *fx.scene_index, kc).value >= 0);
    CHECK(e_penetration(body, pen, fx.scene, kc).value >= 0);
    const TemporalResult temporal = e_temporal(body, truth);
    CHECK(temporal.theta.value >= 0);
    CHECK(temporal.gamma.value >= 0);
  }
}
