#include "scenefit/pipeline.hpp"

#include "scenefit/formats.hpp"
#include "scenefit/log.hpp"
#include "scenefit/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace scenefit {

PipelineConfig make_pipeline_config(const RunManifest& manifest, const BodyModel& model) {
  PipelineConfig config;
  config.stage = manifest.stage;
  config.stage.bending = manifest.resolve_bending(model.joint_names);
  config.dbscan = manifest.dbscan;
  config.deform = manifest.deform;
  config.joint_map = manifest.joint_map;
  config.elastic_classes = manifest.elastic_class_ids();
  return config;
}

std::vector<FrameInput> load_frames(const RunManifest& manifest) {
  namespace fs = std::filesystem;
  const fs::path frames = manifest.resolve(manifest.frames_dir);
  std::vector<FrameInput> out;
  for (int index = 0;; ++index) {
    const fs::path kp_path = frames / "keypoints" / frame_name(index, ".json");
    if (!fs::exists(kp_path)) break;
    FrameInput frame;
    frame.index = index;
    frame.keypoints = load_keypoints(kp_path);

    const fs::path prob_json = frames / "contact_probs" / frame_name(index, ".json");
    const fs::path prob_f32 = frames / "contact_probs" / frame_name(index, ".f32");
    if (fs::exists(prob_json)) frame.contact_prob = load_contact_probs(prob_json);
    else if (fs::exists(prob_f32)) frame.contact_prob = load_contact_probs(prob_f32);
    else throw std::runtime_error("missing contact probabilities for frame " +
                                  std::to_string(index) + " under " +
                                  (frames / "contact_probs").string());

    const fs::path mask_pgm = frames / "masks" / frame_name(index, ".pgm");
    const fs::path mask_png = frames / "masks" / frame_name(index, ".png");
    if (fs::exists(mask_pgm)) frame.mask = load_mask(mask_pgm);
    else if (fs::exists(mask_png)) frame.mask = load_mask(mask_png);
    else throw std::runtime_error("missing mask for frame " + std::to_string(index) +
                                  " under " + (frames / "masks").string());
    out.push_back(std::move(frame));
  }
  return out;
}

Pipeline::Pipeline(BodyModel model, PinholeCamera camera, TriMesh scene,
                   SemanticLabels labels, PipelineConfig config)
    : model_(std::move(model)), camera_(camera), scene_(std::move(scene)),
      labels_(std::move(labels)), config_(std::move(config)) {
  model_.validate();
  camera_.validate();
  config_.stage.validate();
  config_.dbscan.validate();
  config_.deform.validate();
  scene_.validate();
  if (!scene_.has_normals()) scene_.update_normals();
  labels_.validate(scene_.vertex_count());
  scene_bvh_ = std::make_unique<Bvh>(scene_);
  scene_index_ = std::make_unique<PointIndex>(scene_.vertices);
}

Vec3 Pipeline::initial_translation(const Keypoints2d& keypoints, const JointMap& map) const {
  const std::vector<Vec3> rest = model_.rest_joints(Eigen::VectorXd::Zero(model_.shape_dim()));

  Vec3 model_lo = Vec3::Constant(std::numeric_limits<double>::infinity());
  Vec3 model_hi = -model_lo;
  Vec2 px_lo = Vec2::Constant(std::numeric_limits<double>::infinity());
  Vec2 px_hi = -px_lo;
  int used = 0;
  for (const auto& [k, j] : map.pairs) {
    if (keypoints.confidence[k] <= 0) continue;
    model_lo = model_lo.cwiseMin(rest[j]);
    model_hi = model_hi.cwiseMax(rest[j]);
    px_lo = px_lo.cwiseMin(keypoints.pixels[k]);
    px_hi = px_hi.cwiseMax(keypoints.pixels[k]);
    ++used;
  }
  if (used < 2) return Vec3(0, 0, 2.5);  // nothing to measure against

  const double model_height = model_hi[1] - model_lo[1];
  const double pixel_height = px_hi[1] - px_lo[1];
  double depth = 2.5;
  if (model_height > 1e-6 && pixel_height > 1.0)
    depth = camera_.fy * model_height / pixel_height;
  depth = std::clamp(depth, 0.5, 20.0);

  const Vec3 model_center = 0.5 * (model_lo + model_hi);
  const Vec2 px_center = 0.5 * (px_lo + px_hi);
  return Vec3((px_center[0] - camera_.cx) / camera_.fx * depth - model_center[0],
              (px_center[1] - camera_.cy) / camera_.fy * depth - model_center[1],
              depth - model_center[2]);
}

Eigen::VectorXd Pipeline::minimize_frame(Stage stage, const StageInputs& inputs,
                                         const BodyParams& start, bool include_shape,
                                         int quasi_newton_iterations,
                                         OptimizerReport* report) const {
  const ParamLayout layout = model_.layout();
  Eigen::VectorXd full = flatten(start);

  std::vector<int> active;
  for (int i = 0; i < layout.translation_offset() + 3; ++i) active.push_back(i);
  if (include_shape) {
    for (int s = 0; s < layout.shape_dims; ++s) active.push_back(layout.shape_offset() + s);
  }

  Eigen::VectorXd x0(active.size());
  for (std::size_t i = 0; i < active.size(); ++i) x0[static_cast<int>(i)] = full[active[i]];

  Eigen::VectorXd work = full;
  const Objective objective = [&](const Eigen::VectorXd& x, Eigen::VectorXd& grad) {
    for (std::size_t i = 0; i < active.size(); ++i) work[active[i]] = x[static_cast<int>(i)];
    const TermResult result = stage_energy(stage, inputs, unflatten(layout, work));
    grad.resize(x.size());
    for (std::size_t i = 0; i < active.size(); ++i)
      grad[static_cast<int>(i)] = result.grad[active[i]];
    return result.value;
  };

  Eigen::VectorXd solution;
  if (stage == Stage::kInitial) {
    QuasiNewtonConfig qn = config_.stage.stage1_optimizer();
    qn.max_iterations = quasi_newton_iterations;
    solution = minimize_quasi_newton(objective, x0, qn, report);
  } else {
    const AdamConfig adam = stage == Stage::kGlobal ? config_.stage.stage2_optimizer()
                                                    : config_.stage.stage3_optimizer();
    solution = minimize_adaptive(objective, x0, adam, report);
  }
  for (std::size_t i = 0; i < active.size(); ++i) full[active[i]] = solution[static_cast<int>(i)];
  return full;
}

namespace {

// Unfit frames take the params of the nearest fit frame, earlier preferred.
void fill_unfit(std::vector<BodyParams>& params, const std::vector<char>& fit) {
  const int n = static_cast<int>(params.size());
  for (int t = 0; t < n; ++t) {
    if (fit[t]) continue;
    int best = -1;
    for (int d = 1; d < n && best < 0; ++d) {
      if (t - d >= 0 && fit[t - d]) best = t - d;
      else if (t + d < n && fit[t + d]) best = t + d;
    }
    if (best >= 0) params[t] = params[best];
  }
}

}  // namespace

std::vector<BodyParams> Pipeline::run_stage1(const std::vector<FrameInput>& frames,
                                             std::vector<FrameReport>* reports) const {
  const int n = static_cast<int>(frames.size());
  if (reports) reports->assign(n, FrameReport{});
  std::vector<BodyParams> out(n, model_.neutral_params());
  if (n == 0) return out;

  const ParamLayout layout = model_.layout();
  std::vector<char> fit(n, 0);
  std::optional<Eigen::VectorXd> warm;

  for (int t = 0; t < n; ++t) {
    const Keypoints2d& keypoints = frames[t].keypoints;
    keypoints.validate();
    const JointMap map = resolve_joint_map(config_.joint_map, keypoints, model_);
    double total_confidence = 0;
    for (const auto& [k, j] : map.pairs) total_confidence += keypoints.confidence[k];
    if (map.pairs.empty() || total_confidence <= 0) {
      log_warn("stage 1: frame ", frames[t].index, " has no usable keypoints; marked unfit");
      if (reports) (*reports)[t].stage1_unfit = true;
      continue;
    }

    StageInputs inputs;
    inputs.model = &model_;
    inputs.camera = &camera_;
    inputs.keypoints = &keypoints;
    inputs.joint_map = &map;
    inputs.config = &config_.stage;

    // Frame 0 (and any cold start) races a few coarse hypotheses: the
    // height-matching depth heuristic assumes an extended body, so seated
    // subjects need a nearer, pre-bent candidate to reach the right basin.
    BodyParams start = model_.neutral_params();
    if (warm) {
      start = unflatten(layout, *warm);
    } else {
      const Vec3 heuristic = initial_translation(keypoints, map);
      std::vector<BodyParams> candidates;
      for (const double depth_scale : {1.0, 0.6}) {
        for (const bool seated : {false, true}) {
          BodyParams candidate = model_.neutral_params();
          candidate.translation = heuristic;
          candidate.translation[2] *= depth_scale;
          if (seated) {
            for (const char* name : {"l_hip", "r_hip"}) {
              const auto it = std::find(model_.joint_names.begin(),
                                        model_.joint_names.end(), name);
              if (it != model_.joint_names.end())
                candidate.pose[it - model_.joint_names.begin()] = Vec3(-M_PI / 2, 0, 0);
            }
            for (const char* name : {"l_knee", "r_knee"}) {
              const auto it = std::find(model_.joint_names.begin(),
                                        model_.joint_names.end(), name);
              if (it != model_.joint_names.end())
                candidate.pose[it - model_.joint_names.begin()] = Vec3(M_PI / 2, 0, 0);
            }
          }
          candidates.push_back(std::move(candidate));
        }
      }
      double best_value = std::numeric_limits<double>::infinity();
      for (const BodyParams& candidate : candidates) {
        OptimizerReport probe;
        const Eigen::VectorXd probed =
            minimize_frame(Stage::kInitial, inputs, candidate, false, 30, &probe);
        if (probe.final_value < best_value) {
          best_value = probe.final_value;
          start = unflatten(layout, probed);
        }
      }
    }

    const Eigen::VectorXd full =
        minimize_frame(Stage::kInitial, inputs, start, config_.stage.optimize_shape,
                       config_.stage.stage1_iterations,
                       reports ? &(*reports)[t].stage1 : nullptr);
    out[t] = unflatten(layout, full);
    fit[t] = 1;
    warm = full;
  }

  if (std::find(fit.begin(), fit.end(), 1) == fit.end()) {
    log_warn("stage 1: no frame could be fit; returning neutral parameters");
    return out;
  }
  fill_unfit(out, fit);

  if (config_.stage.optimize_shape && config_.stage.shared_shape) {
    Eigen::VectorXd mean_shape = Eigen::VectorXd::Zero(model_.shape_dim());
    int fit_count = 0;
    for (int t = 0; t < n; ++t) {
      if (fit[t]) {
        mean_shape += out[t].shape;
        ++fit_count;
      }
    }
    mean_shape /= fit_count;

    for (int t = 0; t < n; ++t) {
      if (!fit[t]) continue;
      const Keypoints2d& keypoints = frames[t].keypoints;
      const JointMap map = resolve_joint_map(config_.joint_map, keypoints, model_);
      BodyParams start = out[t];
      start.shape = mean_shape;

      StageInputs inputs;
      inputs.model = &model_;
      inputs.camera = &camera_;
      inputs.keypoints = &keypoints;
      inputs.joint_map = &map;
      inputs.config = &config_.stage;

      const Eigen::VectorXd full = minimize_frame(
          Stage::kInitial, inputs, start, false, config_.stage.stage1_refine_iterations,
          reports ? &(*reports)[t].stage1_refine : nullptr);
      out[t] = unflatten(layout, full);
    }
    fill_unfit(out, fit);
  }
  return out;
}

Pipeline::Stage2Output Pipeline::run_stage2(const std::vector<FrameInput>& frames,
                                            const std::vector<BodyParams>& stage1_params,
                                            std::vector<FrameReport>* reports) const {
  const int n = static_cast<int>(frames.size());
  if (stage1_params.size() != frames.size())
    throw std::invalid_argument("stage 2: stage-1 parameter count mismatch");
  if (reports && static_cast<int>(reports->size()) != n) reports->assign(n, FrameReport{});

  Stage2Output out;
  out.params = stage1_params;
  out.contacts.resize(n);

  const ParamLayout layout = model_.layout();
  std::optional<BodyParams> previous;

  for (int t = 0; t < n; ++t) {
    frames[t].contact_prob.validate(model_.vertex_count());
    const PosedBody posed = model_.pose(stage1_params[t]);
    const std::vector<int> contact_vertices =
        threshold_contacts(frames[t].contact_prob, config_.stage.contact_threshold);
    out.contacts[t] = find_scene_contacts(posed.mesh, contact_vertices, camera_,
                                          frames[t].mask, *scene_bvh_, scene_,
                                          config_.dbscan);

    if (out.contacts[t].empty()) {
      log_info("stage 2: frame ", frames[t].index,
               " has no contacts; passing stage-1 parameters through");
      if (reports) (*reports)[t].stage2_skipped = true;
      previous = out.params[t];
      continue;
    }

    const Keypoints2d& keypoints = frames[t].keypoints;
    const JointMap map = resolve_joint_map(config_.joint_map, keypoints, model_);

    StageInputs inputs;
    inputs.model = &model_;
    inputs.camera = &camera_;
    inputs.keypoints = &keypoints;
    inputs.joint_map = &map;
    inputs.contacts = &out.contacts[t];
    inputs.scene = &scene_;
    inputs.scene_index = scene_index_.get();
    inputs.previous = previous;
    inputs.config = &config_.stage;

    const Eigen::VectorXd full =
        minimize_frame(Stage::kGlobal, inputs, stage1_params[t],
                       config_.stage.optimize_shape_stage2, 0,
                       reports ? &(*reports)[t].stage2 : nullptr);
    out.params[t] = unflatten(layout, full);
    previous = out.params[t];
  }
  return out;
}

SequenceResult Pipeline::run_stage3(const std::vector<FrameInput>& frames,
                                    const Stage2Output& stage2,
                                    std::vector<FrameReport>* reports) const {
  const int n = static_cast<int>(frames.size());
  if (stage2.params.size() != frames.size() || stage2.contacts.size() != frames.size())
    throw std::invalid_argument("stage 3: stage-2 output size mismatch");
  if (reports && static_cast<int>(reports->size()) != n) reports->assign(n, FrameReport{});

  SequenceResult result;
  result.params = stage2.params;
  result.contacts = stage2.contacts;
  result.scene_meshes.reserve(n);
  const ParamLayout layout = model_.layout();

  TriMesh scene_current = scene_;
  std::optional<BodyParams> previous;

  for (int t = 0; t < n; ++t) {
    if (!config_.elastic_classes.empty()) {
      bool changed = false;
      for (int v = 0; v < scene_current.vertex_count(); ++v) {
        if (config_.elastic_classes.count(labels_.classes[v]) &&
            scene_current.vertices[v] != scene_.vertices[v]) {
          scene_current.vertices[v] = scene_.vertices[v];
          changed = true;
        }
      }
      if (changed) scene_current.update_normals();
    }

    BodyParams params = stage2.params[t];
    const Keypoints2d& keypoints = frames[t].keypoints;
    const JointMap map = resolve_joint_map(config_.joint_map, keypoints, model_);
    const std::vector<int> contact_vertices =
        threshold_contacts(frames[t].contact_prob, config_.stage.contact_threshold);

    // The frame's deformation is re-solved from its starting mesh with the
    // controls accumulated over the outer iterations; chaining solve upon
    // solve instead would stack dents and creep. The starting mesh still
    // carries earlier frames, so persistent deformation accumulates across
    // the sequence only.
    const TriMesh frame_start = scene_current;
    std::map<int, std::pair<double, Vec3>> frame_controls;  // depth, target
    std::set<int> frame_movable;

    for (int outer = 0; outer < config_.stage.stage3_outer_iterations; ++outer) {
      PosedBody posed = model_.pose(params);
      PointIndex index(scene_current.vertices);

      ArapStepSummary arap_summary;
      const std::vector<int> movable =
          movable_region(scene_current, labels_, posed.mesh, index, config_.deform);
      ControlTargets controls;
      if (!movable.empty())
        controls = select_controls(scene_current, posed.mesh, contact_vertices, movable, index);
      arap_summary.controls = static_cast<int>(controls.controls.size());

      // Deepest claim wins across the frame's outer iterations: a control
      // only moves if the refined pose penetrates past its stored target.
      // Monotone updates keep the dent from chasing optimizer wander, while
      // still tracking the pose as it settles.
      bool changed = false;
      for (std::size_t i = 0; i < controls.controls.size(); ++i) {
        const int vertex = controls.controls[i];
        const auto it = frame_controls.find(vertex);
        if (it == frame_controls.end()) {
          frame_controls.emplace(vertex,
                                 std::make_pair(controls.depths[i], controls.targets[i]));
          changed = true;
        } else if (controls.depths[i] > it->second.first + 1e-6) {
          it->second = {controls.depths[i], controls.targets[i]};
          changed = true;
        }
      }
      frame_movable.insert(movable.begin(), movable.end());

      if (changed && !frame_controls.empty()) {
        ControlTargets merged;
        for (const auto& [vertex, claim] : frame_controls) {
          merged.controls.push_back(vertex);
          merged.targets.push_back(claim.second);
          merged.depths.push_back(claim.first);
        }
        try {
          const ArapProblem problem = build_arap_problem(
              frame_start, {frame_movable.begin(), frame_movable.end()}, merged,
              config_.deform);
          ArapReport arap_report;
          scene_current.vertices = arap_solve(problem, &arap_report);
          scene_current.update_normals();
          index = PointIndex(scene_current.vertices);
          arap_summary.iterations = arap_report.iterations;
          arap_summary.initial_energy = arap_report.energy_trace.front();
          arap_summary.final_energy = arap_report.energy_trace.back();
        } catch (const std::exception& e) {
          arap_summary.skipped = true;
          arap_summary.note = e.what();
          log_warn("stage 3: frame ", frames[t].index, ", outer ", outer,
                   ": deformation skipped (", e.what(), ")");
        }
      } else {
        arap_summary.skipped = true;
        arap_summary.note = frame_controls.empty() ? "no controls" : "controls unchanged";
      }

      const PenetrationSet penetrating =
          classify_penetrating(posed.mesh, scene_current, index);

      StageInputs inputs;
      inputs.model = &model_;
      inputs.camera = &camera_;
      inputs.keypoints = &keypoints;
      inputs.joint_map = &map;
      inputs.contacts = &stage2.contacts[t];
      inputs.scene = &scene_current;
      inputs.scene_index = &index;
      inputs.penetrating = &penetrating;
      inputs.previous = previous;
      inputs.config = &config_.stage;

      OptimizerReport inner;
      const Eigen::VectorXd full = minimize_frame(Stage::kRefine, inputs, params, false, 0,
                                                  &inner);
      params = unflatten(layout, full);

      if (reports) {
        (*reports)[t].stage3.push_back(inner);
        (*reports)[t].arap.push_back(arap_summary);
        // Objective value at the accepted parameters, under this
        // iteration's (frozen) collision classification.
        (*reports)[t].stage3_outer_values.push_back(inner.final_value);
      }
    }

    // Final conforming passes: with the pose settled, re-select controls and
    // let still-penetrating claims re-target until the surface meets the
    // final body. No pose step follows, so this cannot feed back into the
    // pose, and each pass only deepens claims toward the fixed body hull.
    for (int conform = 0; conform < 4; ++conform) {
      const PosedBody posed = model_.pose(params);
      PointIndex index(scene_current.vertices);
      const std::vector<int> movable =
          movable_region(scene_current, labels_, posed.mesh, index, config_.deform);
      ControlTargets controls;
      if (!movable.empty())
        controls = select_controls(scene_current, posed.mesh, contact_vertices, movable, index);
      bool changed = false;
      for (std::size_t i = 0; i < controls.controls.size(); ++i) {
        const int vertex = controls.controls[i];
        const auto it = frame_controls.find(vertex);
        if (it == frame_controls.end() || controls.depths[i] > 1e-3) {
          frame_controls[vertex] = {controls.depths[i], controls.targets[i]};
          changed = true;
        }
      }
      frame_movable.insert(movable.begin(), movable.end());
      ArapStepSummary arap_summary;
      arap_summary.controls = static_cast<int>(frame_controls.size());
      if (changed && !frame_controls.empty()) {
        ControlTargets merged;
        for (const auto& [vertex, claim] : frame_controls) {
          merged.controls.push_back(vertex);
          merged.targets.push_back(claim.second);
          merged.depths.push_back(claim.first);
        }
        try {
          const ArapProblem problem = build_arap_problem(
              frame_start, {frame_movable.begin(), frame_movable.end()}, merged,
              config_.deform);
          ArapReport arap_report;
          scene_current.vertices = arap_solve(problem, &arap_report);
          scene_current.update_normals();
          arap_summary.iterations = arap_report.iterations;
          arap_summary.initial_energy = arap_report.energy_trace.front();
          arap_summary.final_energy = arap_report.energy_trace.back();
        } catch (const std::exception& e) {
          arap_summary.skipped = true;
          arap_summary.note = e.what();
          log_warn("stage 3: frame ", frames[t].index,
                   ": final deformation skipped (", e.what(), ")");
        }
      } else {
        arap_summary.skipped = true;
        arap_summary.note = "no update";
      }
      if (reports) (*reports)[t].arap.push_back(arap_summary);
      if (!changed) break;
    }

    result.params[t] = params;
    result.scene_meshes.push_back(scene_current);
    previous = params;
  }

  if (reports) result.reports = *reports;
  return result;
}

SequenceResult Pipeline::run_all(const std::vector<FrameInput>& frames) const {
  std::vector<FrameReport> reports;
  const std::vector<BodyParams> stage1 = run_stage1(frames, &reports);
  const Stage2Output stage2 = run_stage2(frames, stage1, &reports);
  SequenceResult result = run_stage3(frames, stage2, &reports);
  result.reports = reports;
  return result;
}

}  // namespace scenefit
