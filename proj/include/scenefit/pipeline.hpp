#pragma once

#include "scenefit/body_model.hpp"
#include "scenefit/config.hpp"
#include "scenefit/contact.hpp"
#include "scenefit/deform.hpp"
#include "scenefit/energy.hpp"
#include "scenefit/manifest.hpp"

#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace scenefit {

/// Per-frame perception inputs (keypoints, contact probabilities, subject
/// mask), produced upstream.
struct FrameInput {
  int index = 0;
  Keypoints2d keypoints;
  ContactProbMap contact_prob;
  SubjectMask mask;
};

struct ArapStepSummary {
  int controls = 0;
  int iterations = 0;
  double initial_energy = 0;
  double final_energy = 0;
  bool skipped = false;
  std::string note;
};

struct FrameReport {
  OptimizerReport stage1;
  OptimizerReport stage1_refine;
  bool stage1_unfit = false;  // all confidences zero; params copied from a neighbor
  OptimizerReport stage2;
  bool stage2_skipped = false;  // empty contact set
  std::vector<OptimizerReport> stage3;       // one inner run per outer iteration
  std::vector<ArapStepSummary> arap;         // one per outer iteration
  std::vector<double> stage3_outer_values;   // refined objective after each outer iteration
};

struct SequenceResult {
  std::vector<BodyParams> params;
  std::vector<TriMesh> scene_meshes;  // per-frame deformed scene
  std::vector<ContactSet> contacts;
  std::vector<FrameReport> reports;
};

struct PipelineConfig {
  StageConfig stage;
  DbscanConfig dbscan;
  DeformConfig deform;
  std::map<std::string, std::string> joint_map;
  std::set<int> elastic_classes;  // semantic classes reset to rest each frame
};

PipelineConfig make_pipeline_config(const RunManifest& manifest, const BodyModel& model);

/// Loads the contiguous frame_%06d inputs under the manifest's frames_dir
/// (keypoints/, contact_probs/, masks/ subdirectories).
std::vector<FrameInput> load_frames(const RunManifest& manifest);

/// Three-stage fitting over a frame sequence. Stage 1 fits each frame to
/// its keypoints independently; stage 2 registers contact-labeled body
/// vertices to raycast scene contacts sequentially; stage 3 alternates
/// scene deformation with pose refinement, carrying the deformed scene
/// from frame to frame.
class Pipeline {
 public:
  Pipeline(BodyModel model, PinholeCamera camera, TriMesh scene, SemanticLabels labels,
           PipelineConfig config);

  std::vector<BodyParams> run_stage1(const std::vector<FrameInput>& frames,
                                     std::vector<FrameReport>* reports = nullptr) const;

  struct Stage2Output {
    std::vector<BodyParams> params;
    std::vector<ContactSet> contacts;
  };
  Stage2Output run_stage2(const std::vector<FrameInput>& frames,
                          const std::vector<BodyParams>& stage1_params,
                          std::vector<FrameReport>* reports = nullptr) const;

  SequenceResult run_stage3(const std::vector<FrameInput>& frames,
                            const Stage2Output& stage2,
                            std::vector<FrameReport>* reports = nullptr) const;

  SequenceResult run_all(const std::vector<FrameInput>& frames) const;

  const BodyModel& model() const { return model_; }
  const PinholeCamera& camera() const { return camera_; }
  const TriMesh& scene() const { return scene_; }
  const SemanticLabels& labels() const { return labels_; }
  const PipelineConfig& config() const { return config_; }

  /// Initial translation for frame 0: depth from matching the projected
  /// model height to the keypoint bounding-box height.
  Vec3 initial_translation(const Keypoints2d& keypoints, const JointMap& map) const;

 private:
  Eigen::VectorXd minimize_frame(Stage stage, const StageInputs& inputs,
                                 const BodyParams& start, bool include_shape,
                                 int quasi_newton_iterations, OptimizerReport* report) const;

  BodyModel model_;
  PinholeCamera camera_;
  TriMesh scene_;
  SemanticLabels labels_;
  PipelineConfig config_;
  std::unique_ptr<Bvh> scene_bvh_;
  std::unique_ptr<PointIndex> scene_index_;
};

}  // namespace scenefit
