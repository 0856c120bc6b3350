#pragma once

#include "scenefit/body_model.hpp"
#include "scenefit/manifest.hpp"
#include "scenefit/pipeline.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace scenefit {

/// Capsule-limb humanoid with 12 joints and ~500 vertices, authored in the
/// camera convention (+y down, facing -z) so the neutral pose is upright on
/// screen for a level camera.
BodyModel make_test_body();

inline const std::vector<std::string> kScenarioIds = {"floor_walk", "sofa_sit",
                                                      "beanbag_fall", "occluded_sit"};

/// A generated scenario, both written to disk and returned in memory.
/// Directory layout:
///   scene.ply, labels.json, body_model.json
///   manifest.toml + manifest.json (mirror)
///   frames/keypoints|contact_probs|masks/frame_%06d.*
///   gt/params.json, gt/meshes/frame_%06d.ply
struct Scenario {
  std::string id;
  std::filesystem::path dir;
  RunManifest manifest;
  BodyModel model;
  TriMesh scene;                    // rest scene, camera frame
  std::vector<int> labels;
  std::vector<BodyParams> gt_params;
  std::vector<TriMesh> gt_meshes;   // per-frame ground-truth (deformed) scene
  std::vector<FrameInput> frames;
};

/// Deterministic in (id, seed): rerunning writes byte-identical files.
/// `keypoint_noise_px` adds seeded Gaussian pixel noise to the keypoints.
Scenario generate_scenario(const std::string& id, std::uint64_t seed,
                           const std::filesystem::path& out_dir,
                           double keypoint_noise_px = 0.0);

}  // namespace scenefit
