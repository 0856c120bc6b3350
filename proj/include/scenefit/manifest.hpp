#pragma once

#include "scenefit/camera.hpp"
#include "scenefit/config.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace scenefit {

/// Everything a run needs: input paths, camera intrinsics, stage weights
/// and schedules, and the clustering/deformation settings. Loadable from
/// the TOML-style config or its JSON mirror; unknown keys are rejected.
struct RunManifest {
  int version = 1;
  std::uint64_t seed = 0;

  std::filesystem::path scene_path;
  std::filesystem::path labels_path;
  std::filesystem::path body_model_path;
  std::filesystem::path frames_dir;
  std::filesystem::path output_dir;

  PinholeCamera camera;
  StageConfig stage;
  DbscanConfig dbscan;
  DeformConfig deform;

  std::vector<std::string> class_names;             // semantic id -> name
  std::vector<std::string> deformable_class_names;  // default sofa, bed
  std::vector<std::string> elastic_class_names;     // reset each frame

  std::map<std::string, std::string> joint_map;  // keypoint name -> joint name
  std::map<std::string, std::string> bending;    // joint name -> signed axis, e.g. "+x"

  /// Directory the manifest was loaded from; relative paths resolve here.
  std::filesystem::path base_dir;

  std::filesystem::path resolve(const std::filesystem::path& p) const {
    return p.is_absolute() ? p : base_dir / p;
  }

  int class_id(const std::string& name) const;  // -1 when unknown
  std::set<int> deformable_class_ids() const;
  std::set<int> elastic_class_ids() const;
  std::vector<BendDof> resolve_bending(const std::vector<std::string>& joint_names) const;
};

/// Parses, validates, applies defaults, and checks that every referenced
/// input path exists. Dispatches on extension (.toml / .json).
RunManifest load_manifest(const std::filesystem::path& path);

void save_manifest_toml(const RunManifest& manifest, const std::filesystem::path& path);
void save_manifest_json(const RunManifest& manifest, const std::filesystem::path& path);

/// Minimal TOML reader covering this project's configs: [section] headers,
/// bare keys, strings, booleans, integers, floats, and flat arrays.
nlohmann::json parse_toml(const std::string& text, const std::string& origin);

}  // namespace scenefit
