#pragma once

#include "scenefit/pipeline.hpp"

#include <filesystem>

namespace scenefit {

/// Results directory layout:
///   params.json              fitted per-frame body parameters
///   contacts/frame_%06d.json seen/unseen contact sets
///   meshes/frame_%06d.ply    per-frame deformed scene
///   reports/frame_%06d.json  per-stage optimizer summaries
///   summary.json             frame count and mean diagnostics
void write_results(const SequenceResult& result, const std::filesystem::path& dir);

std::vector<BodyParams> load_result_params(const std::filesystem::path& dir);
TriMesh load_result_mesh(const std::filesystem::path& dir, int frame);
ContactSet load_result_contacts(const std::filesystem::path& dir, int frame);
int result_frame_count(const std::filesystem::path& dir);

}  // namespace scenefit
