#pragma once

#include "scenefit/body_model.hpp"
#include "scenefit/contact.hpp"
#include "scenefit/energy.hpp"

#include <filesystem>
#include <vector>

namespace scenefit {

/// Per-frame 2D keypoints: {"joint_names": [...], "keypoints": [[x,y,conf],...]}.
Keypoints2d load_keypoints(const std::filesystem::path& path);
void save_keypoints(const Keypoints2d& keypoints, const std::filesystem::path& path);

/// Contact probabilities: JSON {"contact_prob": [...]} or a raw
/// little-endian float32 array (.f32).
ContactProbMap load_contact_probs(const std::filesystem::path& path);
void save_contact_probs(const ContactProbMap& probs, const std::filesystem::path& path);

/// Subject masks: binary PGM (P5), ASCII PGM (P2), or PNG when built with
/// libpng. Any nonzero pixel counts as subject.
SubjectMask load_mask(const std::filesystem::path& path);
void save_mask_pgm(const SubjectMask& mask, const std::filesystem::path& path);
#ifdef SCENEFIT_WITH_PNG
void save_mask_png(const SubjectMask& mask, const std::filesystem::path& path);
#endif

/// Semantic labels: JSON {"labels": [...]} or raw little-endian int32 (.i32).
std::vector<int> load_labels(const std::filesystem::path& path);
void save_labels(const std::vector<int>& labels, const std::filesystem::path& path);

/// Body parameter sequences, one entry per frame.
std::vector<BodyParams> load_params_sequence(const std::filesystem::path& path);
void save_params_sequence(const std::vector<BodyParams>& sequence,
                          const std::filesystem::path& path);

/// frame_%06d naming convention shared by all per-frame inputs/outputs.
std::string frame_name(int index, const std::string& extension);

}  // namespace scenefit
