#pragma once

#include "scenefit/geometry.hpp"

#include <filesystem>

namespace scenefit {

/// ASCII Wavefront OBJ, `v` and `f` records. Normals are recomputed on load.
TriMesh load_obj(const std::filesystem::path& path);
void save_obj(const TriMesh& mesh, const std::filesystem::path& path);

/// Binary little-endian PLY with float or double vertex positions; writes
/// double so geometry round-trips exactly.
TriMesh load_ply(const std::filesystem::path& path);
void save_ply(const TriMesh& mesh, const std::filesystem::path& path);

/// Dispatch on extension (.obj / .ply).
TriMesh load_mesh(const std::filesystem::path& path);
void save_mesh(const TriMesh& mesh, const std::filesystem::path& path);

}  // namespace scenefit
