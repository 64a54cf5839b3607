// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <string>

#include "v3dg/scene.hpp"

namespace v3dg {

/// Parses a JSON scene description:
///   {"assets": {"id": "path.v3dg"},
///    "instances": [{"asset": "id", "translation": [x, y, z],
///                   "rotationQuat": [w, x, y, z], "scale": s}]}
/// Relative bundle paths resolve against the scene file's directory.
/// Missing instance fields default to the identity placement.
Scene load_scene(const std::filesystem::path& path);
Scene parse_scene(const std::string& json_text, const std::filesystem::path& base_dir);

/// Inverse of load_scene; asset paths are written as given.
void write_scene(const Scene& scene, const std::filesystem::path& path);
std::string scene_to_json(const Scene& scene);

}  // namespace v3dg
