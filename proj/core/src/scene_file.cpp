// SPDX-License-Identifier: Apache-2.0
#include "v3dg/scene_file.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "v3dg/bundle.hpp"
#include "v3dg/error.hpp"

namespace v3dg {

namespace {

using nlohmann::json;

template <int N>
Eigen::Matrix<double, N, 1> read_vector(const json& j, const char* key, std::size_t index) {
  const json& arr = j.at(key);
  if (!arr.is_array() || arr.size() != N) {
    raise(ErrorKind::kValidation, "instance " + std::to_string(index) + ": '" + key +
                                      "' must be an array of " + std::to_string(N) + " numbers");
  }
  Eigen::Matrix<double, N, 1> v;
  for (int k = 0; k < N; ++k) v[k] = arr[static_cast<std::size_t>(k)].get<double>();
  return v;
}

}  // namespace

Scene parse_scene(const std::string& json_text, const std::filesystem::path& base_dir) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    raise(ErrorKind::kFormat, std::string("scene JSON: ") + e.what());
  }
  if (!doc.is_object()) raise(ErrorKind::kFormat, "scene JSON must be an object");

  Scene scene;
  try {
    if (doc.contains("assets")) {
      for (const auto& [id, path] : doc.at("assets").items()) {
        std::filesystem::path p = path.get<std::string>();
        scene.assets[id] = p.is_absolute() ? p : base_dir / p;
      }
    }
    if (doc.contains("instances")) {
      std::size_t index = 0;
      for (const json& ij : doc.at("instances")) {
        Instance inst;
        inst.asset = ij.at("asset").get<std::string>();
        if (!scene.assets.contains(inst.asset)) {
          raise(ErrorKind::kReference,
                "instance " + std::to_string(index) + " references unknown asset '" + inst.asset + "'");
        }
        if (ij.contains("translation")) inst.translation = read_vector<3>(ij, "translation", index);
        if (ij.contains("rotationQuat")) {
          const Eigen::Vector4d q = read_vector<4>(ij, "rotationQuat", index);
          if (!(q.norm() > 0) || !q.allFinite()) {
            raise(ErrorKind::kValidation, "instance " + std::to_string(index) + ": zero rotation quaternion");
          }
          inst.rotation = q.normalized();
        }
        if (ij.contains("scale")) inst.scale = ij.at("scale").get<double>();
        if (!(inst.scale > 0) || !std::isfinite(inst.scale)) {
          raise(ErrorKind::kValidation, "instance " + std::to_string(index) + ": scale must be > 0");
        }
        if (!inst.translation.allFinite()) {
          raise(ErrorKind::kValidation, "instance " + std::to_string(index) + ": non-finite translation");
        }
        scene.instances.push_back(std::move(inst));
        ++index;
      }
    }
  } catch (const json::exception& e) {
    raise(ErrorKind::kFormat, std::string("scene JSON: ") + e.what());
  }
  return scene;
}

Scene load_scene(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) raise(ErrorKind::kIo, "cannot open scene file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_scene(ss.str(), path.parent_path());
}

std::string scene_to_json(const Scene& scene) {
  json doc;
  doc["assets"] = json::object();
  for (const auto& [id, path] : scene.assets) doc["assets"][id] = path.string();
  doc["instances"] = json::array();
  for (const Instance& inst : scene.instances) {
    json ij;
    ij["asset"] = inst.asset;
    ij["translation"] = {inst.translation.x(), inst.translation.y(), inst.translation.z()};
    ij["rotationQuat"] = {inst.rotation[0], inst.rotation[1], inst.rotation[2], inst.rotation[3]};
    ij["scale"] = inst.scale;
    doc["instances"].push_back(std::move(ij));
  }
  return doc.dump(2);
}

void write_scene(const Scene& scene, const std::filesystem::path& path) {
  const std::string text = scene_to_json(scene);
  write_file_atomic(path, text.data(), text.size());
}

}  // namespace v3dg
