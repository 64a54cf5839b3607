// SPDX-License-Identifier: Apache-2.0
#include <chrono>
#include <cmath>

#include <boost/archive/iterators/base64_from_binary.hpp>
#include <boost/archive/iterators/binary_from_base64.hpp>
#include <boost/archive/iterators/transform_width.hpp>
#include <json.hpp>

#include "v3dg/error.hpp"
#include "v3dg/image.hpp"
#include "v3dg/viewer.hpp"

namespace v3dg {

namespace {

using json = nlohmann::json;
using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t).count();
}

bool read_vec3(const json& msg, const char* key, Eigen::Vector3d& out, std::string& err) {
  const auto it = msg.find(key);
  if (it == msg.end() || !it->is_array() || it->size() != 3) {
    err = std::string("'") + key + "' must be an array of 3 numbers";
    return false;
  }
  for (int i = 0; i < 3; ++i) {
    const json& v = (*it)[static_cast<std::size_t>(i)];
    if (!v.is_number() || !std::isfinite(v.get<double>())) {
      err = std::string("'") + key + "' must be an array of 3 finite numbers";
      return false;
    }
    out[i] = v.get<double>();
  }
  return true;
}

}  // namespace

const char* to_string(RenderMode mode) noexcept {
  switch (mode) {
    case RenderMode::kLod: return "lod";
    case RenderMode::kVanilla: return "vanilla";
    case RenderMode::kRadiusClip: return "radius-clip";
    case RenderMode::kLayerDebug: return "layer-debug";
  }
  return "lod";
}

bool parse_render_mode(std::string_view text, RenderMode& out) noexcept {
  for (RenderMode m : {RenderMode::kLod, RenderMode::kVanilla, RenderMode::kRadiusClip, RenderMode::kLayerDebug}) {
    if (text == to_string(m)) {
      out = m;
      return true;
    }
  }
  return false;
}

Camera SessionState::camera() const {
  const double f = focal_from_fov_x(fov_x, width);
  return look_at(position, target, up, width, height, f, f);
}

SessionState default_session(const LoadedScene& scene) {
  SessionState s;
  const BoundingSphere b = scene.bounding_sphere();
  const double r = b.radius > 0.0 ? b.radius : 1.0;
  s.target = b.center;
  s.position = b.center + Eigen::Vector3d(0.0, -2.5 * r, 1.2 * r);
  return s;
}

MessageOutcome handle_message(SessionState& session, std::string_view message) {
  MessageOutcome out;
  auto fail = [&](std::string why) {
    out.ok = false;
    out.error = std::move(why);
    return out;
  };

  json msg;
  try {
    msg = json::parse(message);
  } catch (const json::exception&) {
    return fail("message is not valid JSON");
  }
  if (!msg.is_object()) return fail("message must be a JSON object");
  const auto type_it = msg.find("type");
  if (type_it == msg.end() || !type_it->is_string()) return fail("message needs a string 'type'");
  const std::string type = type_it->get<std::string>();

  SessionState next = session;
  std::string err;
  if (type == "setCamera") {
    if (!read_vec3(msg, "position", next.position, err) || !read_vec3(msg, "target", next.target, err) ||
        !read_vec3(msg, "up", next.up, err)) {
      return fail(err);
    }
    const Eigen::Vector3d forward = next.target - next.position;
    if (forward.norm() < 1e-12) return fail("camera position and target coincide");
    if (next.up.norm() < 1e-12 || forward.normalized().cross(next.up.normalized()).norm() < 1e-9) {
      return fail("up vector must not be parallel to the viewing direction");
    }
  } else if (type == "setTolerance") {
    const auto it = msg.find("tau");
    if (it == msg.end() || !it->is_number()) return fail("'tau' must be a number");
    const double tau = it->get<double>();
    if (!std::isfinite(tau)) return fail("tolerance must be finite");
    if (tau < 0.0) return fail("tolerance must be ≥ 0");
    next.tau = tau;
  } else if (type == "setMode") {
    const auto it = msg.find("mode");
    if (it == msg.end() || !it->is_string()) return fail("'mode' must be a string");
    if (!parse_render_mode(it->get<std::string>(), next.mode)) {
      return fail("unknown mode '" + it->get<std::string>() + "'");
    }
  } else if (type == "setResolution") {
    const auto w = msg.find("w");
    const auto h = msg.find("h");
    if (w == msg.end() || h == msg.end() || !w->is_number_integer() || !h->is_number_integer()) {
      return fail("'w' and 'h' must be integers");
    }
    const auto wv = w->get<std::int64_t>();
    const auto hv = h->get<std::int64_t>();
    if (wv < 1 || hv < 1 || wv > kMaxViewerWidth || hv > kMaxViewerHeight) {
      return fail("resolution must be within 1x1 and 1920x1080");
    }
    next.width = static_cast<int>(wv);
    next.height = static_cast<int>(hv);
  } else if (type == "requestFrame") {
    out.frame_requested = true;
    return out;
  } else {
    return fail("unknown message type '" + type + "'");
  }
  session = next;
  out.state_changed = true;
  return out;
}

Eigen::Vector3f layer_palette(std::uint32_t layer) {
  static const Eigen::Vector3f kColors[] = {
      {0.90f, 0.10f, 0.10f}, {0.95f, 0.60f, 0.10f}, {0.90f, 0.90f, 0.15f}, {0.20f, 0.80f, 0.20f},
      {0.10f, 0.75f, 0.85f}, {0.15f, 0.30f, 0.90f}, {0.60f, 0.20f, 0.85f}, {0.90f, 0.30f, 0.70f},
  };
  return kColors[layer % (sizeof(kColors) / sizeof(kColors[0]))];
}

Frame render_frame(const LoadedScene& scene, const SessionState& session, std::uint64_t frame_id) {
  Frame f;
  f.frame_id = frame_id;
  f.stats.tau = session.tau;
  f.stats.mode = session.mode;
  const Camera cam = session.camera();

  auto start = Clock::now();
  const SelectionResult sel =
      session.mode == RenderMode::kLod || session.mode == RenderMode::kLayerDebug ? select_scene(scene, cam, session.tau)
                                                                                  : select_finest(scene);
  f.stats.select_ms = ms_since(start);

  start = Clock::now();
  std::vector<std::uint32_t> layers;
  GaussianSet gs = gather(scene, sel, session.mode == RenderMode::kLayerDebug ? &layers : nullptr);
  if (session.mode == RenderMode::kRadiusClip) gs = radius_clip_filter(gs, cam, session.clip);
  if (session.mode == RenderMode::kLayerDebug) {
    for (std::size_t i = 0; i < gs.size(); ++i) gs.colors[i] = layer_palette(layers[i]);
  }
  const ImageRGBA img = render(gs, cam);
  f.stats.render_ms = ms_since(start);

  f.stats.selected_count = gs.size();
  f.stats.resident_count = sel.resident_count;
  f.stats.percentage = sel.resident_count == 0
                           ? 0.0
                           : 100.0 * static_cast<double>(gs.size()) / static_cast<double>(sel.resident_count);
  f.png = encode_png(img);
  return f;
}

std::string base64_encode(const std::vector<std::uint8_t>& bytes) {
  using namespace boost::archive::iterators;
  using It = base64_from_binary<transform_width<std::vector<std::uint8_t>::const_iterator, 6, 8>>;
  std::string out(It(bytes.begin()), It(bytes.end()));
  out.append((3 - bytes.size() % 3) % 3, '=');
  return out;
}

std::vector<std::uint8_t> base64_decode(std::string_view text) {
  using namespace boost::archive::iterators;
  std::size_t pad = 0;
  while (!text.empty() && text.back() == '=') {
    text.remove_suffix(1);
    ++pad;
  }
  using It = transform_width<binary_from_base64<std::string_view::const_iterator>, 8, 6>;
  try {
    std::vector<std::uint8_t> out(It(text.begin()), It(text.end()));
    return out;
  } catch (const std::exception&) {
    raise(ErrorKind::kFormat, "invalid base64 text");
  }
}

std::string frame_message(const Frame& frame) {
  json msg = {
      {"type", "frame"},
      {"frameId", frame.frame_id},
      {"stats",
       {{"selectedCount", frame.stats.selected_count},
        {"residentCount", frame.stats.resident_count},
        {"percentage", frame.stats.percentage},
        {"selectMs", frame.stats.select_ms},
        {"renderMs", frame.stats.render_ms},
        {"tau", frame.stats.tau},
        {"mode", to_string(frame.stats.mode)}}},
      {"png", base64_encode(frame.png)},
  };
  return msg.dump();
}

std::string error_message(std::string_view message) {
  return json{{"type", "error"}, {"message", std::string(message)}}.dump();
}

std::string scene_metadata(const LoadedScene& scene) {
  json assets = json::array();
  for (const auto& a : scene.assets) {
    assets.push_back({{"id", a.id},
                      {"layers", a.bundle->layer_count},
                      {"clusters", a.bundle->clusters.size()},
                      {"gaussians", a.bundle->gaussians_in_layer(0)}});
  }
  Eigen::Vector3d lo = Eigen::Vector3d::Zero();
  Eigen::Vector3d hi = Eigen::Vector3d::Zero();
  if (!scene.instances.empty()) scene.bounding_box(lo, hi);
  const BoundingSphere s = scene.bounding_sphere();
  json msg = {
      {"assets", assets},
      {"instanceCount", scene.instances.size()},
      {"residentCount", scene.resident_count()},
      {"boundingBox", {{"min", {lo.x(), lo.y(), lo.z()}}, {"max", {hi.x(), hi.y(), hi.z()}}}},
      {"boundingSphere", {{"center", {s.center.x(), s.center.y(), s.center.z()}}, {"radius", s.radius}}},
  };
  return msg.dump();
}

}  // namespace v3dg
