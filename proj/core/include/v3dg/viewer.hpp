// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "v3dg/lod_select.hpp"

namespace v3dg {

enum class RenderMode { kLod, kVanilla, kRadiusClip, kLayerDebug };

const char* to_string(RenderMode mode) noexcept;
/// Accepts "lod", "vanilla", "radius-clip" and "layer-debug".
bool parse_render_mode(std::string_view text, RenderMode& out) noexcept;

inline constexpr int kMaxViewerWidth = 1920;
inline constexpr int kMaxViewerHeight = 1080;

struct SessionState {
  Eigen::Vector3d position = Eigen::Vector3d(0, -5, 2);
  Eigen::Vector3d target = Eigen::Vector3d::Zero();
  Eigen::Vector3d up = Eigen::Vector3d::UnitZ();
  double tau = 2048.0;
  RenderMode mode = RenderMode::kLod;
  int width = 480;
  int height = 270;
  double fov_x = 0.7853981633974483;
  double clip = 2.0;  // radius-clip threshold in pixels

  Camera camera() const;
};

/// Initial state looking at the whole scene from outside its bounds.
SessionState default_session(const LoadedScene& scene);

struct MessageOutcome {
  bool ok = true;
  std::string error;              // set when !ok
  bool state_changed = false;
  bool frame_requested = false;
};

/// Applies one client JSON message. Malformed or invalid messages leave the
/// session unchanged and report an error.
MessageOutcome handle_message(SessionState& session, std::string_view message);

struct FrameStats {
  std::uint64_t selected_count = 0;
  std::uint64_t resident_count = 0;
  double percentage = 0.0;
  double select_ms = 0.0;
  double render_ms = 0.0;
  double tau = 0.0;
  RenderMode mode = RenderMode::kLod;
};

struct Frame {
  std::uint64_t frame_id = 0;
  FrameStats stats;
  std::vector<std::uint8_t> png;
};

/// Deterministic color of a source layer in layer-debug mode.
Eigen::Vector3f layer_palette(std::uint32_t layer);

/// Runs the pipeline of the session's mode: selection, gathering and
/// rasterization, then PNG encoding.
Frame render_frame(const LoadedScene& scene, const SessionState& session, std::uint64_t frame_id);

std::string base64_encode(const std::vector<std::uint8_t>& bytes);
std::vector<std::uint8_t> base64_decode(std::string_view text);

std::string frame_message(const Frame& frame);
std::string error_message(std::string_view message);

/// {"assets": [...], "instanceCount": n, "boundingBox": {"min": [3], "max": [3]}, ...}
std::string scene_metadata(const LoadedScene& scene);

struct ViewerOptions {
  std::string address = "127.0.0.1";
  unsigned short port = 8080;  // 0 picks a free port
  /// Optional directory served for every GET path other than /scene.
  std::string static_dir;
};

/// WebSocket and HTTP on one port. Each WebSocket connection owns a
/// session state and one render worker; message handling never waits for
/// rendering, and a state update arriving before a frame is sent discards
/// that frame in favor of a fresh one.
class ViewerServer {
 public:
  ViewerServer(std::shared_ptr<const LoadedScene> scene, ViewerOptions opts);
  ~ViewerServer();
  ViewerServer(const ViewerServer&) = delete;
  ViewerServer& operator=(const ViewerServer&) = delete;

  /// Port actually bound, valid after construction.
  unsigned short port() const noexcept;
  /// Serves until stop() is called.
  void run();
  /// Serves on a background thread.
  void start();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace v3dg
