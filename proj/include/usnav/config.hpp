#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "usnav/calibration.hpp"
#include "usnav/codec.hpp"
#include "usnav/cues.hpp"
#include "usnav/experiments.hpp"
#include "usnav/latency.hpp"
#include "usnav/sim.hpp"
#include "usnav/tracking.hpp"

namespace usnav {

using Json = nlohmann::json;

// Every reader throws Error(code) naming the offending key; `code` is kConfig
// for files and kMalformedMessage for client messages.
Json vec3_to_json(const Vec3& v);
Vec3 vec3_from_json(const Json& j, ErrorCode code = ErrorCode::kConfig);

// {"quaternion": [w, x, y, z], "translation": [x, y, z]}. Quaternions within
// 1e-6 of unit length are renormalized; anything further off is rejected.
Json pose_to_json(const RigidTransform& t);
RigidTransform pose_from_json(const Json& j, ErrorCode code = ErrorCode::kConfig);

// {"tool_id", "markers": [[x, y, z], ...], "max_occlusion"}
Json tool_to_json(const ToolDefinition& tool);
ToolDefinition tool_from_json(const Json& j, double match_tolerance);

Json probe_geometry_to_json(const ProbeGeometry& g);
ProbeGeometry probe_geometry_from_json(const Json& j);

// Missing keys keep the values already in `base`.
Json cue_config_to_json(const CueConfig& c);
CueConfig cue_config_from_json(const Json& j, CueConfig base = {},
                               ErrorCode code = ErrorCode::kConfig);

Json camera_to_json(const DepthCameraModel& c);
DepthCameraModel camera_from_json(const Json& j, DepthCameraModel base = {});

Json needle_geometry_to_json(const NeedleGeometry& n);
NeedleGeometry needle_geometry_from_json(const Json& j, NeedleGeometry base = {});

LatencyConfig latency_config_from_json(const Json& j, LatencyConfig base = {});
Json latency_summary_to_json(const LatencySummary& s);

// Cue states as served to clients.
Json cue_frame_to_json(const CueFrame& frame, const CueConfig& cfg);

Json tool_pose_to_json(const ToolPose& p);
Json experiment_summary_to_json(const ExperimentReport& r, const AccuracyGrid& grid);
Json usecase_report_to_json(const UsecaseReport& r);

struct SessionSpec {
  std::string session_id;
  int probe_tool_id = 1;
  int needle_tool_id = 2;
  GuidanceMode mode = GuidanceMode::kInPlane;
};

struct ServiceConfig {
  std::string host = "127.0.0.1";
  std::uint16_t port = 7600;       // length-prefixed JSON messages
  std::uint16_t udp_port = 7601;   // TrackingPackets
  std::uint16_t http_port = 7602;  // GET /health
  std::uint64_t grace_us = 100000;
  std::vector<SessionSpec> sessions;
};

// Whole application configuration; every section is optional in the file.
struct AppConfig {
  double match_tolerance = kDefaultMatchTolerance;
  std::vector<ToolDefinition> tools;  // default: probe tool 1, needle tool 2
  ProbeGeometry probe;                // default: simulated convex probe
  // When set, `probe` was calibrated from this mask ("probe_mask" section:
  // {"path", "kind", "sensor_width_mm", "probe_tag"}).
  std::string probe_mask_path;
  NeedleGeometry needle;
  CueConfig cue;
  DepthCameraModel camera;
  double grid_spacing = 10.0;
  double grid_max_depth = 200.0;
  int grid_frames = 200;
  LatencyConfig latency;
  ServiceConfig service;
  double target_radius = 5.0;
};

AppConfig default_app_config();
AppConfig app_config_from_json(const Json& j);
AppConfig load_app_config(const std::string& path);  // kIo / kConfig
Json app_config_to_json(const AppConfig& c);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& text);

}  // namespace usnav
