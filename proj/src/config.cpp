#include "usnav/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "usnav/image_io.hpp"

namespace usnav {

namespace {

[[noreturn]] void bad(ErrorCode code, const std::string& what) { throw Error(code, what); }

const Json* field(const Json& j, const char* key, ErrorCode code) {
  if (!j.is_object()) bad(code, std::string("expected an object around '") + key + "'");
  const auto it = j.find(key);
  return it == j.end() ? nullptr : &*it;
}

double num(const Json& j, const char* key, double def, ErrorCode code = ErrorCode::kConfig) {
  const Json* v = field(j, key, code);
  if (!v) return def;
  if (!v->is_number()) bad(code, std::string("'") + key + "' must be a number");
  return v->get<double>();
}

double req_num(const Json& j, const char* key, ErrorCode code) {
  const Json* v = field(j, key, code);
  if (!v) bad(code, std::string("missing '") + key + "'");
  if (!v->is_number()) bad(code, std::string("'") + key + "' must be a number");
  return v->get<double>();
}

std::int64_t integer(const Json& j, const char* key, std::int64_t def,
                     ErrorCode code = ErrorCode::kConfig) {
  const Json* v = field(j, key, code);
  if (!v) return def;
  if (!v->is_number_integer()) bad(code, std::string("'") + key + "' must be an integer");
  return v->get<std::int64_t>();
}

std::string text(const Json& j, const char* key, const std::string& def,
                 ErrorCode code = ErrorCode::kConfig) {
  const Json* v = field(j, key, code);
  if (!v) return def;
  if (!v->is_string()) bad(code, std::string("'") + key + "' must be a string");
  return v->get<std::string>();
}

std::uint16_t port(const Json& j, const char* key, std::uint16_t def) {
  const std::int64_t p = integer(j, key, def);
  if (p < 0 || p > 65535) bad(ErrorCode::kConfig, std::string("'") + key + "' is not a port");
  return static_cast<std::uint16_t>(p);
}

Json box_to_json(const BoundingBox& b) {
  return {{"u_min", b.u_min}, {"u_max", b.u_max}, {"v_min", b.v_min}, {"v_max", b.v_max}};
}

BoundingBox box_from_json(const Json& j) {
  const ErrorCode c = ErrorCode::kConfig;
  BoundingBox b;
  b.u_min = static_cast<int>(req_num(j, "u_min", c));
  b.u_max = static_cast<int>(req_num(j, "u_max", c));
  b.v_min = static_cast<int>(req_num(j, "v_min", c));
  b.v_max = static_cast<int>(req_num(j, "v_max", c));
  if (b.u_min > b.u_max || b.v_min > b.v_max) bad(c, "bounds are not ordered");
  return b;
}

}  // namespace

Json vec3_to_json(const Vec3& v) { return Json::array({v.x(), v.y(), v.z()}); }

Vec3 vec3_from_json(const Json& j, ErrorCode code) {
  if (!j.is_array() || j.size() != 3) bad(code, "expected a 3-vector");
  Vec3 v;
  for (int i = 0; i < 3; ++i) {
    if (!j[i].is_number()) bad(code, "vector components must be numbers");
    v[i] = j[i].get<double>();
    if (!std::isfinite(v[i])) bad(code, "vector components must be finite");
  }
  return v;
}

Json pose_to_json(const RigidTransform& t) {
  const auto q = t.quaternion();
  return {{"quaternion", Json::array({q[0], q[1], q[2], q[3]})},
          {"translation", vec3_to_json(t.translation())}};
}

RigidTransform pose_from_json(const Json& j, ErrorCode code) {
  const Json* q = field(j, "quaternion", code);
  const Json* t = field(j, "translation", code);
  if (!q || !t) bad(code, "pose needs 'quaternion' and 'translation'");
  if (!q->is_array() || q->size() != 4) bad(code, "quaternion must have 4 components");
  std::array<double, 4> wxyz{};
  double norm2 = 0.0;
  for (int i = 0; i < 4; ++i) {
    if (!(*q)[i].is_number()) bad(code, "quaternion components must be numbers");
    wxyz[i] = (*q)[i].get<double>();
    norm2 += wxyz[i] * wxyz[i];
  }
  const double norm = std::sqrt(norm2);
  if (!(std::abs(norm - 1.0) <= 1e-6)) bad(code, "quaternion is not unit length");
  for (double& c : wxyz) c /= norm;
  return RigidTransform::from_quaternion(wxyz, vec3_from_json(*t, code));
}

Json tool_to_json(const ToolDefinition& tool) {
  Json markers = Json::array();
  for (const Vec3& m : tool.markers()) markers.push_back(vec3_to_json(m));
  return {{"tool_id", tool.tool_id()}, {"markers", markers},
          {"max_occlusion", tool.max_occlusion()}};
}

ToolDefinition tool_from_json(const Json& j, double match_tolerance) {
  const ErrorCode c = ErrorCode::kConfig;
  const Json* markers = field(j, "markers", c);
  if (!markers || !markers->is_array()) bad(c, "tool needs a 'markers' array");
  std::vector<Vec3> pts;
  for (const Json& m : *markers) pts.push_back(vec3_from_json(m, c));
  const std::int64_t id = integer(j, "tool_id", -1);
  if (id < 0 || id > 255) bad(c, "'tool_id' must be in [0, 255]");
  try {
    return ToolDefinition(static_cast<int>(id), std::move(pts),
                          static_cast<int>(integer(j, "max_occlusion", 0)), match_tolerance);
  } catch (const Error& e) {
    bad(c, e.what());
  }
}

Json probe_geometry_to_json(const ProbeGeometry& g) {
  Json ext = Json::array();
  const Eigen::Matrix4d e = g.extrinsic();
  for (int r = 0; r < 4; ++r) {
    Json row = Json::array();
    for (int k = 0; k < 4; ++k) row.push_back(e(r, k));
    ext.push_back(row);
  }
  return {{"kind", probe_kind_name(g.kind)},
          {"pixel_width_mm", g.pixel_width},
          {"origin", {{"u", g.origin_u}, {"v", g.origin_v}}},
          {"sensor_width_mm", g.sensor_width},
          {"corners", {{"u_left", g.u_left}, {"u_right", g.u_right}}},
          {"bounds", box_to_json(g.bounds)},
          {"probe_tag", g.probe_tag},
          {"extrinsic", ext}};
}

ProbeGeometry probe_geometry_from_json(const Json& j) {
  const ErrorCode c = ErrorCode::kConfig;
  ProbeGeometry g;
  try {
    g.kind = parse_probe_kind(text(j, "kind", "convex"));
  } catch (const Error& e) {
    bad(c, e.what());
  }
  g.pixel_width = req_num(j, "pixel_width_mm", c);
  g.sensor_width = num(j, "sensor_width_mm", 0.0);
  const Json* origin = field(j, "origin", c);
  const Json* corners = field(j, "corners", c);
  const Json* bounds = field(j, "bounds", c);
  if (!origin || !bounds) bad(c, "probe geometry needs 'origin' and 'bounds'");
  g.origin_u = static_cast<int>(req_num(*origin, "u", c));
  g.origin_v = static_cast<int>(req_num(*origin, "v", c));
  g.bounds = box_from_json(*bounds);
  g.u_left = corners ? static_cast<int>(req_num(*corners, "u_left", c)) : g.bounds.u_min;
  g.u_right = corners ? static_cast<int>(req_num(*corners, "u_right", c)) : g.bounds.u_max;
  g.probe_tag = text(j, "probe_tag", "");
  if (!(g.pixel_width > 0.0)) bad(c, "'pixel_width_mm' must be positive");
  if (g.u_left >= g.u_right) bad(c, "corners must satisfy u_left < u_right");
  return g;
}

Json cue_config_to_json(const CueConfig& c) {
  return {{"translation_near_mm", c.translation_near},
          {"translation_far_mm", c.translation_far},
          {"rotation_near_deg", c.rotation_near / kDegree},
          {"rotation_far_deg", c.rotation_far / kDegree},
          {"r1_mm", c.r1_base},
          {"r2_mm", c.r2_base},
          {"r3_mm", c.r3_base},
          {"r4_mm", c.r4_base},
          {"line_width_min_mm", c.line_width_min},
          {"line_width_max_mm", c.line_width_max},
          {"future_length_mm", c.future_length},
          {"contact_epsilon_mm", c.contact_epsilon},
          {"switch_distance_mm", c.switch_distance},
          {"contact_image_alpha", c.contact_image_alpha},
          {"sphere_radius_mm", c.sphere_radius},
          {"outer_radius_mm", c.outer_radius},
          {"inner_radius_min_mm", c.inner_radius_min},
          {"tip_radius_max_mm", c.tip_radius_max},
          {"tip_radius_min_mm", c.tip_radius_min},
          {"colors",
           {{"aligned", c.color_aligned},
            {"misaligned", c.color_misaligned},
            {"contact", c.color_contact},
            {"tip", c.color_tip}}}};
}

CueConfig cue_config_from_json(const Json& j, CueConfig c, ErrorCode code) {
  if (!j.is_object()) bad(code, "cue config must be an object");
  static const char* const kKnown[] = {
      "translation_near_mm", "translation_far_mm", "rotation_near_deg", "rotation_far_deg",
      "r1_mm", "r2_mm", "r3_mm", "r4_mm", "line_width_min_mm", "line_width_max_mm",
      "future_length_mm", "contact_epsilon_mm", "switch_distance_mm", "contact_image_alpha",
      "sphere_radius_mm", "outer_radius_mm", "inner_radius_min_mm", "tip_radius_max_mm",
      "tip_radius_min_mm", "colors"};
  for (const auto& [key, _] : j.items()) {
    if (std::find(std::begin(kKnown), std::end(kKnown), key) == std::end(kKnown)) {
      bad(code, "unknown cue config key '" + key + "'");
    }
  }
  c.translation_near = num(j, "translation_near_mm", c.translation_near, code);
  c.translation_far = num(j, "translation_far_mm", c.translation_far, code);
  c.rotation_near = num(j, "rotation_near_deg", c.rotation_near / kDegree, code) * kDegree;
  c.rotation_far = num(j, "rotation_far_deg", c.rotation_far / kDegree, code) * kDegree;
  c.r1_base = num(j, "r1_mm", c.r1_base, code);
  c.r2_base = num(j, "r2_mm", c.r2_base, code);
  c.r3_base = num(j, "r3_mm", c.r3_base, code);
  c.r4_base = num(j, "r4_mm", c.r4_base, code);
  c.line_width_min = num(j, "line_width_min_mm", c.line_width_min, code);
  c.line_width_max = num(j, "line_width_max_mm", c.line_width_max, code);
  c.future_length = num(j, "future_length_mm", c.future_length, code);
  c.contact_epsilon = num(j, "contact_epsilon_mm", c.contact_epsilon, code);
  c.switch_distance = num(j, "switch_distance_mm", c.switch_distance, code);
  c.contact_image_alpha = num(j, "contact_image_alpha", c.contact_image_alpha, code);
  c.sphere_radius = num(j, "sphere_radius_mm", c.sphere_radius, code);
  c.outer_radius = num(j, "outer_radius_mm", c.outer_radius, code);
  c.inner_radius_min = num(j, "inner_radius_min_mm", c.inner_radius_min, code);
  c.tip_radius_max = num(j, "tip_radius_max_mm", c.tip_radius_max, code);
  c.tip_radius_min = num(j, "tip_radius_min_mm", c.tip_radius_min, code);
  if (const Json* colors = field(j, "colors", code)) {
    c.color_aligned = text(*colors, "aligned", c.color_aligned, code);
    c.color_misaligned = text(*colors, "misaligned", c.color_misaligned, code);
    c.color_contact = text(*colors, "contact", c.color_contact, code);
    c.color_tip = text(*colors, "tip", c.color_tip, code);
  }
  try {
    c.validate();
  } catch (const Error& e) {
    bad(code, e.what());
  }
  return c;
}

Json camera_to_json(const DepthCameraModel& c) {
  return {{"sigma_xy_mm", c.sigma_xy},
          {"sigma_z_mm", c.sigma_z},
          {"quantization_mm", c.quantization},
          {"fov_half_angle_deg", c.fov_half_angle / kDegree},
          {"occlusion_probability", c.occlusion_probability}};
}

DepthCameraModel camera_from_json(const Json& j, DepthCameraModel c) {
  c.sigma_xy = num(j, "sigma_xy_mm", c.sigma_xy);
  c.sigma_z = num(j, "sigma_z_mm", c.sigma_z);
  c.quantization = num(j, "quantization_mm", c.quantization);
  c.fov_half_angle = num(j, "fov_half_angle_deg", c.fov_half_angle / kDegree) * kDegree;
  c.occlusion_probability = num(j, "occlusion_probability", c.occlusion_probability);
  c.validate();
  return c;
}

Json needle_geometry_to_json(const NeedleGeometry& n) {
  return {{"axis_local", vec3_to_json(n.axis_local)}, {"tip_offset_mm", n.tip_offset}};
}

NeedleGeometry needle_geometry_from_json(const Json& j, NeedleGeometry n) {
  if (const Json* a = field(j, "axis_local", ErrorCode::kConfig)) n.axis_local = vec3_from_json(*a);
  n.tip_offset = num(j, "tip_offset_mm", n.tip_offset);
  if (!(n.axis_local.norm() > 1e-9)) bad(ErrorCode::kConfig, "'axis_local' must be non-zero");
  if (!(n.tip_offset > 0.0)) bad(ErrorCode::kConfig, "'tip_offset_mm' must be positive");
  return n;
}

LatencyConfig latency_config_from_json(const Json& j, LatencyConfig c) {
  c.fps = num(j, "fps", c.fps);
  c.duration_s = num(j, "duration_s", c.duration_s);
  c.frame_width = static_cast<int>(integer(j, "frame_width", c.frame_width));
  c.frame_height = static_cast<int>(integer(j, "frame_height", c.frame_height));
  c.host_delay_ms = num(j, "host_delay_ms", c.host_delay_ms);
  c.queue_capacity = static_cast<std::size_t>(integer(j, "queue_capacity",
                                                      static_cast<std::int64_t>(c.queue_capacity)));
  c.host = text(j, "host", c.host);
  c.host_port = port(j, "host_port", c.host_port);
  c.headset_port = port(j, "headset_port", c.headset_port);
  c.validate();
  return c;
}

Json latency_summary_to_json(const LatencySummary& s) {
  return {{"frames_sent", s.frames_sent},
          {"frames_displayed", s.frames_displayed},
          {"lost_frame_ids", s.lost_frame_ids},
          {"loss_fraction", s.loss_fraction},
          {"t1_ms", {{"mean", s.t1_mean_ms}, {"std", s.t1_std_ms}, {"median", s.t1_median_ms}}},
          {"t2_ms", {{"mean", s.t2_mean_ms}, {"std", s.t2_std_ms}, {"median", s.t2_median_ms}}},
          {"encoded_frame_bytes", s.encoded_frame_bytes},
          {"host_queue", {{"drops", s.host_queue_drops}, {"high_water", s.host_queue_high_water}}},
          {"headset_queue",
           {{"drops", s.headset_queue_drops}, {"high_water", s.headset_queue_high_water}}}};
}

Json cue_frame_to_json(const CueFrame& frame, const CueConfig& cfg) {
  if (const auto* s = std::get_if<InPlaneCueState>(&frame)) {
    return {{"kind", "in_plane"},
            {"shadow_origin", vec3_to_json(s->shadow_origin)},
            {"shadow_direction", vec3_to_json(s->shadow_direction)},
            {"segments",
             Json::array({{{"tag", "solid"},
                           {"start", vec3_to_json(s->traversed_start)},
                           {"end", vec3_to_json(s->traversed_end)}},
                          {{"tag", "dashed"},
                           {"start", vec3_to_json(s->future_start)},
                           {"end", vec3_to_json(s->future_end)}}})},
            {"translation_offset_mm", s->translation_offset},
            {"rotation_offset_rad", s->rotation_offset},
            {"r1_mm", s->r1},
            {"r2_mm", s->r2},
            {"r3_mm", s->r3},
            {"r4_mm", s->r4},
            {"line_width_mm", s->line_width},
            {"translation_palette", palette_name(s->translation_palette)},
            {"rotation_palette", palette_name(s->rotation_palette)},
            {"trajectory_palette", palette_name(s->trajectory_palette)},
            {"colors",
             {{"translation", palette_color(s->translation_palette, cfg)},
              {"rotation", palette_color(s->rotation_palette, cfg)},
              {"trajectory", palette_color(s->trajectory_palette, cfg)}}}};
  }
  if (const auto* s = std::get_if<OutOfPlaneCueState>(&frame)) {
    return {{"kind", "out_of_plane"},
            {"display_mode", display_mode_name(s->display_mode)},
            {"hit_point", vec3_to_json(s->hit_point)},
            {"distance_mm", s->distance},
            {"sphere", {{"visible", s->sphere_visible}, {"radius_mm", s->sphere_radius}}},
            {"circles",
             {{"visible", s->circles_visible},
              {"outer_radius_mm", s->outer_radius},
              {"inner_radius_mm", s->inner_radius},
              {"palette", palette_name(s->circle_palette)},
              {"color", palette_color(s->circle_palette, cfg)}}},
            {"tip",
             {{"radius_mm", s->tip_radius},
              {"palette", palette_name(s->tip_palette)},
              {"color", palette_color(s->tip_palette, cfg)}}},
            {"image_alpha", s->image_alpha}};
  }
  const auto& lost = std::get<TrackingLostState>(frame);
  return {{"kind", "tracking_lost"},
          {"probe_lost", lost.probe_lost},
          {"needle_lost", lost.needle_lost}};
}

Json tool_pose_to_json(const ToolPose& p) {
  return {{"tool_id", p.tool_id},
          {"pose", pose_to_json(p.transform)},
          {"rms_error_mm", p.rms_error},
          {"occluded_count", p.occluded_count}};
}

Json experiment_summary_to_json(const ExperimentReport& r, const AccuracyGrid& grid) {
  Json bands = Json::array();
  for (const BandSummary& b : r.bands) {
    bands.push_back({{"depth_mm", Json::array({b.depth_lo, b.depth_hi})},
                     {"targets", b.targets},
                     {"samples", b.samples},
                     {"in_plane_mm", {{"mean", b.in_plane_mean}, {"std", b.in_plane_std}}},
                     {"out_of_plane_mm",
                      {{"mean", b.out_of_plane_mean}, {"std", b.out_of_plane_std}}}});
  }
  Json targets = Json::array();
  for (const TargetSummary& t : r.targets) {
    targets.push_back({{"target", t.target},
                       {"x_mm", t.x},
                       {"y_mm", t.y},
                       {"mean_position_mm", Json::array({t.mean_x, t.mean_y})},
                       {"offset_mm", t.offset},
                       {"delta_x_mm", {{"mean", t.delta_x_mean}, {"std", t.delta_x_std}}},
                       {"abs_delta_l_mm",
                        {{"mean", t.abs_delta_l_mean}, {"std", t.abs_delta_l_std}}},
                       {"frames_used", t.frames_used},
                       {"frames_failed", t.frames_failed}});
  }
  return {{"seed", r.seed},
          {"grid",
           {{"targets", grid.targets.size()},
            {"spacing_mm", grid.spacing},
            {"max_depth_mm", grid.max_depth},
            {"frames_per_target", grid.frames_per_target}}},
          {"samples", r.samples.size()},
          {"tracking_failures", r.tracking_failures},
          {"in_plane_mm", {{"mean", r.in_plane_mean}, {"std", r.in_plane_std}}},
          {"out_of_plane_mm", {{"mean", r.out_of_plane_mean}, {"std", r.out_of_plane_std}}},
          {"bands", bands},
          {"targets", targets}};
}

Json usecase_report_to_json(const UsecaseReport& r) {
  static const char* const kRule[] = {"conjunctive", "depth_only", "direction_only"};
  Json modes = Json::array();
  for (const ModeMetrics& m : r.modes) {
    modes.push_back({{"mode", m.mode},
                     {"count", m.count},
                     {"success_rate", m.success_rate},
                     {"directional_mm", {{"median", m.directional_median}, {"iqr", m.directional_iqr}}},
                     {"depth_mm", {{"median", m.depth_median}, {"iqr", m.depth_iqr}}},
                     {"elapsed_s", {{"median", m.elapsed_median}, {"iqr", m.elapsed_iqr}}}});
  }
  Json punctures = Json::array();
  for (const PunctureOutcome& o : r.outcomes) {
    punctures.push_back({{"directional_mm", o.error.directional},
                         {"depth_mm", o.error.depth},
                         {"success", o.success}});
  }
  return {{"target_radius_mm", r.target_radius},
          {"rule", kRule[static_cast<int>(r.rule)]},
          {"modes", modes},
          {"punctures", punctures}};
}

AppConfig default_app_config() {
  AppConfig c;
  c.tools = {default_probe_tool(1), default_needle_tool(2)};
  c.probe = default_simulated_probe().geometry;
  c.service.sessions = {SessionSpec{"default", 1, 2, GuidanceMode::kInPlane}};
  return c;
}

AppConfig app_config_from_json(const Json& j) {
  const ErrorCode c = ErrorCode::kConfig;
  if (!j.is_object()) bad(c, "configuration root must be an object");
  AppConfig a = default_app_config();
  a.match_tolerance = num(j, "match_tolerance_mm", a.match_tolerance);
  if (!(a.match_tolerance > 0.0)) bad(c, "'match_tolerance_mm' must be positive");
  if (const Json* tools = field(j, "tools", c)) {
    if (!tools->is_array()) bad(c, "'tools' must be an array");
    a.tools.clear();
    for (const Json& t : *tools) a.tools.push_back(tool_from_json(t, a.match_tolerance));
  } else {
    a.tools = {ToolDefinition(1, default_probe_tool(1).markers(), 1, a.match_tolerance),
               ToolDefinition(2, default_needle_tool(2).markers(), 1, a.match_tolerance)};
  }
  if (const Json* p = field(j, "probe", c)) a.probe = probe_geometry_from_json(*p);
  if (const Json* pm = field(j, "probe_mask", c)) {
    a.probe_mask_path = text(*pm, "path", "");
    if (a.probe_mask_path.empty()) bad(c, "'probe_mask' needs a 'path'");
    const double width = num(*pm, "sensor_width_mm", 0.0);
    if (!(width > 0.0)) bad(c, "'probe_mask' needs a positive 'sensor_width_mm'");
    try {
      a.probe = compute_probe_geometry(mask_from_gray(read_pgm(a.probe_mask_path)),
                                       parse_probe_kind(text(*pm, "kind", "convex")), width,
                                       text(*pm, "probe_tag", ""));
    } catch (const Error& e) {
      if (e.code() == ErrorCode::kIo) throw;
      bad(c, "probe_mask: " + std::string(e.what()));
    }
  }
  if (const Json* n = field(j, "needle", c)) a.needle = needle_geometry_from_json(*n);
  if (const Json* q = field(j, "cue", c)) a.cue = cue_config_from_json(*q);
  if (const Json* cam = field(j, "camera", c)) a.camera = camera_from_json(*cam);
  if (const Json* g = field(j, "grid", c)) {
    a.grid_spacing = num(*g, "spacing_mm", a.grid_spacing);
    a.grid_max_depth = num(*g, "max_depth_mm", a.grid_max_depth);
    a.grid_frames = static_cast<int>(integer(*g, "frames_per_target", a.grid_frames));
    if (!(a.grid_spacing > 0.0) || !(a.grid_max_depth > 0.0) || a.grid_frames < 1) {
      bad(c, "grid spacing, depth and frame count must be positive");
    }
  }
  if (const Json* l = field(j, "latency", c)) a.latency = latency_config_from_json(*l);
  a.target_radius = num(j, "target_radius_mm", a.target_radius);
  if (!(a.target_radius > 0.0)) bad(c, "'target_radius_mm' must be positive");
  if (const Json* s = field(j, "service", c)) {
    a.service.host = text(*s, "host", a.service.host);
    a.service.port = port(*s, "port", a.service.port);
    a.service.udp_port = port(*s, "udp_port", a.service.udp_port);
    a.service.http_port = port(*s, "http_port", a.service.http_port);
    const double grace_ms = num(*s, "grace_ms", a.service.grace_us / 1000.0);
    if (!(grace_ms >= 0.0)) bad(c, "'grace_ms' must be non-negative");
    a.service.grace_us = static_cast<std::uint64_t>(std::llround(grace_ms * 1000.0));
    if (const Json* sessions = field(*s, "sessions", c)) {
      if (!sessions->is_array()) bad(c, "'sessions' must be an array");
      a.service.sessions.clear();
      for (const Json& sj : *sessions) {
        SessionSpec spec;
        spec.session_id = text(sj, "session_id", "");
        if (spec.session_id.empty()) bad(c, "session needs a 'session_id'");
        spec.probe_tool_id = static_cast<int>(integer(sj, "probe_tool_id", 1));
        spec.needle_tool_id = static_cast<int>(integer(sj, "needle_tool_id", 2));
        try {
          spec.mode = parse_guidance_mode(text(sj, "mode", "in_plane"));
        } catch (const Error& e) {
          bad(c, e.what());
        }
        a.service.sessions.push_back(spec);
      }
    }
  }
  return a;
}

AppConfig load_app_config(const std::string& path) {
  const std::string body = read_text_file(path);
  Json j;
  try {
    j = Json::parse(body);
  } catch (const Json::parse_error& e) {
    bad(ErrorCode::kConfig, path + ": " + e.what());
  }
  return app_config_from_json(j);
}

Json app_config_to_json(const AppConfig& a) {
  Json tools = Json::array();
  for (const ToolDefinition& t : a.tools) tools.push_back(tool_to_json(t));
  Json sessions = Json::array();
  for (const SessionSpec& s : a.service.sessions) {
    sessions.push_back({{"session_id", s.session_id},
                        {"probe_tool_id", s.probe_tool_id},
                        {"needle_tool_id", s.needle_tool_id},
                        {"mode", guidance_mode_name(s.mode)}});
  }
  return {{"match_tolerance_mm", a.match_tolerance},
          {"tools", tools},
          {"probe", probe_geometry_to_json(a.probe)},
          {"needle", needle_geometry_to_json(a.needle)},
          {"cue", cue_config_to_json(a.cue)},
          {"camera", camera_to_json(a.camera)},
          {"grid",
           {{"spacing_mm", a.grid_spacing},
            {"max_depth_mm", a.grid_max_depth},
            {"frames_per_target", a.grid_frames}}},
          {"latency",
           {{"fps", a.latency.fps},
            {"duration_s", a.latency.duration_s},
            {"frame_width", a.latency.frame_width},
            {"frame_height", a.latency.frame_height},
            {"host_delay_ms", a.latency.host_delay_ms},
            {"queue_capacity", a.latency.queue_capacity},
            {"host", a.latency.host},
            {"host_port", a.latency.host_port},
            {"headset_port", a.latency.headset_port}}},
          {"target_radius_mm", a.target_radius},
          {"service",
           {{"host", a.service.host},
            {"port", a.service.port},
            {"udp_port", a.service.udp_port},
            {"http_port", a.service.http_port},
            {"grace_ms", static_cast<double>(a.service.grace_us) / 1000.0},
            {"sessions", sessions}}}};
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) bad(ErrorCode::kIo, "cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) bad(ErrorCode::kIo, "cannot write '" + path + "'");
  out << text;
  if (!out) bad(ErrorCode::kIo, "write failed for '" + path + "'");
}

}  // namespace usnav
