#include "usnav/cues.hpp"

#include <algorithm>
#include <cmath>

namespace usnav {

namespace {

void require(bool ok, const char* what) {
  if (!ok) throw Error(ErrorCode::kConfig, std::string("cue config: ") + what);
}

}  // namespace

void CueConfig::validate() const {
  require(translation_near > 0.0 && translation_near < translation_far,
          "translation range must satisfy 0 < near < far");
  require(rotation_near > 0.0 && rotation_near < rotation_far,
          "rotation range must satisfy 0 < near < far");
  require(r1_base > 0.0 && r1_base < r2_base, "need 0 < r1 < r2");
  require(r3_base > 0.0 && r3_base < r4_base, "need 0 < r3 < r4");
  require(line_width_min > 0.0 && line_width_min < line_width_max,
          "line width range must satisfy 0 < min < max");
  require(future_length > 0.0, "future length must be positive");
  require(contact_epsilon > 0.0 && contact_epsilon < switch_distance,
          "need 0 < contact epsilon < switch distance");
  require(contact_image_alpha >= 0.0 && contact_image_alpha < 1.0,
          "contact alpha must be in [0, 1)");
  require(sphere_radius > 0.0, "sphere radius must be positive");
  require(inner_radius_min > 0.0 && inner_radius_min < outer_radius,
          "need 0 < inner radius min < outer radius");
  require(tip_radius_min > 0.0 && tip_radius_min < tip_radius_max,
          "need 0 < tip radius min < tip radius max");
}

const char* palette_name(Palette p) {
  switch (p) {
    case Palette::kAligned: return "aligned";
    case Palette::kMisaligned: return "misaligned";
    case Palette::kContact: return "contact";
    case Palette::kNeutral: return "neutral";
  }
  return "neutral";
}

const std::string& palette_color(Palette p, const CueConfig& cfg) {
  switch (p) {
    case Palette::kAligned: return cfg.color_aligned;
    case Palette::kMisaligned: return cfg.color_misaligned;
    case Palette::kContact: return cfg.color_contact;
    case Palette::kNeutral: break;
  }
  return cfg.color_tip;
}

const char* display_mode_name(DisplayMode m) {
  switch (m) {
    case DisplayMode::kFarSphere: return "far_sphere";
    case DisplayMode::kNearCircles: return "near_circles";
    case DisplayMode::kContact: return "contact";
  }
  return "far_sphere";
}

const char* guidance_mode_name(GuidanceMode m) {
  return m == GuidanceMode::kInPlane ? "in_plane" : "out_of_plane";
}

GuidanceMode parse_guidance_mode(const std::string& s) {
  if (s == "in_plane") return GuidanceMode::kInPlane;
  if (s == "out_of_plane") return GuidanceMode::kOutOfPlane;
  throw Error(ErrorCode::kInvalidArgument, "unknown guidance mode '" + s + "'");
}

double ramp(double value, double near, double far) {
  return std::clamp((value - near) / (far - near), 0.0, 1.0);
}

InPlaneCueState inplane_cues(const NeedleState& needle, const ImagePlane& plane,
                             const Vec3& insertion_point, const CueConfig& cfg) {
  const ProjectedNeedle shadow = project_needle_to_plane(needle, plane);
  InPlaneCueState s;
  s.shadow_origin = shadow.origin;
  s.shadow_direction = shadow.direction;

  s.translation_offset = (needle.tip - shadow.origin).dot(plane.normal);
  const double along_normal = std::abs(needle.direction.dot(plane.normal));
  const double in_plane =
      (needle.direction - needle.direction.dot(plane.normal) * plane.normal).norm();
  s.rotation_offset = std::atan2(along_normal, in_plane);

  const double t = ramp(std::abs(s.translation_offset), cfg.translation_near,
                        cfg.translation_far);
  const double a = ramp(s.rotation_offset, cfg.rotation_near, cfg.rotation_far);
  s.r1 = cfg.r1_base;
  s.r2 = cfg.r1_base + (cfg.r2_base - cfg.r1_base) * t;
  s.r3 = cfg.r3_base;
  s.r4 = cfg.r3_base + (cfg.r4_base - cfg.r3_base) * a;
  s.line_width = cfg.line_width_min + (cfg.line_width_max - cfg.line_width_min) * t;

  s.translation_palette = t > 0.0 ? Palette::kMisaligned : Palette::kAligned;
  s.rotation_palette = a > 0.0 ? Palette::kMisaligned : Palette::kAligned;
  s.trajectory_palette = (t > 0.0 || a > 0.0) ? Palette::kMisaligned : Palette::kAligned;

  // Solid: insertion point (projected onto the shadow line) up to the tip.
  // Dashed: from the tip forward along the projected trajectory.
  const Vec3 ins_on_plane =
      insertion_point + (plane.origin - insertion_point).dot(plane.normal) * plane.normal;
  const double back = (ins_on_plane - shadow.origin).dot(shadow.direction);
  s.traversed_start = shadow.origin + back * shadow.direction;
  s.traversed_end = shadow.origin;
  s.future_start = shadow.origin;
  s.future_end = shadow.origin + cfg.future_length * shadow.direction;
  return s;
}

OutOfPlaneCueState outofplane_cues(const NeedleState& needle,
                                   const ImagePlane& plane,
                                   const CueConfig& cfg) {
  const PlaneHit hit = plane_distance_and_hit(needle, plane, HitMode::kExact);
  OutOfPlaneCueState s;
  s.hit_point = hit.point;
  s.distance = hit.distance;
  const double gap = std::abs(hit.distance);

  if (gap <= cfg.contact_epsilon) {
    s.display_mode = DisplayMode::kContact;
    s.tip_radius = cfg.tip_radius_min;
    s.tip_palette = Palette::kContact;
    s.circle_palette = Palette::kContact;
    s.image_alpha = cfg.contact_image_alpha;
    return s;
  }
  if (hit.distance > cfg.switch_distance) {
    s.display_mode = DisplayMode::kFarSphere;
    s.sphere_visible = true;
    s.sphere_radius = cfg.sphere_radius;
    s.tip_radius = cfg.tip_radius_max;
    return s;
  }
  const double f = std::clamp(gap / cfg.switch_distance, 0.0, 1.0);
  s.display_mode = DisplayMode::kNearCircles;
  s.circles_visible = true;
  s.outer_radius = cfg.outer_radius;
  s.inner_radius = cfg.outer_radius - (cfg.outer_radius - cfg.inner_radius_min) * f;
  s.tip_radius = cfg.tip_radius_min + (cfg.tip_radius_max - cfg.tip_radius_min) * f;
  return s;
}

NeedleState NeedleGeometry::needle_from_pose(const RigidTransform& tool_pose) const {
  const Vec3 axis = axis_local.normalized();
  NeedleState n;
  n.tip = tool_pose.apply(tip_offset * axis);
  n.direction = tool_pose.rotate(axis);
  n.length = tip_offset;
  return n;
}

ImagePlane image_plane_from_probe(const RigidTransform& probe_pose,
                                  const ProbeGeometry& geom) {
  const Vec3 o = geom.pixel_to_tool(geom.origin_u, geom.origin_v);
  const Vec3 ex = (geom.pixel_to_tool(geom.origin_u + 1, geom.origin_v) - o).normalized();
  const Vec3 ey = (geom.pixel_to_tool(geom.origin_u, geom.origin_v + 1) - o).normalized();
  ImagePlane plane;
  plane.origin = probe_pose.apply(o);
  plane.axis_x = probe_pose.rotate(ex);
  plane.axis_y = probe_pose.rotate(ey);
  plane.normal = plane.axis_x.cross(plane.axis_y);
  return plane;
}

CueFrame cue_frame(const CueInputs& in, const ProbeGeometry& geom,
                   const NeedleGeometry& needle_geom, const CueConfig& cfg) {
  const auto stale = [&](const std::optional<TrackedPose>& p) {
    if (!p) return true;
    if (p->held) return false;
    return in.now_us > p->timestamp_us && in.now_us - p->timestamp_us > in.grace_us;
  };
  TrackingLostState lost{stale(in.probe), stale(in.needle)};
  if (lost.probe_lost || lost.needle_lost) return lost;

  ImagePlane plane = image_plane_from_probe(in.probe->pose, geom);
  if (in.normal_sign < 0.0) plane = plane.flipped();
  const NeedleState needle = needle_geom.needle_from_pose(in.needle->pose);

  if (in.mode == GuidanceMode::kInPlane) {
    return inplane_cues(needle, plane, in.insertion_point.value_or(needle.origin()), cfg);
  }
  return outofplane_cues(needle, plane, cfg);
}

}  // namespace usnav
