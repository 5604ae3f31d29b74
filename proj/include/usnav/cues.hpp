#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <variant>

#include "usnav/calibration.hpp"
#include "usnav/geometry.hpp"

namespace usnav {

inline constexpr double kDegree = 3.14159265358979323846 / 180.0;

// Every constant behind the guidance-cue mappings. Lengths in mm, angles in
// radians. Mappings are clamped-linear between the near/far values.
struct CueConfig {
  double translation_near = 0.5;
  double translation_far = 10.0;
  double rotation_near = 1.0 * kDegree;
  double rotation_far = 10.0 * kDegree;

  // In-plane circles: r1/r3 are fixed, r2/r4 grow up to their base values.
  double r1_base = 2.0;
  double r2_base = 6.0;
  double r3_base = 8.0;
  double r4_base = 14.0;

  double line_width_min = 0.3;
  double line_width_max = 1.5;
  double future_length = 100.0;

  double contact_epsilon = 0.5;
  double switch_distance = 20.0;
  double contact_image_alpha = 0.3;

  // Out-of-plane circles and tip.
  double sphere_radius = 2.0;
  double outer_radius = 6.0;
  double inner_radius_min = 1.0;
  double tip_radius_max = 1.5;
  double tip_radius_min = 0.4;

  std::string color_aligned = "#00FF00";
  std::string color_misaligned = "#FFA500";
  std::string color_contact = "#FF0000";
  std::string color_tip = "#FFFFFF";

  // Throws kConfig when a range is unordered or a size is not positive.
  void validate() const;
};

enum class Palette { kAligned, kMisaligned, kContact, kNeutral };
const char* palette_name(Palette p);
const std::string& palette_color(Palette p, const CueConfig& cfg);

struct InPlaneCueState {
  Vec3 shadow_origin;
  Vec3 shadow_direction;
  Vec3 traversed_start;
  Vec3 traversed_end;  // == shadow_origin
  Vec3 future_start;   // == shadow_origin
  Vec3 future_end;
  double translation_offset = 0.0;  // signed, along the plane normal
  double rotation_offset = 0.0;     // rad, in [0, pi/2]
  double r1 = 0.0;
  double r2 = 0.0;
  double r3 = 0.0;
  double r4 = 0.0;
  double line_width = 0.0;
  Palette translation_palette = Palette::kAligned;
  Palette rotation_palette = Palette::kAligned;
  Palette trajectory_palette = Palette::kAligned;
};

enum class DisplayMode { kFarSphere, kNearCircles, kContact };
const char* display_mode_name(DisplayMode m);

struct OutOfPlaneCueState {
  DisplayMode display_mode = DisplayMode::kFarSphere;
  Vec3 hit_point;
  double distance = 0.0;  // signed
  bool sphere_visible = false;
  double sphere_radius = 0.0;
  bool circles_visible = false;
  double outer_radius = 0.0;
  double inner_radius = 0.0;
  double tip_radius = 0.0;
  Palette tip_palette = Palette::kNeutral;
  Palette circle_palette = Palette::kMisaligned;
  double image_alpha = 1.0;
};

// 0 at/below `near`, 1 at/above `far`.
double ramp(double value, double near, double far);

InPlaneCueState inplane_cues(const NeedleState& needle, const ImagePlane& plane,
                             const Vec3& insertion_point, const CueConfig& cfg);

OutOfPlaneCueState outofplane_cues(const NeedleState& needle,
                                   const ImagePlane& plane,
                                   const CueConfig& cfg);

// ---------------------------------------------------------------------------
// Per-frame orchestration

enum class GuidanceMode { kInPlane, kOutOfPlane };
const char* guidance_mode_name(GuidanceMode m);
GuidanceMode parse_guidance_mode(const std::string& s);

// Needle tip sits `tip_offset` mm along `axis_local` from the tool origin.
struct NeedleGeometry {
  Vec3 axis_local = Vec3(0.0, 1.0, 0.0);
  double tip_offset = 120.0;

  NeedleState needle_from_pose(const RigidTransform& tool_pose) const;
};

struct TrackedPose {
  RigidTransform pose;
  std::uint64_t timestamp_us = 0;
  bool held = false;  // steered poses never go stale
};

struct CueInputs {
  std::optional<TrackedPose> probe;
  std::optional<TrackedPose> needle;
  std::uint64_t now_us = 0;
  std::uint64_t grace_us = 100000;
  GuidanceMode mode = GuidanceMode::kInPlane;
  double normal_sign = 1.0;  // +1 or -1, flips the image normal
  std::optional<Vec3> insertion_point;
};

struct TrackingLostState {
  bool probe_lost = false;
  bool needle_lost = false;
};

using CueFrame = std::variant<InPlaneCueState, OutOfPlaneCueState, TrackingLostState>;

// Image plane of a tracked probe: probe pose composed with the extrinsic.
ImagePlane image_plane_from_probe(const RigidTransform& probe_pose,
                                  const ProbeGeometry& geom);

CueFrame cue_frame(const CueInputs& in, const ProbeGeometry& geom,
                   const NeedleGeometry& needle_geom, const CueConfig& cfg);

}  // namespace usnav
