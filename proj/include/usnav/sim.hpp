#pragma once

#include <cstdint>
#include <vector>

#include "usnav/calibration.hpp"
#include "usnav/geometry.hpp"
#include "usnav/tracking.hpp"

namespace usnav {

// Parametric stand-in for the headset depth camera. The camera sits at the
// origin looking down +z; z is the depth coordinate.
struct DepthCameraModel {
  double sigma_xy = 0.3;                 // mm, lateral noise
  double sigma_z = 1.0;                  // mm, depth noise
  double quantization = 1.0;             // mm, depth step (0 disables)
  double fov_half_angle = 60.0 * 3.14159265358979323846 / 180.0;  // rad
  double occlusion_probability = 0.0;    // per marker

  static DepthCameraModel noiseless() { return {0.0, 0.0, 0.0, 60.0 * 3.14159265358979323846 / 180.0, 0.0}; }
  // Throws kConfig on negative values or a probability outside [0, 1].
  void validate() const;
};

struct PlacedTool {
  const ToolDefinition* tool;
  RigidTransform pose;  // tool-local -> camera
};

// Transforms every tool's markers by its true pose, applies noise then depth
// quantization, drops markers outside the field of view or by occlusion, adds
// clutter and shuffles. Deterministic in `seed`.
MarkerObservation synthesize_observation(const std::vector<PlacedTool>& scene,
                                         const DepthCameraModel& camera,
                                         std::uint64_t seed,
                                         const std::vector<Vec3>& clutter = {},
                                         std::uint64_t timestamp_us = 0);

// Mixes a master seed with a stream index (splitmix64 finalizer).
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index);

// Full-size synthetic ultrasound frame: fan mask plus speckle-like texture
// that is zero outside the fan.
struct SyntheticUltrasound {
  FanSpec fan;
  ImageMask mask;
  GrayImage image;
};

// Convex fan that fills a width x height frame the way a curvilinear probe
// display does (default 1053 x 604).
FanSpec default_fan(int width = 1053, int height = 604);
SyntheticUltrasound synthetic_ultrasound(const FanSpec& fan, std::uint64_t seed);

}  // namespace usnav
