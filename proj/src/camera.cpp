#include "usnav/sim.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace usnav {

void DepthCameraModel::validate() const {
  if (!(sigma_xy >= 0.0) || !(sigma_z >= 0.0) || !(quantization >= 0.0)) {
    throw Error(ErrorCode::kConfig, "camera noise and quantization must be non-negative");
  }
  if (!(fov_half_angle > 0.0) || fov_half_angle >= 3.14159265358979323846 / 2.0) {
    throw Error(ErrorCode::kConfig, "camera field-of-view half-angle must be in (0, pi/2)");
  }
  if (!(occlusion_probability >= 0.0 && occlusion_probability <= 1.0)) {
    throw Error(ErrorCode::kConfig, "occlusion probability must be in [0, 1]");
  }
}

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) {
  std::uint64_t z = master + 0x9E3779B97F4A7C15ull * (index + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

MarkerObservation synthesize_observation(const std::vector<PlacedTool>& scene,
                                         const DepthCameraModel& camera,
                                         std::uint64_t seed,
                                         const std::vector<Vec3>& clutter,
                                         std::uint64_t timestamp_us) {
  camera.validate();
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> unit(0.0, 1.0);
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  const double cos_fov = std::cos(camera.fov_half_angle);

  MarkerObservation obs;
  obs.timestamp_us = timestamp_us;
  auto emit = [&](const Vec3& exact) {
    // Draw every random number unconditionally so that enabling one effect
    // does not reshuffle the others.
    const double nx = unit(rng), ny = unit(rng), nz = unit(rng);
    const double drop = coin(rng);
    if (exact.z() <= 0.0 || exact.z() < cos_fov * exact.norm()) return;
    if (drop < camera.occlusion_probability) return;
    Vec3 p(exact.x() + camera.sigma_xy * nx, exact.y() + camera.sigma_xy * ny,
           exact.z() + camera.sigma_z * nz);
    if (camera.quantization > 0.0) {
      p.z() = std::round(p.z() / camera.quantization) * camera.quantization;
    }
    obs.points.push_back(p);
  };

  for (const PlacedTool& placed : scene) {
    for (const Vec3& m : placed.tool->markers()) emit(placed.pose.apply(m));
  }
  for (const Vec3& c : clutter) emit(c);
  std::shuffle(obs.points.begin(), obs.points.end(), rng);
  return obs;
}

FanSpec default_fan(int width, int height) {
  FanSpec fan;
  fan.width = width;
  fan.height = height;
  fan.apex_u = static_cast<double>(width / 2);
  fan.top_v = std::max(1, height / 30);
  fan.top_half_span = std::round(0.1425 * width);
  fan.half_angle = 35.0 * 3.14159265358979323846 / 180.0;
  // Arc bottom lands a few rows above the last image row.
  fan.radius = std::floor((height - 1) - fan.apex_v()) - 0.03 * height;
  return fan;
}

SyntheticUltrasound synthetic_ultrasound(const FanSpec& fan, std::uint64_t seed) {
  SyntheticUltrasound out{fan, fan.rasterize(), {}};
  out.image.width = fan.width;
  out.image.height = fan.height;
  out.image.pixels.assign(static_cast<std::size_t>(fan.width) * fan.height, 0);
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> speckle(0, 90);
  for (int v = 0; v < fan.height; ++v) {
    // Brightness falls off with depth like an attenuated echo.
    const double gain = 1.0 - 0.6 * static_cast<double>(v) / fan.height;
    for (int u = 0; u < fan.width; ++u) {
      const int s = speckle(rng);
      if (!out.mask.at(u, v)) continue;
      const int value = static_cast<int>(gain * (40 + 1.5 * s));
      out.image.pixels[static_cast<std::size_t>(v) * fan.width + u] =
          static_cast<std::uint8_t>(std::clamp(value, 1, 255));
    }
  }
  return out;
}

}  // namespace usnav
