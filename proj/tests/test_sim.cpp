#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "support.hpp"
#include "usnav/experiments.hpp"
#include "usnav/sim.hpp"
#include "usnav/stats.hpp"

using namespace usnav;
using namespace usnav::testing;

namespace {

constexpr double kDeg = 3.14159265358979323846 / 180.0;

DepthCameraModel camera(double sxy, double sz, double q) {
  DepthCameraModel c = DepthCameraModel::noiseless();
  c.sigma_xy = sxy;
  c.sigma_z = sz;
  c.quantization = q;
  return c;
}

}  // namespace

TEST(DepthCamera, NoiseHasConfiguredSpread) {
  const std::vector<Vec3> point{Vec3(10.0, -5.0, 500.0)};
  std::vector<double> xs, zs;
  for (std::uint64_t s = 0; s < 10000; ++s) {
    const MarkerObservation o = synthesize_observation({}, camera(0.3, 0.5, 0.0), s, point);
    ASSERT_EQ(o.points.size(), 1u);
    xs.push_back(o.points[0].x());
    zs.push_back(o.points[0].z());
  }
  EXPECT_NEAR(stats::mean(xs), 10.0, 0.02);
  EXPECT_NEAR(stats::mean(zs), 500.0, 0.03);
  EXPECT_GT(stats::stddev(xs), 0.27);
  EXPECT_LT(stats::stddev(xs), 0.33);
  EXPECT_GT(stats::stddev(zs), 0.45);
  EXPECT_LT(stats::stddev(zs), 0.55);
}

TEST(DepthCamera, QuantizationSnapsDepthOnly) {
  Rng rng(21);
  std::vector<Vec3> pts;
  for (int i = 0; i < 500; ++i) pts.emplace_back(uniform(rng, -50, 50), uniform(rng, -50, 50), uniform(rng, 300, 700));
  const MarkerObservation o = synthesize_observation({}, camera(0.0, 0.0, 2.0), 1, pts);
  ASSERT_EQ(o.points.size(), pts.size());
  std::multiset<double> expected_x;
  for (const Vec3& p : pts) expected_x.insert(p.x());
  for (const Vec3& p : o.points) {
    EXPECT_NEAR(std::remainder(p.z(), 2.0), 0.0, 1e-9);
    EXPECT_EQ(expected_x.count(p.x()), 1u);
  }
}

TEST(DepthCamera, FieldOfViewDropsOutsidePoints) {
  DepthCameraModel c = DepthCameraModel::noiseless();
  c.fov_half_angle = 30.0 * kDeg;
  const double z = 400.0;
  const std::vector<Vec3> pts{Vec3(z * std::tan(29.0 * kDeg), 0, z), Vec3(0, z * std::tan(31.0 * kDeg), z),
                              Vec3(0, 0, -z), Vec3(0, 0, z)};
  const MarkerObservation o = synthesize_observation({}, c, 3, pts);
  EXPECT_EQ(o.points.size(), 2u);
  for (const Vec3& p : o.points) EXPECT_GT(p.z(), 0.0);
}

TEST(DepthCamera, OcclusionRateAndIndependentStreams) {
  Rng rng(22);
  std::vector<Vec3> pts;
  for (int i = 0; i < 4000; ++i) pts.emplace_back(uniform(rng, -50, 50), uniform(rng, -50, 50), uniform(rng, 300, 700));
  DepthCameraModel noisy = camera(0.3, 1.0, 0.0);
  const MarkerObservation all = synthesize_observation({}, noisy, 9, pts);
  noisy.occlusion_probability = 0.25;
  const MarkerObservation some = synthesize_observation({}, noisy, 9, pts);
  const double kept = static_cast<double>(some.points.size()) / pts.size();
  EXPECT_NEAR(kept, 0.75, 0.03);
  // Switching occlusion on must not change the noise on surviving markers.
  auto key = [](const Vec3& p) { return std::tuple(p.x(), p.y(), p.z()); };
  std::set<std::tuple<double, double, double>> full;
  for (const Vec3& p : all.points) full.insert(key(p));
  for (const Vec3& p : some.points) EXPECT_TRUE(full.count(key(p)));
}

TEST(DepthCamera, DeterministicInSeedAndPlacesTools) {
  const ToolDefinition tool = default_probe_tool();
  Rng rng(23);
  const RigidTransform pose(random_rotation(rng), Vec3(20, -10, 500));
  const std::vector<PlacedTool> scene{{&tool, pose}};
  const DepthCameraModel c = camera(0.3, 1.0, 1.0);
  const MarkerObservation a = synthesize_observation(scene, c, 77, {}, 5);
  const MarkerObservation b = synthesize_observation(scene, c, 77, {}, 5);
  const MarkerObservation d = synthesize_observation(scene, c, 78, {}, 5);
  EXPECT_EQ(a.points, b.points);
  EXPECT_NE(a.points, d.points);
  EXPECT_EQ(a.timestamp_us, 5u);

  const MarkerObservation exact = synthesize_observation(scene, DepthCameraModel::noiseless(), 1);
  ASSERT_EQ(exact.points.size(), tool.marker_count());
  for (const Vec3& m : tool.markers()) {
    const Vec3 want = pose.apply(m);
    const bool found = std::any_of(exact.points.begin(), exact.points.end(),
                                   [&](const Vec3& p) { return (p - want).norm() < 1e-9; });
    EXPECT_TRUE(found);
  }
}

TEST(DepthCamera, ValidateRejectsBadModels) {
  EXPECT_THROW(camera(-1, 0, 0).validate(), Error);
  DepthCameraModel c = DepthCameraModel::noiseless();
  c.occlusion_probability = 1.5;
  EXPECT_THROW(c.validate(), Error);
  c = DepthCameraModel::noiseless();
  c.fov_half_angle = 90.0 * kDeg;
  EXPECT_THROW(c.validate(), Error);
}

TEST(DeriveSeed, MixesIndexAndMaster) {
  std::set<std::uint64_t> seen;
  for (std::uint64_t m = 0; m < 20; ++m) {
    for (std::uint64_t i = 0; i < 500; ++i) seen.insert(derive_seed(m, i));
  }
  EXPECT_EQ(seen.size(), 10000u);
  EXPECT_EQ(derive_seed(42, 3), derive_seed(42, 3));
}

TEST(SyntheticUltrasound, TextureOnlyInsideTheFan) {
  const FanSpec fan = default_fan();
  EXPECT_EQ(fan.width, 1053);
  EXPECT_EQ(fan.height, 604);
  const SyntheticUltrasound us = synthetic_ultrasound(fan, 4);
  EXPECT_TRUE(us.mask.is_single_component());
  std::size_t inside = 0;
  for (int v = 0; v < fan.height; ++v) {
    for (int u = 0; u < fan.width; ++u) {
      const std::uint8_t px = us.image.pixels[static_cast<std::size_t>(v) * fan.width + u];
      if (us.mask.at(u, v)) {
        ASSERT_GT(px, 0);
        ++inside;
      } else {
        ASSERT_EQ(px, 0);
      }
    }
  }
  EXPECT_EQ(inside, us.mask.valid_count());
  EXPECT_GT(inside, static_cast<std::size_t>(fan.width) * fan.height / 4);
  EXPECT_EQ(synthetic_ultrasound(fan, 4).image.pixels, us.image.pixels);
}
