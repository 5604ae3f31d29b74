#include <gtest/gtest.h>

#include "support.hpp"
#include "usnav/cues.hpp"
#include "usnav/experiments.hpp"

using namespace usnav;
using namespace usnav::testing;

namespace {

constexpr int kSteps = 200;  // per swept parameter

const ImagePlane kPlane = ImagePlane::from_pose(RigidTransform());  // z = 0, normal +z

// Needle lying in the plane pointing along +y, lifted by `offset` along the
// normal and tilted by `tilt` about the x axis.
NeedleState inplane_needle(double offset, double tilt) {
  const Vec3 d(0.0, std::cos(tilt), std::sin(tilt));
  return {Vec3(5.0, 40.0, offset), d, 120.0};
}

// Needle aimed straight down the normal with its tip `gap` mm before the plane.
NeedleState outofplane_needle(double gap) { return {Vec3(3.0, 50.0, -gap), Vec3(0, 0, 1), 120.0}; }

}  // namespace

TEST(Ramp, ClampsAndInterpolates) {
  EXPECT_EQ(ramp(-1.0, 0.5, 10.0), 0.0);
  EXPECT_EQ(ramp(0.5, 0.5, 10.0), 0.0);
  EXPECT_EQ(ramp(10.0, 0.5, 10.0), 1.0);
  EXPECT_EQ(ramp(99.0, 0.5, 10.0), 1.0);
  EXPECT_NEAR(ramp(5.25, 0.5, 10.0), 0.5, 1e-15);
}

TEST(InPlaneCues, AlignedNeedleIsAFixedPoint) {
  const CueConfig cfg;
  const NeedleState n = inplane_needle(0.0, 0.0);
  const InPlaneCueState s = inplane_cues(n, kPlane, n.origin(), cfg);
  EXPECT_DOUBLE_EQ(s.r2, s.r1);
  EXPECT_DOUBLE_EQ(s.r4, s.r3);
  EXPECT_DOUBLE_EQ(s.line_width, cfg.line_width_min);
  EXPECT_EQ(s.translation_palette, Palette::kAligned);
  EXPECT_EQ(s.rotation_palette, Palette::kAligned);
  EXPECT_EQ(s.trajectory_palette, Palette::kAligned);
  EXPECT_LT(max_abs_diff(s.shadow_origin, n.tip), 1e-12);
  EXPECT_LT(max_abs_diff(s.shadow_direction, n.direction), 1e-12);
  EXPECT_LT(max_abs_diff(s.traversed_start, n.origin()), 1e-12);
  EXPECT_LT(max_abs_diff(s.future_end, n.tip + cfg.future_length * n.direction), 1e-12);
}

TEST(InPlaneCues, WithinNearThresholdsStaysAligned) {
  const CueConfig cfg;
  for (int i = 0; i <= kSteps; ++i) {
    const double t = cfg.translation_near * i / kSteps;
    const double a = cfg.rotation_near * i / kSteps;
    const NeedleState n = inplane_needle(t, a);
    const InPlaneCueState s = inplane_cues(n, kPlane, n.origin(), cfg);
    EXPECT_EQ(s.trajectory_palette, Palette::kAligned) << i;
    EXPECT_DOUBLE_EQ(s.r2, s.r1);
  }
}

TEST(InPlaneCues, TranslationSweepIsMonotone) {
  const CueConfig cfg;
  double prev_r2 = 0.0, prev_w = 0.0;
  for (int i = 0; i <= kSteps; ++i) {
    const double offset = 15.0 * i / kSteps;
    const NeedleState n = inplane_needle(offset, 0.0);
    const InPlaneCueState s = inplane_cues(n, kPlane, n.origin(), cfg);
    EXPECT_NEAR(s.translation_offset, offset, 1e-12);
    EXPECT_GE(s.r2, prev_r2);
    EXPECT_GE(s.line_width, prev_w);
    EXPECT_DOUBLE_EQ(s.r1, cfg.r1_base);
    EXPECT_LE(s.r2, cfg.r2_base);
    EXPECT_DOUBLE_EQ(s.r4, s.r3);  // translation does not leak into rotation
    prev_r2 = s.r2;
    prev_w = s.line_width;
  }
  EXPECT_DOUBLE_EQ(prev_r2, cfg.r2_base);
  EXPECT_DOUBLE_EQ(prev_w, cfg.line_width_max);
}

TEST(InPlaneCues, RotationSweepIsMonotone) {
  const CueConfig cfg;
  double prev_r4 = 0.0;
  for (int i = 0; i <= kSteps; ++i) {
    const double tilt = 20.0 * kDegree * i / kSteps;
    NeedleState n = inplane_needle(0.0, tilt);
    // Keep the tip on the plane so only rotation changes.
    n.tip.z() = 0.0;
    const InPlaneCueState s = inplane_cues(n, kPlane, n.origin(), cfg);
    EXPECT_NEAR(s.rotation_offset, tilt, 1e-12);
    EXPECT_GE(s.r4, prev_r4);
    EXPECT_DOUBLE_EQ(s.r3, cfg.r3_base);
    EXPECT_DOUBLE_EQ(s.r2, s.r1);
    prev_r4 = s.r4;
  }
  EXPECT_DOUBLE_EQ(prev_r4, cfg.r4_base);
}

TEST(InPlaneCues, SignedOffsetAndSymmetry) {
  const CueConfig cfg;
  for (int i = 1; i <= kSteps; ++i) {
    const double offset = 12.0 * i / kSteps;
    const NeedleState up = inplane_needle(offset, 0.0), down = inplane_needle(-offset, 0.0);
    const InPlaneCueState a = inplane_cues(up, kPlane, up.origin(), cfg);
    const InPlaneCueState b = inplane_cues(down, kPlane, down.origin(), cfg);
    EXPECT_NEAR(a.translation_offset, -b.translation_offset, 1e-12);
    EXPECT_DOUBLE_EQ(a.r2, b.r2);
  }
}

TEST(InPlaneCues, SegmentsFollowTheShadowLine) {
  Rng rng(4);
  const CueConfig cfg;
  for (int i = 0; i < 1000; ++i) {
    const ImagePlane plane = ImagePlane::from_pose(random_pose(rng));
    NeedleState n{random_vec(rng, 100), random_unit(rng), 120.0};
    if (std::abs(n.direction.dot(plane.normal)) > 0.9) continue;
    const InPlaneCueState s = inplane_cues(n, plane, n.origin(), cfg);
    for (const Vec3& p : {s.traversed_start, s.traversed_end, s.future_end}) {
      EXPECT_LT(std::abs((p - plane.origin).dot(plane.normal)), 1e-9);
      EXPECT_LT(s.shadow_direction.cross(p - s.shadow_origin).norm(), 1e-9);
    }
    // The traversed part ends where the future part starts, at the shadow tip.
    EXPECT_EQ(s.traversed_end, s.future_start);
    EXPECT_GE((s.future_end - s.future_start).dot(s.shadow_direction), 0.0);
  }
}

TEST(OutOfPlaneCues, ApproachSweepWalksThroughModes) {
  const CueConfig cfg;
  double prev_inner = 0.0, prev_tip = 1e9;
  int stage = 0;  // 0 far, 1 near, 2 contact
  for (int i = 0; i <= kSteps; ++i) {
    const double gap = 40.0 * (kSteps - i) / kSteps;
    const OutOfPlaneCueState s = outofplane_cues(outofplane_needle(gap), kPlane, cfg);
    EXPECT_NEAR(s.distance, gap, 1e-12);
    EXPECT_LT(max_abs_diff(s.hit_point, Vec3(3.0, 50.0, 0.0)), 1e-12);
    const int now = s.display_mode == DisplayMode::kFarSphere ? 0
                    : s.display_mode == DisplayMode::kNearCircles ? 1 : 2;
    EXPECT_GE(now, stage) << "gap " << gap;
    stage = now;
    EXPECT_LE(s.tip_radius, prev_tip);
    prev_tip = s.tip_radius;
    if (now == 1) {
      EXPECT_GE(s.inner_radius, prev_inner);
      EXPECT_LE(s.inner_radius, s.outer_radius);
      prev_inner = s.inner_radius;
    }
    EXPECT_EQ(s.sphere_visible, now == 0);
    EXPECT_EQ(s.circles_visible, now == 1);
  }
  EXPECT_EQ(stage, 2);
}

TEST(OutOfPlaneCues, ContactFixedPoint) {
  const CueConfig cfg;
  const OutOfPlaneCueState s = outofplane_cues(outofplane_needle(0.0), kPlane, cfg);
  EXPECT_EQ(s.display_mode, DisplayMode::kContact);
  EXPECT_EQ(s.tip_palette, Palette::kContact);
  EXPECT_EQ(palette_color(s.tip_palette, cfg), "#FF0000");
  EXPECT_DOUBLE_EQ(s.image_alpha, cfg.contact_image_alpha);
  EXPECT_DOUBLE_EQ(s.tip_radius, cfg.tip_radius_min);
  EXPECT_FALSE(s.circles_visible);
  EXPECT_FALSE(s.sphere_visible);
  // Far away: opaque image, full-size tip.
  const OutOfPlaneCueState far = outofplane_cues(outofplane_needle(100.0), kPlane, cfg);
  EXPECT_DOUBLE_EQ(far.image_alpha, 1.0);
  EXPECT_DOUBLE_EQ(far.tip_radius, cfg.tip_radius_max);
}

TEST(OutOfPlaneCues, CirclesMergeAtTheContactBoundary) {
  const CueConfig cfg;
  const double just_outside = cfg.contact_epsilon * 1.0001;
  const OutOfPlaneCueState s = outofplane_cues(outofplane_needle(just_outside), kPlane, cfg);
  ASSERT_EQ(s.display_mode, DisplayMode::kNearCircles);
  EXPECT_NEAR(s.inner_radius, s.outer_radius, 0.2);
}

TEST(CueConfig, ValidationRejectsUnorderedRanges) {
  CueConfig c;
  EXPECT_NO_THROW(c.validate());
  c.translation_far = c.translation_near;
  EXPECT_THROW(c.validate(), Error);
  c = CueConfig{};
  c.r2_base = c.r1_base / 2;
  EXPECT_THROW(c.validate(), Error);
  c = CueConfig{};
  c.contact_image_alpha = 1.0;
  EXPECT_THROW(c.validate(), Error);
}

TEST(CueFrame, SelectsModeAndReportsStaleTools) {
  const ProbeGeometry geom = default_simulated_probe().geometry;
  const NeedleGeometry ng;
  const CueConfig cfg;
  CueInputs in;
  in.probe = TrackedPose{RigidTransform(), 1000, false};
  in.needle = TrackedPose{RigidTransform(), 1000, false};
  in.now_us = 1000;
  EXPECT_TRUE(std::holds_alternative<InPlaneCueState>(cue_frame(in, geom, ng, cfg)));
  in.mode = GuidanceMode::kOutOfPlane;
  in.needle = TrackedPose{RigidTransform::from_axis_angle(Vec3(1, 0, 0), 90.0 * kDegree, Vec3(0, 0, -200)), 1000, false};
  EXPECT_TRUE(std::holds_alternative<OutOfPlaneCueState>(cue_frame(in, geom, ng, cfg)));

  in.now_us = 1000 + in.grace_us + 1;
  const CueFrame lost = cue_frame(in, geom, ng, cfg);
  ASSERT_TRUE(std::holds_alternative<TrackingLostState>(lost));
  EXPECT_TRUE(std::get<TrackingLostState>(lost).needle_lost);
  EXPECT_TRUE(std::get<TrackingLostState>(lost).probe_lost);

  in.probe->held = true;  // steered poses never go stale
  const CueFrame half = cue_frame(in, geom, ng, cfg);
  ASSERT_TRUE(std::holds_alternative<TrackingLostState>(half));
  EXPECT_FALSE(std::get<TrackingLostState>(half).probe_lost);
  in.needle.reset();
  EXPECT_TRUE(std::get<TrackingLostState>(cue_frame(in, geom, ng, cfg)).needle_lost);
}

TEST(CueFrame, NormalSignFlipsDistance) {
  const ProbeGeometry geom = default_simulated_probe().geometry;
  const NeedleGeometry ng;
  CueInputs in;
  in.mode = GuidanceMode::kOutOfPlane;
  in.probe = TrackedPose{RigidTransform(), 0, true};
  // Needle axis (local +y) rotated onto +z, tip 30 mm before the plane.
  const RigidTransform np = RigidTransform::from_axis_angle(Vec3(1, 0, 0), 90.0 * kDegree, Vec3(0, 50, -150));
  in.needle = TrackedPose{np, 0, true};
  const double d_pos = std::get<OutOfPlaneCueState>(cue_frame(in, geom, ng, {})).distance;
  in.normal_sign = -1.0;
  const double d_neg = std::get<OutOfPlaneCueState>(cue_frame(in, geom, ng, {})).distance;
  EXPECT_NEAR(d_pos, -d_neg, 1e-12);
  EXPECT_NEAR(std::abs(d_pos), 30.0, 1e-9);
}

TEST(ImagePlaneFromProbe, OriginIsTheToolOrigin) {
  Rng rng(6);
  const ProbeGeometry geom = default_simulated_probe().geometry;
  for (int i = 0; i < 100; ++i) {
    const RigidTransform pose = random_pose(rng);
    const ImagePlane p = image_plane_from_probe(pose, geom);
    EXPECT_NO_THROW(p.validate());
    EXPECT_LT(max_abs_diff(p.origin, pose.translation()), 1e-9);
    EXPECT_LT(max_abs_diff(p.normal, pose.rotation().col(2)), 1e-12);
  }
}
