#include <gtest/gtest.h>

#include <cmath>

#include "support.hpp"
#include "usnav/geometry.hpp"

using namespace usnav;
using namespace usnav::testing;

namespace {

constexpr int kCases = 10000;

ImagePlane random_plane(Rng& rng) { return ImagePlane::from_pose(random_pose(rng)); }

// Needle whose direction makes at least `min_cos` with the plane normal.
NeedleState random_needle(Rng& rng, const ImagePlane& plane, double min_cos) {
  for (;;) {
    const Vec3 d = random_unit(rng);
    if (std::abs(d.dot(plane.normal)) < min_cos) continue;
    return {random_vec(rng, 200.0), d, uniform(rng, 20.0, 200.0)};
  }
}

}  // namespace

TEST(RigidTransform, RejectsReflectionsAndSkew) {
  Mat3 flip = Mat3::Identity();
  flip(2, 2) = -1.0;
  EXPECT_THROW(RigidTransform(flip, Vec3::Zero()), Error);
  Mat3 skew = Mat3::Identity();
  skew(0, 1) = 1e-6;
  EXPECT_THROW(RigidTransform(skew, Vec3::Zero()), Error);
}

TEST(RigidTransform, QuaternionRoundTripIsCanonical) {
  Rng rng(11);
  for (int i = 0; i < 1000; ++i) {
    const RigidTransform t = random_pose(rng);
    const auto q = t.quaternion();
    EXPECT_GE(q[0], 0.0);
    const RigidTransform back = RigidTransform::from_quaternion(q, t.translation());
    EXPECT_LT((back.rotation() - t.rotation()).cwiseAbs().maxCoeff(), 1e-12);
  }
  EXPECT_THROW(RigidTransform::from_quaternion({1.0, 0.1, 0.0, 0.0}, Vec3::Zero()), Error);
}

TEST(RigidTransform, CompositionAndInverse) {
  Rng rng(12);
  for (int i = 0; i < 1000; ++i) {
    const RigidTransform a = random_pose(rng), b = random_pose(rng);
    const Vec3 p = random_vec(rng, 100.0);
    EXPECT_LT(max_abs_diff((a * b).apply(p), a.apply(b.apply(p))), 1e-9);
    EXPECT_LT(max_abs_diff(a.inverse().apply(a.apply(p)), p), 1e-9);
  }
}

TEST(ShadowProjection, MatchesInPlaneBasisOracle) {
  Rng rng(21);
  double worst_residual = 0.0, worst_oracle = 0.0;
  for (int i = 0; i < kCases; ++i) {
    const ImagePlane plane = random_plane(rng);
    NeedleState n{random_vec(rng, 200.0), random_unit(rng), 100.0};
    if ((n.direction - n.direction.dot(plane.normal) * plane.normal).norm() < 1e-3) continue;
    const ProjectedNeedle s = project_needle_to_plane(n, plane);

    worst_residual = std::max(worst_residual, std::abs((s.origin - plane.origin).dot(plane.normal)));
    worst_residual = std::max(worst_residual, std::abs(s.direction.dot(plane.normal)));
    EXPECT_NEAR(s.direction.norm(), 1.0, 1e-12);

    // Oracle: express the tip in the in-plane basis and drop the normal part.
    const Vec3 rel = n.tip - plane.origin;
    const Vec3 oracle = plane.origin + rel.dot(plane.axis_x) * plane.axis_x +
                        rel.dot(plane.axis_y) * plane.axis_y;
    worst_oracle = std::max(worst_oracle, max_abs_diff(s.origin, oracle));
    // Shadow direction keeps the needle's in-plane heading.
    EXPECT_GT(s.direction.dot(n.direction), 0.0);
  }
  EXPECT_LT(worst_residual, 1e-9);
  EXPECT_LT(worst_oracle, 1e-9);
}

TEST(ShadowProjection, PerpendicularNeedleIsDegenerate) {
  const ImagePlane plane = ImagePlane::from_pose(RigidTransform());
  const NeedleState n{Vec3(1, 2, 3), Vec3(0, 0, 1), 50.0};
  try {
    project_needle_to_plane(n, plane);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kDegenerateProjection);
  }
  // The tip projection alone is always defined.
  EXPECT_LT(max_abs_diff(project_tip_to_plane(n, plane), Vec3(1, 2, 0)), 1e-12);
}

TEST(PlaneHit, ExactHitLiesOnPlane) {
  Rng rng(31);
  double worst = 0.0;
  for (int i = 0; i < kCases; ++i) {
    const ImagePlane plane = random_plane(rng);
    const NeedleState n = random_needle(rng, plane, 0.1);
    const PlaneHit h = plane_distance_and_hit(n, plane, HitMode::kExact);
    worst = std::max(worst, std::abs((h.point - plane.origin).dot(plane.normal)));
    // The hit is on the needle line.
    worst = std::max(worst, n.direction.cross(h.point - n.tip).norm());
    EXPECT_NEAR(h.distance, (plane.origin - n.tip).dot(plane.normal), 1e-9);
  }
  EXPECT_LT(worst, 1e-9);
}

TEST(PlaneHit, ModesAgreeForPerpendicularNeedle) {
  Rng rng(32);
  double worst = 0.0;
  for (int i = 0; i < kCases; ++i) {
    const ImagePlane plane = random_plane(rng);
    const NeedleState n{random_vec(rng, 200.0), plane.normal, 120.0};
    const PlaneHit a = plane_distance_and_hit(n, plane, HitMode::kPaper);
    const PlaneHit b = plane_distance_and_hit(n, plane, HitMode::kExact);
    worst = std::max(worst, max_abs_diff(a.point, b.point));
    worst = std::max(worst, std::abs(a.distance - b.distance));
  }
  EXPECT_LT(worst, 1e-9);
}

TEST(PlaneHit, ParallelRayThrows) {
  const ImagePlane plane = ImagePlane::from_pose(RigidTransform());
  const NeedleState n{Vec3(0, 0, 10), Vec3(1, 0, 0), 50.0};
  EXPECT_THROW(plane_distance_and_hit(n, plane, HitMode::kExact), Error);
  // The literal form never divides and stays defined.
  const PlaneHit h = plane_distance_and_hit(n, plane, HitMode::kPaper);
  EXPECT_DOUBLE_EQ(h.distance, -10.0);
}

TEST(ImageIntersection, RecoversForwardConstructedSolutions) {
  Rng rng(41);
  double worst = 0.0;
  for (int i = 0; i < kCases; ++i) {
    const RigidTransform image = random_pose(rng);
    const ImagePlane plane = ImagePlane::from_pose(image);
    const double x = uniform(rng, -100, 100), y = uniform(rng, 0, 200);
    const double l = 120.0, dl = uniform(rng, -10, 10);
    Vec3 d;
    do d = random_unit(rng);
    while (std::abs(d.dot(plane.normal)) < 0.1);
    const Vec3 hit = image.apply(Vec3(x, y, 0.0));
    const Vec3 origin = hit - (l + dl) * d;
    const NeedleState n{origin + l * d, d, l};

    const ImageIntersection s = solve_image_intersection(image, n, l);
    worst = std::max({worst, std::abs(s.x - x), std::abs(s.y - y), std::abs(s.delta_length - dl)});
  }
  EXPECT_LT(worst, 1e-9);
}

TEST(ImageIntersection, InvariantUnderRigidMotion) {
  Rng rng(42);
  double worst = 0.0;
  for (int i = 0; i < kCases; ++i) {
    const RigidTransform image = random_pose(rng);
    const NeedleState n = random_needle(rng, ImagePlane::from_pose(image), 0.1);
    const RigidTransform g = random_pose(rng);
    const ImageIntersection a = solve_image_intersection(image, n, n.length);
    const ImageIntersection b = solve_image_intersection(g * image, n.transformed(g), n.length);
    worst = std::max({worst, std::abs(a.x - b.x), std::abs(a.y - b.y),
                      std::abs(a.delta_length - b.delta_length)});
  }
  EXPECT_LT(worst, 1e-9);
}

TEST(ImageIntersection, ParallelWireIsSingular) {
  const NeedleState n{Vec3(0, 0, 5), Vec3(0, 1, 0), 120.0};
  try {
    solve_image_intersection(RigidTransform(), n, 120.0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kSingularSystem);
  }
}

TEST(BiopsyError, HandComputedCrossProducts) {
  // origin (0,0,0), d = x, l = 10: (1,0,0) x (10,3,4) = (0,-4,3) -> 5
  const NeedleState a{Vec3(10, 0, 0), Vec3(1, 0, 0), 10.0};
  BiopsyError e = biopsy_error(a, Vec3(10, 3, 4));
  EXPECT_NEAR(e.directional, 5.0, 1e-12);
  EXPECT_NEAR(e.depth, 0.0, 1e-12);

  e = biopsy_error(a, Vec3(12, 0, 0));  // stopped 2 mm short
  EXPECT_NEAR(e.directional, 0.0, 1e-12);
  EXPECT_NEAR(e.depth, -2.0, 1e-12);

  // d = (0.6, 0.8, 0), O = (1,1,1), l = 5: d x (3,4,2) = (1.6,-1.2,0) -> 2
  const NeedleState b{Vec3(4, 5, 1), Vec3(0.6, 0.8, 0.0), 5.0};
  e = biopsy_error(b, Vec3(4, 5, 3));
  EXPECT_NEAR(e.directional, 2.0, 1e-12);
  EXPECT_NEAR(e.depth, 0.0, 1e-12);

  e = biopsy_error(b, Vec3(1, 1, 1) + 3.0 * Vec3(0.6, 0.8, 0.0));  // 2 mm past
  EXPECT_NEAR(e.directional, 0.0, 1e-12);
  EXPECT_NEAR(e.depth, 2.0, 1e-12);
}

TEST(BiopsyError, DirectionalIgnoresSlidingAlongTheLine) {
  Rng rng(51);
  for (int i = 0; i < 1000; ++i) {
    const NeedleState n{random_vec(rng, 100), random_unit(rng), 80.0};
    const Vec3 m = random_vec(rng, 100);
    const double s = uniform(rng, -30, 30);
    const NeedleState slid{n.tip + s * n.direction, n.direction, n.length};
    const BiopsyError a = biopsy_error(n, m), b = biopsy_error(slid, m);
    EXPECT_NEAR(a.directional, b.directional, 1e-9);
    EXPECT_NEAR(b.depth - a.depth, s, 1e-9);
  }
}

TEST(BiopsySuccess, RulesCompareDepthByMagnitude) {
  EXPECT_TRUE(biopsy_success({2.0, -3.0}, 5.0));
  EXPECT_FALSE(biopsy_success({2.0, -6.0}, 5.0));
  EXPECT_FALSE(biopsy_success({6.0, 0.0}, 5.0));
  EXPECT_TRUE(biopsy_success({6.0, 0.0}, 5.0, SuccessRule::kDepthOnly));
  EXPECT_TRUE(biopsy_success({1.0, 9.0}, 5.0, SuccessRule::kDirectionOnly));
  EXPECT_THROW(biopsy_success({0, 0}, 0.0), Error);
}

TEST(ImagePlane, BasisFromNormalIsRightHanded) {
  Rng rng(61);
  for (int i = 0; i < 1000; ++i) {
    const ImagePlane p = ImagePlane::from_origin_normal(random_vec(rng, 10), random_unit(rng));
    EXPECT_NO_THROW(p.validate());
    EXPECT_NO_THROW(p.flipped().validate());
  }
  EXPECT_THROW(ImagePlane::from_origin_normal(Vec3::Zero(), Vec3(0, 0, 2)), Error);
}
