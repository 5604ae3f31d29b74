#pragma once

#include <array>

#include <Eigen/Core>
#include <Eigen/Geometry>

#include "usnav/error.hpp"

namespace usnav {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

// Tolerance (mm, or unitless for directions) used by every closed-form op.
inline constexpr double kAnalyticTolerance = 1e-9;

// Proper rigid motion p' = R p + t. Rotation is validated on construction.
class RigidTransform {
 public:
  RigidTransform() : rotation_(Mat3::Identity()), translation_(Vec3::Zero()) {}

  // Throws kInvalidArgument unless rotation is orthonormal with det +1 (1e-9).
  RigidTransform(const Mat3& rotation, const Vec3& translation);

  static RigidTransform identity() { return {}; }
  // Quaternion is (w, x, y, z) and must be unit to 1e-9.
  static RigidTransform from_quaternion(const std::array<double, 4>& wxyz,
                                        const Vec3& translation);
  static RigidTransform from_axis_angle(const Vec3& axis, double angle_rad,
                                        const Vec3& translation);

  const Mat3& rotation() const { return rotation_; }
  const Vec3& translation() const { return translation_; }

  Vec3 apply(const Vec3& point) const { return rotation_ * point + translation_; }
  Vec3 rotate(const Vec3& direction) const { return rotation_ * direction; }

  RigidTransform inverse() const;
  // (a * b).apply(p) == a.apply(b.apply(p))
  RigidTransform operator*(const RigidTransform& rhs) const;

  // Canonical form has w >= 0.
  std::array<double, 4> quaternion() const;

 private:
  Mat3 rotation_;
  Vec3 translation_;
};

bool is_rotation(const Mat3& m, double tol = kAnalyticTolerance);

// Ultrasound image plane in tracker space. axis_x x axis_y == normal.
struct ImagePlane {
  Vec3 origin;
  Vec3 normal;
  Vec3 axis_x;
  Vec3 axis_y;

  // Plane spanned by the pose's local x/y axes through its origin.
  static ImagePlane from_pose(const RigidTransform& pose);
  // Builds an orthonormal in-plane basis for an arbitrary normal.
  static ImagePlane from_origin_normal(const Vec3& origin, const Vec3& normal);

  ImagePlane flipped() const { return {origin, -normal, axis_y, axis_x}; }
  ImagePlane transformed(const RigidTransform& t) const;
  void validate() const;
};

// Straight needle (or k-wire). The tool origin sits `length` behind the tip.
struct NeedleState {
  Vec3 tip;
  Vec3 direction;
  double length = 0.0;

  Vec3 origin() const { return tip - length * direction; }
  NeedleState transformed(const RigidTransform& t) const {
    return {t.apply(tip), t.rotate(direction), length};
  }
  void validate() const;
};

struct ProjectedNeedle {
  Vec3 origin;
  Vec3 direction;
};

// Orthogonal projection of the needle tip onto the plane (always defined).
Vec3 project_tip_to_plane(const NeedleState& needle, const ImagePlane& plane);

// Virtual needle shadow on the image plane. Throws kDegenerateProjection when
// the needle is perpendicular to the plane.
ProjectedNeedle project_needle_to_plane(const NeedleState& needle,
                                        const ImagePlane& plane);

enum class HitMode {
  kPaper,  // P = O_T + d * d_T (exact only for a perpendicular needle)
  kExact,  // true ray/plane intersection
};

struct PlaneHit {
  double distance;  // signed, (O_I - O_T) . n_I
  Vec3 point;
};

PlaneHit plane_distance_and_hit(const NeedleState& needle,
                                const ImagePlane& plane,
                                HitMode mode = HitMode::kExact);

struct ImageIntersection {
  double x;           // mm, image frame
  double y;           // mm, image frame
  double delta_length;  // mm along the wire beyond nominal length
};

// Solves image_pose * [x, y, 0] = O + (l + dl) d for (x, y, dl), where O is the
// needle's origin and l the nominal length.
ImageIntersection solve_image_intersection(const RigidTransform& image_pose,
                                           const NeedleState& needle,
                                           double nominal_length);

struct BiopsyError {
  double directional;  // >= 0
  double depth;        // signed; > 0 means overshoot
};

BiopsyError biopsy_error(const NeedleState& needle, const Vec3& target);

enum class SuccessRule { kConjunctive, kDepthOnly, kDirectionOnly };

// Depth is compared by magnitude.
bool biopsy_success(const BiopsyError& err, double target_radius,
                    SuccessRule rule = SuccessRule::kConjunctive);

}  // namespace usnav
