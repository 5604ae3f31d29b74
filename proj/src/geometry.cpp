#include "usnav/geometry.hpp"

#include <cmath>
#include <string>

#include <Eigen/SVD>

namespace usnav {

namespace {

void require_unit(const Vec3& v, const char* what) {
  if (!v.allFinite() || std::abs(v.norm() - 1.0) >= kAnalyticTolerance) {
    throw Error(ErrorCode::kInvalidArgument,
                std::string(what) + " must be a finite unit vector");
  }
}

}  // namespace

const char* error_code_name(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
    case ErrorCode::kDegenerateProjection: return "DegenerateProjection";
    case ErrorCode::kRayParallelToPlane: return "RayParallelToPlane";
    case ErrorCode::kSingularSystem: return "SingularSystem";
    case ErrorCode::kInvalidTool: return "InvalidTool";
    case ErrorCode::kInsufficientMarkers: return "InsufficientMarkers";
    case ErrorCode::kDegenerateConfiguration: return "DegenerateConfiguration";
    case ErrorCode::kEmptyMask: return "EmptyMask";
    case ErrorCode::kDegenerateTopEdge: return "DegenerateTopEdge";
    case ErrorCode::kDimensionMismatch: return "DimensionMismatch";
    case ErrorCode::kMalformedPacket: return "MalformedPacket";
    case ErrorCode::kNonUnitQuaternion: return "NonUnitQuaternion";
    case ErrorCode::kUnknownSession: return "UnknownSession";
    case ErrorCode::kUnknownTool: return "UnknownTool";
    case ErrorCode::kMalformedMessage: return "MalformedMessage";
    case ErrorCode::kConfig: return "ConfigError";
    case ErrorCode::kIo: return "IoError";
    case ErrorCode::kTransport: return "TransportError";
  }
  return "Unknown";
}

bool is_rotation(const Mat3& m, double tol) {
  if (!m.allFinite()) return false;
  const Mat3 gram = m.transpose() * m;
  if ((gram - Mat3::Identity()).cwiseAbs().maxCoeff() > tol) return false;
  return std::abs(m.determinant() - 1.0) <= tol;
}

RigidTransform::RigidTransform(const Mat3& rotation, const Vec3& translation)
    : rotation_(rotation), translation_(translation) {
  if (!is_rotation(rotation_)) {
    throw Error(ErrorCode::kInvalidArgument,
                "rotation is not orthonormal with determinant +1");
  }
  if (!translation_.allFinite()) {
    throw Error(ErrorCode::kInvalidArgument, "translation is not finite");
  }
}

RigidTransform RigidTransform::from_quaternion(const std::array<double, 4>& q,
                                               const Vec3& translation) {
  const double norm =
      std::sqrt(q[0] * q[0] + q[1] * q[1] + q[2] * q[2] + q[3] * q[3]);
  if (!std::isfinite(norm) || std::abs(norm - 1.0) > kAnalyticTolerance) {
    throw Error(ErrorCode::kNonUnitQuaternion, "quaternion norm is not 1");
  }
  const Eigen::Quaterniond quat(q[0], q[1], q[2], q[3]);
  Mat3 r = quat.normalized().toRotationMatrix();
  return RigidTransform(r, translation);
}

RigidTransform RigidTransform::from_axis_angle(const Vec3& axis,
                                               double angle_rad,
                                               const Vec3& translation) {
  if (axis.norm() == 0.0) {
    return RigidTransform(Mat3::Identity(), translation);
  }
  return RigidTransform(
      Eigen::AngleAxisd(angle_rad, axis.normalized()).toRotationMatrix(),
      translation);
}

RigidTransform RigidTransform::inverse() const {
  RigidTransform out;
  out.rotation_ = rotation_.transpose();
  out.translation_ = -(out.rotation_ * translation_);
  return out;
}

RigidTransform RigidTransform::operator*(const RigidTransform& rhs) const {
  RigidTransform out;
  out.rotation_ = rotation_ * rhs.rotation_;
  out.translation_ = rotation_ * rhs.translation_ + translation_;
  return out;
}

std::array<double, 4> RigidTransform::quaternion() const {
  Eigen::Quaterniond q(rotation_);
  q.normalize();
  if (q.w() < 0.0) q.coeffs() = -q.coeffs();
  return {q.w(), q.x(), q.y(), q.z()};
}

ImagePlane ImagePlane::from_pose(const RigidTransform& pose) {
  const Mat3& r = pose.rotation();
  return {pose.translation(), r.col(2), r.col(0), r.col(1)};
}

ImagePlane ImagePlane::from_origin_normal(const Vec3& origin,
                                          const Vec3& normal) {
  require_unit(normal, "plane normal");
  // Seed with the world axis least aligned with the normal.
  Eigen::Index min_axis = 0;
  normal.cwiseAbs().minCoeff(&min_axis);
  Vec3 seed = Vec3::Zero();
  seed[min_axis] = 1.0;
  Vec3 ax = (seed - seed.dot(normal) * normal).normalized();
  Vec3 ay = normal.cross(ax);
  return {origin, normal, ax, ay};
}

ImagePlane ImagePlane::transformed(const RigidTransform& t) const {
  return {t.apply(origin), t.rotate(normal), t.rotate(axis_x),
          t.rotate(axis_y)};
}

void ImagePlane::validate() const {
  if (!origin.allFinite()) {
    throw Error(ErrorCode::kInvalidArgument, "plane origin is not finite");
  }
  require_unit(normal, "plane normal");
  require_unit(axis_x, "plane x axis");
  require_unit(axis_y, "plane y axis");
  if (std::abs(axis_x.dot(axis_y)) > kAnalyticTolerance ||
      (axis_x.cross(axis_y) - normal).cwiseAbs().maxCoeff() > kAnalyticTolerance) {
    throw Error(ErrorCode::kInvalidArgument,
                "plane basis is not right-handed orthonormal");
  }
}

void NeedleState::validate() const {
  if (!tip.allFinite()) {
    throw Error(ErrorCode::kInvalidArgument, "needle tip is not finite");
  }
  require_unit(direction, "needle direction");
  if (!(length > 0.0) || !std::isfinite(length)) {
    throw Error(ErrorCode::kInvalidArgument, "needle length must be positive");
  }
}

Vec3 project_tip_to_plane(const NeedleState& needle, const ImagePlane& plane) {
  const double offset = (plane.origin - needle.tip).dot(plane.normal);
  return needle.tip + offset * plane.normal;
}

ProjectedNeedle project_needle_to_plane(const NeedleState& needle,
                                        const ImagePlane& plane) {
  const Vec3 in_plane =
      needle.direction - needle.direction.dot(plane.normal) * plane.normal;
  const double norm = in_plane.norm();
  if (norm < kAnalyticTolerance) {
    throw Error(ErrorCode::kDegenerateProjection,
                "needle is perpendicular to the image plane");
  }
  return {project_tip_to_plane(needle, plane), in_plane / norm};
}

PlaneHit plane_distance_and_hit(const NeedleState& needle,
                                const ImagePlane& plane, HitMode mode) {
  const double d = (plane.origin - needle.tip).dot(plane.normal);
  if (mode == HitMode::kPaper) {
    return {d, needle.tip + d * needle.direction};
  }
  const double cos_incidence = needle.direction.dot(plane.normal);
  if (std::abs(cos_incidence) <= kAnalyticTolerance) {
    throw Error(ErrorCode::kRayParallelToPlane,
                "needle ray is parallel to the image plane");
  }
  return {d, needle.tip + (d / cos_incidence) * needle.direction};
}

ImageIntersection solve_image_intersection(const RigidTransform& image_pose,
                                           const NeedleState& needle,
                                           double nominal_length) {
  // Unknowns (x, y, s) with s = l + dl:  R [x y 0]^T + t = O + s d
  //   =>  [e_x | e_y | -d] (x, y, s)^T = O - t
  Mat3 a;
  a.col(0) = image_pose.rotation().col(0);
  a.col(1) = image_pose.rotation().col(1);
  a.col(2) = -needle.direction;
  const Vec3 rhs = needle.origin() - image_pose.translation();

  Eigen::JacobiSVD<Mat3> svd(a, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Vec3 sv = svd.singularValues();
  if (!(sv[2] > 0.0) || sv[0] / sv[2] > 1e12) {
    throw Error(ErrorCode::kSingularSystem,
                "needle is parallel to the image plane");
  }
  const Vec3 sol = a.partialPivLu().solve(rhs);
  return {sol[0], sol[1], sol[2] - nominal_length};
}

BiopsyError biopsy_error(const NeedleState& needle, const Vec3& target) {
  const Vec3 origin = needle.origin();
  const Vec3& d = needle.direction;
  const double directional = d.cross(target - origin).norm();
  const double depth = (origin + needle.length * d - target).dot(d);
  return {directional, depth};
}

bool biopsy_success(const BiopsyError& err, double target_radius,
                    SuccessRule rule) {
  if (!(target_radius > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "target radius must be positive");
  }
  const bool depth_ok = std::abs(err.depth) < target_radius;
  const bool direction_ok = err.directional < target_radius;
  switch (rule) {
    case SuccessRule::kDepthOnly: return depth_ok;
    case SuccessRule::kDirectionOnly: return direction_ok;
    case SuccessRule::kConjunctive: break;
  }
  return depth_ok && direction_ok;
}

}  // namespace usnav
