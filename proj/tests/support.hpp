#pragma once

#include <cmath>
#include <random>

#include <Eigen/SVD>

#include "usnav/geometry.hpp"

namespace usnav::testing {

using Rng = std::mt19937_64;

inline double uniform(Rng& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline Vec3 random_vec(Rng& rng, double half_extent) {
  return {uniform(rng, -half_extent, half_extent), uniform(rng, -half_extent, half_extent),
          uniform(rng, -half_extent, half_extent)};
}

inline Vec3 random_unit(Rng& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  for (;;) {
    const Vec3 v(n(rng), n(rng), n(rng));
    if (v.norm() > 1e-6) return v.normalized();
  }
}

// Uniform on SO(3) via a normalized Gaussian quaternion.
inline Mat3 random_rotation(Rng& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Eigen::Quaterniond q(n(rng), n(rng), n(rng), n(rng));
  q.normalize();
  Mat3 r = q.toRotationMatrix();
  // Re-orthonormalize so the 1e-9 rotation check never trips on rounding.
  Eigen::JacobiSVD<Mat3> svd(r, Eigen::ComputeFullU | Eigen::ComputeFullV);
  return svd.matrixU() * svd.matrixV().transpose();
}

inline RigidTransform random_pose(Rng& rng, double half_extent = 200.0) {
  return RigidTransform(random_rotation(rng), random_vec(rng, half_extent));
}

inline double max_abs_diff(const Vec3& a, const Vec3& b) { return (a - b).cwiseAbs().maxCoeff(); }

}  // namespace usnav::testing
