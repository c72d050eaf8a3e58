#pragma once

#include <Eigen/Core>

namespace msm {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Mat6 = Eigen::Matrix<double, 6, 6>;

// Tangent-space element of SE(3). Ordering: [rotation; translation].
using Twist6 = Eigen::Matrix<double, 6, 1>;

// Rigid transform. R is kept orthonormal with det +1.
struct Pose {
  Mat3 R = Mat3::Identity();
  Vec3 t = Vec3::Zero();

  Vec3 apply(const Vec3& p) const { return R * p + t; }

  static Pose identity() { return {}; }
};

Mat3 skew(const Vec3& v);

// SO(3) exponential (Rodrigues) and logarithm. so3_log throws
// std::domain_error when the rotation angle is within 1e-6 of pi.
Mat3 so3_exp(const Vec3& rotvec);
Vec3 so3_log(const Mat3& R);

Pose se3_compose(const Pose& a, const Pose& b);
Pose se3_inverse(const Pose& a);
Pose se3_exp(const Twist6& xi);
Twist6 se3_log(const Pose& a);

// Rotation about +z.
Mat3 rot_z(double yaw);

// Yaw of the rotated +x axis projected to the ground plane.
double yaw_of(const Mat3& R);

// Frobenius drift of R^T R from identity.
double orthonormality_drift(const Mat3& R);

// Nearest rotation matrix (polar decomposition via SVD).
Mat3 reorthonormalize(const Mat3& R);

}  // namespace msm
