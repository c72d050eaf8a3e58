#include "msm/se3.hpp"

#include <Eigen/LU>
#include <Eigen/SVD>
#include <cmath>
#include <stdexcept>

namespace msm {

namespace {
constexpr double kPi = 3.14159265358979323846;
constexpr double kSmallAngle = 1e-5;
}  // namespace

Mat3 skew(const Vec3& v) {
  Mat3 m;
  m << 0, -v.z(), v.y(), v.z(), 0, -v.x(), -v.y(), v.x(), 0;
  return m;
}

Mat3 so3_exp(const Vec3& rotvec) {
  const double theta = rotvec.norm();
  const Mat3 w = skew(rotvec);
  double a, b;  // R = I + a*w + b*w^2
  if (theta < kSmallAngle) {
    const double t2 = theta * theta;
    a = 1.0 - t2 / 6.0;
    b = 0.5 - t2 / 24.0;
  } else {
    a = std::sin(theta) / theta;
    b = (1.0 - std::cos(theta)) / (theta * theta);
  }
  return Mat3::Identity() + a * w + b * (w * w);
}

Vec3 so3_log(const Mat3& R) {
  const double c = std::clamp((R.trace() - 1.0) * 0.5, -1.0, 1.0);
  const double theta = std::acos(c);
  if (theta > kPi - 1e-6) {
    throw std::domain_error("so3_log: rotation angle within 1e-6 of pi, log map ill-conditioned");
  }
  Vec3 v(R(2, 1) - R(1, 2), R(0, 2) - R(2, 0), R(1, 0) - R(0, 1));
  if (theta < kSmallAngle) {
    // v = 2 sin(theta) * axis; scale = theta / (2 sin(theta))
    return 0.5 * (1.0 + theta * theta / 6.0) * v;
  }
  return (theta / (2.0 * std::sin(theta))) * v;
}

Pose se3_compose(const Pose& a, const Pose& b) {
  Pose out;
  out.R = a.R * b.R;
  out.t = a.R * b.t + a.t;
  if (orthonormality_drift(out.R) > 1e-12) {
    out.R = reorthonormalize(out.R);
  }
  return out;
}

Pose se3_inverse(const Pose& a) {
  Pose out;
  out.R = a.R.transpose();
  out.t = -(out.R * a.t);
  return out;
}

Pose se3_exp(const Twist6& xi) {
  const Vec3 w = xi.head<3>();
  const Vec3 v = xi.tail<3>();
  const double theta = w.norm();
  const Mat3 wx = skew(w);
  double b, c;  // V = I + b*wx + c*wx^2
  if (theta < kSmallAngle) {
    const double t2 = theta * theta;
    b = 0.5 - t2 / 24.0;
    c = 1.0 / 6.0 - t2 / 120.0;
  } else {
    const double t2 = theta * theta;
    b = (1.0 - std::cos(theta)) / t2;
    c = (1.0 - std::sin(theta) / theta) / t2;
  }
  const Mat3 V = Mat3::Identity() + b * wx + c * (wx * wx);
  Pose out;
  out.R = so3_exp(w);
  out.t = V * v;
  return out;
}

Twist6 se3_log(const Pose& a) {
  const Vec3 w = so3_log(a.R);
  const double theta = w.norm();
  const Mat3 wx = skew(w);
  double c;  // V^-1 = I - wx/2 + c*wx^2
  if (theta < kSmallAngle) {
    c = 1.0 / 12.0 + theta * theta / 720.0;
  } else {
    const double A = std::sin(theta) / theta;
    const double B = (1.0 - std::cos(theta)) / (theta * theta);
    c = (1.0 - A / (2.0 * B)) / (theta * theta);
  }
  const Mat3 Vinv = Mat3::Identity() - 0.5 * wx + c * (wx * wx);
  Twist6 xi;
  xi.head<3>() = w;
  xi.tail<3>() = Vinv * a.t;
  return xi;
}

Mat3 rot_z(double yaw) {
  Mat3 m;
  const double cy = std::cos(yaw), sy = std::sin(yaw);
  m << cy, -sy, 0, sy, cy, 0, 0, 0, 1;
  return m;
}

double yaw_of(const Mat3& R) { return std::atan2(R(1, 0), R(0, 0)); }

double orthonormality_drift(const Mat3& R) {
  return (R.transpose() * R - Mat3::Identity()).norm();
}

Mat3 reorthonormalize(const Mat3& R) {
  Eigen::JacobiSVD<Mat3> svd(R, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 out = svd.matrixU() * svd.matrixV().transpose();
  if (out.determinant() < 0) {
    Mat3 flip = Mat3::Identity();
    flip(2, 2) = -1;
    out = svd.matrixU() * flip * svd.matrixV().transpose();
  }
  return out;
}

}  // namespace msm
