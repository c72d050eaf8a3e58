#pragma once

#include "msm/objects.hpp"
#include "msm/se3.hpp"

namespace msm {

using Vec7 = Eigen::Matrix<double, 7, 1>;
using Vec9 = Eigen::Matrix<double, 9, 1>;
using Mat7 = Eigen::Matrix<double, 7, 7>;
using Mat9 = Eigen::Matrix<double, 9, 9>;

// Cuboid measurement error: tangent-space distance between the measured and
// the expected body-frame cuboid pose, stacked with the dimension mismatch.
//   e = [ log((H_body_cub(z))^-1 * (x^-1 * H_world_cub))^vee ; d - d(z) ]
// First six entries follow the Twist6 ordering, last three are meters.
// x maps body -> world, `landmark` is in the world frame, `measured` in the
// body frame. Throws std::domain_error when the relative rotation is within
// 1e-6 of pi.
Vec9 cuboid_error(const Pose& x, const CuboidModel& landmark,
                  const CuboidModel& measured);

// Cylinder measurement error (body frame):
//   e = [ (R_bw b + t_bw) - b(z) ; R_bw n - n(z) ; r - r(z) ]
// with (R_bw, t_bw) = x^-1.
Vec7 cylinder_error(const Pose& x, const CylinderModel& landmark,
                    const CylinderModel& measured);

}  // namespace msm
