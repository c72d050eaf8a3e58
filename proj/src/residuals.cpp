#include "msm/residuals.hpp"

namespace msm {

Vec9 cuboid_error(const Pose& x, const CuboidModel& landmark,
                  const CuboidModel& measured) {
  const Pose body_from_world = se3_inverse(x);
  const Pose expected = se3_compose(body_from_world, landmark.pose());
  const Pose rel = se3_compose(se3_inverse(measured.pose()), expected);
  Vec9 e;
  e.head<6>() = se3_log(rel);
  e.tail<3>() = landmark.d - measured.d;
  return e;
}

Vec7 cylinder_error(const Pose& x, const CylinderModel& landmark,
                    const CylinderModel& measured) {
  const Pose body_from_world = se3_inverse(x);
  Vec7 e;
  e.head<3>() = body_from_world.apply(landmark.b) - measured.b;
  e.segment<3>(3) = body_from_world.R * landmark.n - measured.n;
  e(6) = landmark.radius - measured.radius;
  return e;
}

}  // namespace msm
