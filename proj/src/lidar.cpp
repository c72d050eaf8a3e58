#include "msm/lidar.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <stdexcept>

#include "msm/parallel.hpp"

namespace msm {

namespace {

constexpr double kPi = 3.14159265358979323846;

// Smallest positive entry distance of a ray against an oriented box.
std::optional<double> ray_box(const Vec3& origin, const Vec3& dir,
                              const CuboidModel& box) {
  const Mat3 R = so3_exp(box.r);
  const Vec3 o = R.transpose() * (origin - box.t);
  const Vec3 d = R.transpose() * dir;
  const Vec3 half = 0.5 * box.d;

  double t_near = -std::numeric_limits<double>::infinity();
  double t_far = std::numeric_limits<double>::infinity();
  for (int axis = 0; axis < 3; ++axis) {
    if (std::abs(d[axis]) < 1e-15) {
      if (std::abs(o[axis]) > half[axis]) return std::nullopt;
      continue;
    }
    double t0 = (-half[axis] - o[axis]) / d[axis];
    double t1 = (half[axis] - o[axis]) / d[axis];
    if (t0 > t1) std::swap(t0, t1);
    t_near = std::max(t_near, t0);
    t_far = std::min(t_far, t1);
    if (t_near > t_far) return std::nullopt;
  }
  if (t_far < 0.0) return std::nullopt;
  return t_near >= 0.0 ? t_near : t_far;
}

// Finite cylinder shaft (no caps): axial coordinate within [0, height].
std::optional<double> ray_cylinder(const Vec3& origin, const Vec3& dir,
                                   const CylinderModel& cyl, double height) {
  const Vec3 q = origin - cyl.b;
  const Vec3 d_perp = dir - dir.dot(cyl.n) * cyl.n;
  const Vec3 q_perp = q - q.dot(cyl.n) * cyl.n;
  const double a = d_perp.squaredNorm();
  if (a < 1e-15) return std::nullopt;  // ray parallel to the axis
  const double b = 2.0 * d_perp.dot(q_perp);
  const double c = q_perp.squaredNorm() - cyl.radius * cyl.radius;
  const double disc = b * b - 4.0 * a * c;
  if (disc < 0.0) return std::nullopt;
  const double sq = std::sqrt(disc);
  for (double s : {(-b - sq) / (2.0 * a), (-b + sq) / (2.0 * a)}) {
    if (s < 0.0) continue;
    const double axial = (q + s * dir).dot(cyl.n);
    if (axial >= 0.0 && axial <= height) return s;
  }
  return std::nullopt;
}

struct RayTask {
  Vec3 dir_body;
  Vec3 dir_world;
};

std::optional<LabeledPoint> trace_ray(const WorldSpec& world,
                                      const SensorSpec& sensor,
                                      const Pose& pose, const RayTask& ray,
                                      RngStream stream) {
  const auto hit = cast_ray(world, pose.t, ray.dir_world, sensor.max_range);
  if (!hit) return std::nullopt;
  double range = hit->range;
  if (sensor.range_noise_sigma > 0.0) {
    range = std::max(0.01, range + sensor.range_noise_sigma * stream.next_gaussian());
  }
  LabeledPoint p;
  p.position = ray.dir_body * range;
  p.true_class = hit->cls;
  p.predicted_class = hit->cls;
  p.confidence = 1.0;
  p.object_id = hit->object_id;
  return p;
}

std::vector<RayTask> build_rays(const SensorSpec& sensor, const Pose& pose) {
  const int n_az = sensor.rays_per_ring();
  const double az0 = -0.5 * sensor.horizontal_fov;
  std::vector<RayTask> rays;
  rays.reserve(sensor.elevation_rings.size() * n_az);
  for (double el : sensor.elevation_rings) {
    const double ce = std::cos(el), se = std::sin(el);
    for (int a = 0; a < n_az; ++a) {
      const double az = az0 + (a + 0.5) * sensor.azimuth_resolution;
      RayTask r;
      r.dir_body = Vec3(ce * std::cos(az), ce * std::sin(az), se);
      r.dir_world = pose.R * r.dir_body;
      rays.push_back(r);
    }
  }
  return rays;
}

template <bool Parallel>
ScanFrame run_scan(const WorldSpec& world, const Pose& true_pose,
                   const SensorSpec& sensor, const RngStream& stream) {
  const std::vector<RayTask> rays = build_rays(sensor, true_pose);
  std::vector<std::optional<LabeledPoint>> hits(rays.size());

  auto body = [&](std::size_t i) {
    hits[i] = trace_ray(world, sensor, true_pose, rays[i],
                        stream.child(static_cast<std::uint64_t>(i)));
  };
  if constexpr (Parallel) {
    parallel_for(rays.size(), body);
  } else {
    for (std::size_t i = 0; i < rays.size(); ++i) body(i);
  }

  ScanFrame frame;
  frame.true_pose = true_pose;
  frame.odom_pose = true_pose;
  for (const auto& h : hits) {
    if (h) frame.points.push_back(*h);
  }
  return frame;
}

}  // namespace

std::optional<RayHit> cast_ray(const WorldSpec& world, const Vec3& origin,
                               const Vec3& direction, double max_range) {
  double best = max_range;
  RayHit hit;
  bool found = false;

  if (direction.z() < -1e-15) {
    const double s = (world.ground_z - origin.z()) / direction.z();
    if (s >= 0.0 && s <= best) {
      best = s;
      hit = RayHit{s, SemanticClass::kGround, kNoObject};
      found = true;
    }
  }

  for (const auto& obj : world.objects) {
    std::optional<double> s;
    if (const auto* box = std::get_if<CuboidModel>(&obj.state.geometry)) {
      s = ray_box(origin, direction, *box);
    } else if (const auto* cyl = std::get_if<CylinderModel>(&obj.state.geometry)) {
      s = ray_cylinder(origin, direction, *cyl, obj.height);
    }
    if (s && *s <= best) {
      best = *s;
      hit = RayHit{*s, obj.state.cls, obj.state.id};
      found = true;
    }
  }
  if (!found) return std::nullopt;
  return hit;
}

ScanFrame simulate_scan(const WorldSpec& world, const Pose& true_pose,
                        const SensorSpec& sensor, const RngStream& stream) {
  return run_scan<true>(world, true_pose, sensor, stream);
}

ScanFrame simulate_scan_reference(const WorldSpec& world, const Pose& true_pose,
                                  const SensorSpec& sensor,
                                  const RngStream& stream) {
  return run_scan<false>(world, true_pose, sensor, stream);
}

ScanFrame simulate_segmentation(const ScanFrame& frame,
                                const ConfidenceField& field,
                                const WorldSpec& world, RngStream stream) {
  ScanFrame out = frame;
  for (std::size_t i = 0; i < out.points.size(); ++i) {
    LabeledPoint& p = out.points[i];
    double mean;
    if (p.object_id == kNoObject) {
      mean = field.mean(SemanticClass::kGround, 0.0, 0.0);
    } else {
      const WorldObject* obj = world.find(p.object_id);
      if (obj == nullptr) {
        throw std::runtime_error("scan point references unknown object id");
      }
      mean = field.mean(p.true_class, viewing_range(obj->state, frame.true_pose.t),
                        viewing_angle(obj->state, frame.true_pose.t));
    }
    RngStream point_stream = stream.child(static_cast<std::uint64_t>(i));
    p.confidence =
        std::clamp(mean + field.dispersion * point_stream.next_gaussian(), 0.01, 0.99);
    p.predicted_class = p.true_class;
    if (point_stream.next_double() < 1.0 - mean) {
      // uniform among the other three classes
      const int shift = 1 + static_cast<int>(point_stream.next_below(3));
      p.predicted_class = static_cast<SemanticClass>(
          (static_cast<int>(p.true_class) + shift) % 4);
    }
  }
  return out;
}

Pose simulate_odometry(const Pose& true_increment, const OdometryNoise& noise,
                       RngStream stream) {
  const double dist = true_increment.t.norm();
  if (dist == 0.0 ||
      (noise.sigma_translation_per_m == 0.0 && noise.sigma_yaw_per_m == 0.0)) {
    return true_increment;
  }
  Vec3 dt(stream.next_gaussian(), stream.next_gaussian(), stream.next_gaussian());
  const double dyaw = noise.sigma_yaw_per_m * dist * stream.next_gaussian();
  Pose out;
  out.R = rot_z(dyaw) * true_increment.R;
  out.t = true_increment.t + noise.sigma_translation_per_m * dist * dt;
  return out;
}

void dump_scan(const ScanFrame& frame, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open scan dump: " + path);
  out << "x,y,z,true_class,pred_class,confidence,object_id\n";
  char buf[256];
  for (const auto& p : frame.points) {
    std::snprintf(buf, sizeof(buf), "%.6f,%.6f,%.6f,%s,%s,%.6f,", p.position.x(),
                  p.position.y(), p.position.z(), class_name(p.true_class),
                  class_name(p.predicted_class), p.confidence);
    out << buf;
    if (p.object_id == kNoObject) {
      out << "\n";
    } else {
      out << p.object_id << "\n";
    }
  }
}

}  // namespace msm
