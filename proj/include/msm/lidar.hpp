#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "msm/rng.hpp"
#include "msm/world.hpp"

namespace msm {

constexpr std::uint32_t kNoObject = 0xffffffff;

struct LabeledPoint {
  Vec3 position;  // body frame, meters
  SemanticClass true_class = SemanticClass::kGround;
  SemanticClass predicted_class = SemanticClass::kGround;
  double confidence = 1.0;
  std::uint32_t object_id = kNoObject;  // kNoObject for ground hits
};

struct ScanFrame {
  double timestamp = 0.0;
  Pose true_pose;
  Pose odom_pose;
  std::vector<LabeledPoint> points;
};

// Casts one full sweep from `true_pose` and returns the nearest hit per ray
// (oriented boxes, finite cylinders, ground plane) with Gaussian range noise.
// Each ray draws noise from its own counter-derived stream, so the result is
// bit-identical for any thread count. `simulate_scan` runs the per-ray loop
// with OpenMP; `simulate_scan_reference` is the plain serial loop kept for
// testing and benchmarking.
ScanFrame simulate_scan(const WorldSpec& world, const Pose& true_pose,
                        const SensorSpec& sensor, const RngStream& stream);
ScanFrame simulate_scan_reference(const WorldSpec& world, const Pose& true_pose,
                                  const SensorSpec& sensor,
                                  const RngStream& stream);

// Noiseless first-hit distance for one world ray; used by the planner for
// visibility checks as well as by the scan kernels.
struct RayHit {
  double range = 0.0;
  SemanticClass cls = SemanticClass::kGround;
  std::uint32_t object_id = kNoObject;
};
std::optional<RayHit> cast_ray(const WorldSpec& world, const Vec3& origin,
                               const Vec3& direction, double max_range);

// Samples per-point confidence around the field mean and flips labels with
// probability (1 - mean). Range/viewing angle are computed from the frame's
// true pose and the true object geometry; ground hits use the ground field.
ScanFrame simulate_segmentation(const ScanFrame& frame,
                                const ConfidenceField& field,
                                const WorldSpec& world, RngStream stream);

struct OdometryNoise {
  double sigma_translation_per_m = 0.0;  // per meter traveled, per axis
  double sigma_yaw_per_m = 0.0;          // radians per meter traveled
};

// Perturbs a true relative motion with drift noise scaled by the distance
// traveled. Zero noise or zero motion returns the input exactly.
Pose simulate_odometry(const Pose& true_increment, const OdometryNoise& noise,
                       RngStream stream);

// Debug dump: one CSV row per point (x,y,z,true_class,pred_class,confidence,object_id).
void dump_scan(const ScanFrame& frame, const std::string& path);

}  // namespace msm
