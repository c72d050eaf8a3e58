#pragma once

#include <optional>
#include <stdexcept>
#include <vector>

#include "msm/lidar.hpp"
#include "msm/objects.hpp"
#include "msm/se3.hpp"

namespace msm {

// Error taxonomy for the measurement pipeline. Callers typically catch these
// per cluster and skip, so a single bad cluster never aborts a whole window.
struct DegenerateInput : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct InsufficientEvidence : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct AmbiguousAxis : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct AxisTilt : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct TimeInterval {
  double t0 = 0.0;
  double t1 = 0.0;
};

// A density-connected group of same-class points in the accumulation frame.
struct PointCluster {
  std::vector<Vec3> points;
  SemanticClass cls = SemanticClass::kVehicle;
  double mean_confidence = 0.0;
  TimeInterval window;
};

// Object hypotheses expressed in the accumulation body frame.
struct CuboidMeasurement {
  CuboidModel model;
  int n_points = 0;
  double mean_confidence = 0.0;
};

struct CylinderMeasurement {
  CylinderModel model;
  SemanticClass cls = SemanticClass::kLightPole;
  int n_points = 0;
  double mean_confidence = 0.0;
  bool degenerate = false;  // radius evidence collapsed onto the axis
};

struct PlaneFit {
  PlaneModel plane;
  double rms = 0.0;
};

// Total-least-squares plane through ground-labeled points; the normal is
// canonicalized upward. Throws DegenerateInput when the points do not span a
// plane (fewer than 10, or collinear).
PlaneFit fit_ground_plane(const std::vector<Vec3>& points);

// Labeled cloud merged into the newest frame's odometry frame, together with
// the reference poses measurements will be expressed against.
struct AccumulatedCloud {
  std::vector<LabeledPoint> points;
  Pose odom_pose;  // newest frame, odometry estimate
  Pose true_pose;  // newest frame, simulation truth
  TimeInterval window;
};

// Merges the frames whose timestamp lies within `window_seconds` of the
// newest frame, transporting points via relative odometry poses.
AccumulatedCloud accumulate_scans(const std::vector<ScanFrame>& frames,
                                  double window_seconds);

// Keeps one representative point per occupied voxel (the lexicographically
// smallest, so the result is independent of input order). voxel <= 0 returns
// the cloud unchanged.
std::vector<LabeledPoint> voxel_downsample(const std::vector<LabeledPoint>& cloud,
                                           double voxel);

// Keeps points whose signed height above the ground plane lies in the closed
// interval [z_min, z_max].
std::vector<LabeledPoint> filter_elevation(const std::vector<LabeledPoint>& cloud,
                                           const PlaneModel& ground, double z_min,
                                           double z_max);

// DBSCAN over 3-D points. Clusters are independent of input order: points are
// processed in lexicographic coordinate order, and each returned cluster holds
// the original indices sorted ascending. Noise points are dropped.
std::vector<std::vector<std::size_t>> cluster_dbscan(const std::vector<Vec3>& points,
                                                     double eps, int min_pts);

// Counterclockwise convex hull (Andrew monotone chain). Throws
// DegenerateInput when the points are collinear.
std::vector<Vec2> convex_hull_2d(std::vector<Vec2> points);

// Vehicle box fit: principal axis of the ground-projected hull, vertical axis
// = ground normal, dimensions and centers from the 5th-to-95th percentile
// intervals of the point projections. The axis sign is chosen so the
// lower-mean-height half of the cluster faces forward; ties (< 1 cm) keep the
// axis in the +x half-space.
CuboidMeasurement fit_cuboid(const PointCluster& cluster, const PlaneModel& ground);

// Pole/trunk fit: principal axis of the 3-D points (required within 30 deg of
// the ground normal), algebraic circle fit for the axis position, radius =
// mean point-to-axis distance, root = axis intersected with the ground plane.
CylinderMeasurement fit_cylinder(const PointCluster& cluster,
                                 const PlaneModel& ground);

struct ConfidenceEstimate {
  double value = 0.0;
  bool empty_evidence = false;
};

// Mean per-point confidence over the points enclosed by the model, inflated
// by 5% to be robust to boundary noise. The caller restricts `cloud` to the
// desired time window before calling.
ConfidenceEstimate object_confidence(const std::vector<LabeledPoint>& cloud,
                                     const Geometry& geometry);

struct PerceptionParams {
  double accumulation_window = 2.0;  // seconds
  double vehicle_z_min = 0.2;        // elevation band, meters above ground
  double vehicle_z_max = 2.5;
  double cylinder_z_min = 0.05;
  double cylinder_z_max = 10.0;
  double vehicle_eps = 0.7;  // DBSCAN radius / core size per class
  int vehicle_min_pts = 8;
  double cylinder_eps = 0.3;
  int cylinder_min_pts = 5;
  int min_ground_points = 10;
  // Edge length of the occupancy grid applied to the accumulated cloud before
  // clustering; 0 disables. Equalizes surface density (ray density falls off
  // with range and grazing angle) and bounds cluster sizes.
  double voxel_size = 0.0;
};

// One accumulation window turned into body-frame object measurements.
struct MeasurementSet {
  Pose odom_pose;  // reference keyframe (newest frame in the window)
  Pose true_pose;
  TimeInterval window;
  std::optional<PlaneFit> ground;
  std::vector<CuboidMeasurement> cuboids;
  std::vector<CylinderMeasurement> cylinders;
};

// Full pipeline: accumulate, fit the local ground plane, band-filter, cluster
// per class, fit shapes, and score per-object confidence. Clusters whose fit
// fails are skipped rather than aborting the window.
MeasurementSet extract_measurements(const std::vector<ScanFrame>& frames,
                                    const PerceptionParams& params);

}  // namespace msm
