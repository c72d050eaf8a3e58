#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "msm/objects.hpp"
#include "msm/rng.hpp"

namespace msm {

struct Bounds {
  double min_x = -40.0, max_x = 40.0;
  double min_y = -40.0, max_y = 40.0;

  bool contains(const Vec2& p) const {
    return p.x() >= min_x && p.x() <= max_x && p.y() >= min_y && p.y() <= max_y;
  }
  double width() const { return max_x - min_x; }
  double height() const { return max_y - min_y; }
};

// One simulated object: ground-truth state plus the vertical extent the ray
// caster needs (cylinders are rays in the map model but finite in the world).
struct WorldObject {
  ObjectState state;
  double height = 0.0;  // cuboids: implied by d.z; cylinders: shaft height
};

struct WorldSpec {
  std::uint64_t seed = 0;
  Bounds bounds;
  double ground_z = 0.0;
  std::vector<WorldObject> objects;

  const WorldObject* find(std::uint32_t id) const;
};

struct WorldGenConfig {
  Bounds bounds;
  int n_vehicles = 5;
  int n_light_poles = 3;
  int n_tree_trunks = 3;
  double min_spacing = 5.0;       // pairwise footprint-center separation
  double edge_margin = 4.0;       // keep footprints away from the border
  double vehicle_length_min = 4.0, vehicle_length_max = 5.5;
  double vehicle_width_min = 1.7, vehicle_width_max = 2.1;
  double vehicle_height_min = 1.4, vehicle_height_max = 1.9;
  double pole_radius_min = 0.10, pole_radius_max = 0.18;
  double pole_height_min = 5.0, pole_height_max = 7.0;
  double trunk_radius_min = 0.15, trunk_radius_max = 0.35;
  double trunk_height_min = 3.0, trunk_height_max = 6.0;
  int max_attempts = 10000;
};

// Deterministic rejection-sampled world. Throws std::runtime_error when the
// requested counts cannot be placed within the attempt budget.
WorldSpec generate_world(std::uint64_t seed, const WorldGenConfig& config);

struct SensorSpec {
  double max_range = 50.0;
  double horizontal_fov = 2.0 * 3.14159265358979323846;  // radians
  double azimuth_resolution = 0.5 * 3.14159265358979323846 / 180.0;
  std::vector<double> elevation_rings;  // radians, ordered
  double range_noise_sigma = 0.02;      // meters

  static SensorSpec standard();  // 16 rings spanning [-75, +10] degrees
  int rays_per_ring() const;
};

// Ground-truth segmentation behavior: mean confidence and label-flip rate as
// a function of range and viewing angle. Vehicle response follows the
// side-high / front-low / rear-intermediate shape; poles, trunks and ground
// are flat. Means are clamped to [0.01, 0.99].
struct ConfidenceField {
  double vehicle_peak = 0.99;
  // Narrow penalty cones: the drops bite only near straight-on front/rear
  // views, so oblique views from either end stay above typical sampling
  // thresholds while the front cone remains the clear minimum.
  double vehicle_front_drop = 0.12;
  double vehicle_rear_drop = 0.05;
  double vehicle_front_power = 8.0;
  double vehicle_rear_power = 6.0;
  double vehicle_range_coef = 3.0e-5;  // per m^2
  double pole_mean = 0.97;
  double trunk_mean = 0.97;
  double ground_mean = 0.985;
  double dispersion = 0.03;

  double mean(SemanticClass cls, double range, double viewing_angle) const;
};

// Signed ground-plane angle between the object's longitudinal axis (+x of
// the cuboid) and the vector from the object center to the sensor. The angle
// is 0 for cylinders and planes (their fields are angle-flat).
double viewing_angle(const ObjectState& obj, const Vec3& sensor_position);

// Horizontal distance from the sensor to the association point (cuboid
// center / cylinder root).
double viewing_range(const ObjectState& obj, const Vec3& sensor_position);

void save_world(const WorldSpec& world, const std::string& path);
WorldSpec load_world(const std::string& path);

}  // namespace msm
