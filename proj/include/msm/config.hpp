#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "msm/lidar.hpp"
#include "msm/perception.hpp"
#include "msm/planner.hpp"
#include "msm/uncertainty.hpp"
#include "msm/world.hpp"

namespace msm {

// Knobs for characterization flights and model fitting.
struct UncertaintyConfig {
  GridSpec vehicle_grid;
  GridSpec cylinder_grid;
  int min_bin_count = 20;
  double eps = 1e-6;
  double spiral_r_min = 5.0;
  double spiral_r_max = 30.0;
  double spiral_pitch = 2.5;      // radial advance per revolution; <= bin width
                                  // covers every range bin in each angle column
  double spiral_step_deg = 10.0;  // pose spacing along the spiral
};

struct MissionSettings {
  std::string type = "active";  // "active" | "baseline"
  std::vector<std::uint64_t> seeds = {1};
  std::string out_dir = "out";
  double standoff = 8.0;      // baseline viewing distance, meters
  int window_frames = 5;      // scans accumulated per observation pause
  double scan_period = 0.5;   // seconds between scans in a window
  double start_margin = 2.0;  // start pose inset from the SW corner
  double speed = 2.0;         // cruise speed for time bookkeeping, m/s
  // Measurement extraction accumulates every scan inside this trailing window,
  // including sweep frames captured while flying between pauses, so a single
  // measurement can blend multiple viewing directions.
  double accumulation_s = 8.0;
};

struct ExperimentConfig {
  WorldGenConfig world;
  SensorSpec sensor;
  ConfidenceField field;
  // 1% translation drift and lidar-inertial-grade yaw drift: at 0.002 rad/m a
  // survey-length path rotates the far field by several meters of lever-arm
  // error, which no single-visit tour can correct.
  OdometryNoise odometry{0.01, 0.0005};
  double prior_sigma = 1.0;  // std of the prior-map position perturbation
  PerceptionParams perception;
  UncertaintyConfig uncertainty;
  PlannerConfig planner;
  MissionSettings mission;
};

ExperimentConfig default_config();

// Strict INI-style parser: sections [world] [sensor] [noise] [uncertainty]
// [planner] [mission]; '#'/';' comments. Unknown sections or keys and
// malformed values throw std::runtime_error with the line number.
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::string& path);

// Throws std::runtime_error when cross-field invariants are violated
// (empty seed list, bad mission type, non-positive rates, ...).
void validate_config(const ExperimentConfig& cfg);

}  // namespace msm
