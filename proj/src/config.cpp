#include "msm/config.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace msm {

namespace {

constexpr double kDegToRad = 3.14159265358979323846 / 180.0;

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}

[[noreturn]] void fail(int line, const std::string& what) {
  throw std::runtime_error("config line " + std::to_string(line) + ": " + what);
}

double to_double(const std::string& v, int line) {
  try {
    std::size_t pos = 0;
    const double d = std::stod(v, &pos);
    if (pos != v.size()) fail(line, "trailing characters in number '" + v + "'");
    return d;
  } catch (const std::invalid_argument&) {
    fail(line, "expected a number, got '" + v + "'");
  } catch (const std::out_of_range&) {
    fail(line, "number out of range: '" + v + "'");
  }
}

int to_int(const std::string& v, int line) {
  const double d = to_double(v, line);
  if (d != std::floor(d)) fail(line, "expected an integer, got '" + v + "'");
  return static_cast<int>(d);
}

std::vector<std::uint64_t> to_u64_list(const std::string& v, int line) {
  std::vector<std::uint64_t> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (item.empty()) fail(line, "empty entry in list");
    try {
      std::size_t pos = 0;
      out.push_back(std::stoull(item, &pos));
      if (pos != item.size()) fail(line, "bad list entry '" + item + "'");
    } catch (const std::logic_error&) {
      fail(line, "bad list entry '" + item + "'");
    }
  }
  if (out.empty()) fail(line, "empty list");
  return out;
}

// Sensor ring geometry is specified by span + count and rebuilt after parsing.
struct RingSpec {
  double min_deg = -75.0;
  double max_deg = 10.0;
  int count = 16;
  bool touched = false;
};

void apply_world(ExperimentConfig& c, const std::string& k, const std::string& v,
                 int line) {
  auto& w = c.world;
  if (k == "x_min") w.bounds.min_x = to_double(v, line);
  else if (k == "x_max") w.bounds.max_x = to_double(v, line);
  else if (k == "y_min") w.bounds.min_y = to_double(v, line);
  else if (k == "y_max") w.bounds.max_y = to_double(v, line);
  else if (k == "n_vehicles") w.n_vehicles = to_int(v, line);
  else if (k == "n_light_poles") w.n_light_poles = to_int(v, line);
  else if (k == "n_tree_trunks") w.n_tree_trunks = to_int(v, line);
  else if (k == "min_spacing") w.min_spacing = to_double(v, line);
  else if (k == "edge_margin") w.edge_margin = to_double(v, line);
  else if (k == "vehicle_length_min") w.vehicle_length_min = to_double(v, line);
  else if (k == "vehicle_length_max") w.vehicle_length_max = to_double(v, line);
  else if (k == "vehicle_width_min") w.vehicle_width_min = to_double(v, line);
  else if (k == "vehicle_width_max") w.vehicle_width_max = to_double(v, line);
  else if (k == "vehicle_height_min") w.vehicle_height_min = to_double(v, line);
  else if (k == "vehicle_height_max") w.vehicle_height_max = to_double(v, line);
  else if (k == "pole_radius_min") w.pole_radius_min = to_double(v, line);
  else if (k == "pole_radius_max") w.pole_radius_max = to_double(v, line);
  else if (k == "pole_height_min") w.pole_height_min = to_double(v, line);
  else if (k == "pole_height_max") w.pole_height_max = to_double(v, line);
  else if (k == "trunk_radius_min") w.trunk_radius_min = to_double(v, line);
  else if (k == "trunk_radius_max") w.trunk_radius_max = to_double(v, line);
  else if (k == "trunk_height_min") w.trunk_height_min = to_double(v, line);
  else if (k == "trunk_height_max") w.trunk_height_max = to_double(v, line);
  else if (k == "max_attempts") w.max_attempts = to_int(v, line);
  else fail(line, "unknown key '" + k + "' in [world]");
}

void apply_sensor(ExperimentConfig& c, RingSpec& rings, const std::string& k,
                  const std::string& v, int line) {
  auto& s = c.sensor;
  if (k == "max_range") s.max_range = to_double(v, line);
  else if (k == "horizontal_fov_deg") s.horizontal_fov = to_double(v, line) * kDegToRad;
  else if (k == "azimuth_resolution_deg")
    s.azimuth_resolution = to_double(v, line) * kDegToRad;
  else if (k == "range_noise_sigma") s.range_noise_sigma = to_double(v, line);
  else if (k == "n_rings") { rings.count = to_int(v, line); rings.touched = true; }
  else if (k == "ring_min_deg") { rings.min_deg = to_double(v, line); rings.touched = true; }
  else if (k == "ring_max_deg") { rings.max_deg = to_double(v, line); rings.touched = true; }
  else if (k == "accumulation_window")
    c.perception.accumulation_window = to_double(v, line);
  else fail(line, "unknown key '" + k + "' in [sensor]");
}

void apply_noise(ExperimentConfig& c, const std::string& k, const std::string& v,
                 int line) {
  if (k == "odom_sigma_translation_per_m")
    c.odometry.sigma_translation_per_m = to_double(v, line);
  else if (k == "odom_sigma_yaw_per_m")
    c.odometry.sigma_yaw_per_m = to_double(v, line);
  else if (k == "segmentation_dispersion") c.field.dispersion = to_double(v, line);
  else if (k == "vehicle_peak") c.field.vehicle_peak = to_double(v, line);
  else if (k == "vehicle_front_drop") c.field.vehicle_front_drop = to_double(v, line);
  else if (k == "vehicle_rear_drop") c.field.vehicle_rear_drop = to_double(v, line);
  else if (k == "vehicle_range_coef") c.field.vehicle_range_coef = to_double(v, line);
  else if (k == "pole_mean") c.field.pole_mean = to_double(v, line);
  else if (k == "trunk_mean") c.field.trunk_mean = to_double(v, line);
  else if (k == "ground_mean") c.field.ground_mean = to_double(v, line);
  else if (k == "prior_sigma") c.prior_sigma = to_double(v, line);
  else fail(line, "unknown key '" + k + "' in [noise]");
}

void apply_uncertainty(ExperimentConfig& c, const std::string& k,
                       const std::string& v, int line) {
  auto& u = c.uncertainty;
  if (k == "range_min") {
    u.vehicle_grid.range_min = u.cylinder_grid.range_min = to_double(v, line);
  } else if (k == "range_max") {
    u.vehicle_grid.range_max = u.cylinder_grid.range_max = to_double(v, line);
  } else if (k == "range_step") {
    u.vehicle_grid.range_step = u.cylinder_grid.range_step = to_double(v, line);
  } else if (k == "angle_step_deg") {
    u.vehicle_grid.angle_step = to_double(v, line) * kDegToRad;
  } else if (k == "min_bin_count") {
    u.min_bin_count = to_int(v, line);
  } else if (k == "eps") {
    u.eps = to_double(v, line);
  } else if (k == "spiral_r_min") {
    u.spiral_r_min = to_double(v, line);
  } else if (k == "spiral_r_max") {
    u.spiral_r_max = to_double(v, line);
  } else if (k == "spiral_pitch") {
    u.spiral_pitch = to_double(v, line);
  } else if (k == "spiral_step_deg") {
    u.spiral_step_deg = to_double(v, line);
  } else {
    fail(line, "unknown key '" + k + "' in [uncertainty]");
  }
}

void apply_planner(ExperimentConfig& c, const std::string& k, const std::string& v,
                   int line) {
  auto& p = c.planner;
  if (k == "horizon") p.horizon = to_int(v, line);
  else if (k == "confidence_level") p.confidence_level = to_double(v, line);
  else if (k == "entropy_threshold") p.entropy_threshold = to_double(v, line);
  else if (k == "strategy") {
    if (v == "uniform") p.strategy = SamplingStrategy::kUniform;
    else if (v == "centroid") p.strategy = SamplingStrategy::kCentroid;
    else fail(line, "strategy must be 'uniform' or 'centroid'");
  }
  else if (k == "max_samples") p.max_samples = to_int(v, line);
  else if (k == "path_budget") p.path_budget = to_int(v, line);
  else if (k == "sample_range_step") p.sample_range_step = to_double(v, line);
  else if (k == "sample_angle_step_deg")
    p.sample_angle_step = to_double(v, line) * kDegToRad;
  else if (k == "altitude") p.altitude = to_double(v, line);
  else if (k == "max_rounds") p.max_rounds = to_int(v, line);
  else if (k == "loc_bound") p.loc_bound = to_double(v, line);
  else if (k == "dim_bound") p.dim_bound = to_double(v, line);
  else fail(line, "unknown key '" + k + "' in [planner]");
}

void apply_mission(ExperimentConfig& c, const std::string& k, const std::string& v,
                   int line) {
  auto& m = c.mission;
  if (k == "type") {
    if (v != "active" && v != "baseline")
      fail(line, "mission type must be 'active' or 'baseline'");
    m.type = v;
  }
  else if (k == "seeds") m.seeds = to_u64_list(v, line);
  else if (k == "out_dir") m.out_dir = v;
  else if (k == "standoff") m.standoff = to_double(v, line);
  else if (k == "window_frames") m.window_frames = to_int(v, line);
  else if (k == "scan_period") m.scan_period = to_double(v, line);
  else if (k == "start_margin") m.start_margin = to_double(v, line);
  else if (k == "speed") m.speed = to_double(v, line);
  else if (k == "accumulation_s") m.accumulation_s = to_double(v, line);
  else fail(line, "unknown key '" + k + "' in [mission]");
}

std::vector<double> build_rings(int count, double min_deg, double max_deg) {
  std::vector<double> rings;
  rings.reserve(count);
  for (int i = 0; i < count; ++i) {
    const double f = count == 1 ? 0.5 : static_cast<double>(i) / (count - 1);
    rings.push_back((min_deg + f * (max_deg - min_deg)) * kDegToRad);
  }
  return rings;
}

}  // namespace

ExperimentConfig default_config() {
  ExperimentConfig cfg;
  cfg.sensor = SensorSpec::standard();
  // Denser elevation sampling than the 16-ring reference sensor: keeps the
  // vertical gap between scan rows on an object face below the clustering
  // radius out to ~30 m, so surfaces are not split into per-row slivers.
  cfg.sensor.elevation_rings = build_rings(80, -75.0, 10.0);
  // Occupancy-grid thinning keeps cluster sizes bounded and removes the
  // range-dependent ray-density imbalance between near and far surfaces.
  cfg.perception.voxel_size = 0.15;
  cfg.uncertainty.vehicle_grid = default_grid(SemanticClass::kVehicle);
  cfg.uncertainty.cylinder_grid = default_grid(SemanticClass::kLightPole);
  // Missions run on the bundled total-error uncertainty model unless given a
  // characterized one, so the region bounds scale with those magnitudes.
  cfg.planner.loc_bound = 0.7;
  cfg.planner.dim_bound = 0.9;
  return cfg;
}

ExperimentConfig parse_config(const std::string& text) {
  ExperimentConfig cfg = default_config();
  RingSpec rings;
  std::istringstream in(text);
  std::string raw;
  std::string section;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const auto comment = raw.find_first_of("#;");
    std::string line = trim(comment == std::string::npos ? raw : raw.substr(0, comment));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') fail(line_no, "unterminated section header");
      section = trim(line.substr(1, line.size() - 2));
      if (section != "world" && section != "sensor" && section != "noise" &&
          section != "uncertainty" && section != "planner" && section != "mission") {
        fail(line_no, "unknown section [" + section + "]");
      }
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) fail(line_no, "expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) fail(line_no, "empty key");
    if (value.empty()) fail(line_no, "empty value for '" + key + "'");
    if (section.empty()) fail(line_no, "key before any section header");

    if (section == "world") apply_world(cfg, key, value, line_no);
    else if (section == "sensor") apply_sensor(cfg, rings, key, value, line_no);
    else if (section == "noise") apply_noise(cfg, key, value, line_no);
    else if (section == "uncertainty") apply_uncertainty(cfg, key, value, line_no);
    else if (section == "planner") apply_planner(cfg, key, value, line_no);
    else apply_mission(cfg, key, value, line_no);
  }

  if (rings.touched) {
    if (rings.count < 1) throw std::runtime_error("config: n_rings must be >= 1");
    cfg.sensor.elevation_rings = build_rings(rings.count, rings.min_deg, rings.max_deg);
  }
  validate_config(cfg);
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

void validate_config(const ExperimentConfig& cfg) {
  auto require = [](bool ok, const std::string& what) {
    if (!ok) throw std::runtime_error("config: " + what);
  };
  require(!cfg.mission.seeds.empty(), "seed list is empty");
  require(cfg.mission.type == "active" || cfg.mission.type == "baseline",
          "mission type must be 'active' or 'baseline'");
  require(cfg.mission.window_frames >= 1, "window_frames must be >= 1");
  require(cfg.mission.scan_period > 0.0, "scan_period must be positive");
  require(cfg.mission.standoff > 0.0, "standoff must be positive");
  require(cfg.mission.speed > 0.0, "speed must be positive");
  require(cfg.mission.accumulation_s > 0.0, "accumulation_s must be positive");
  require(cfg.world.bounds.width() > 0.0 && cfg.world.bounds.height() > 0.0,
          "world bounds are empty");
  require(cfg.sensor.max_range > 0.0, "sensor max_range must be positive");
  require(cfg.sensor.azimuth_resolution > 0.0, "azimuth resolution must be positive");
  require(!cfg.sensor.elevation_rings.empty(), "sensor needs at least one ring");
  require(cfg.planner.horizon >= 1, "planner horizon must be >= 1");
  require(cfg.planner.confidence_level > 0.0 && cfg.planner.confidence_level < 1.0,
          "confidence_level must lie in (0, 1)");
  require(cfg.planner.max_samples >= 1, "max_samples must be >= 1");
  require(cfg.planner.sample_range_step > 0.0, "sample_range_step must be positive");
  require(cfg.planner.sample_angle_step > 0.0, "sample_angle_step must be positive");
  require(cfg.planner.loc_bound > 0.0, "loc_bound must be positive");
  require(cfg.planner.dim_bound > 0.0, "dim_bound must be positive");
  require(cfg.uncertainty.min_bin_count >= 2, "min_bin_count must be >= 2");
  require(cfg.uncertainty.eps > 0.0, "eps must be positive");
  require(cfg.uncertainty.spiral_r_min > 0.0 &&
              cfg.uncertainty.spiral_r_max > cfg.uncertainty.spiral_r_min,
          "spiral radii must satisfy 0 < r_min < r_max");
  require(cfg.uncertainty.spiral_pitch > 0.0, "spiral_pitch must be positive");
  require(cfg.uncertainty.spiral_step_deg > 0.0, "spiral_step_deg must be positive");
  require(cfg.uncertainty.vehicle_grid.range_step > 0.0 &&
              cfg.uncertainty.vehicle_grid.range_max >
                  cfg.uncertainty.vehicle_grid.range_min,
          "uncertainty grid range axis is empty");
  require(cfg.prior_sigma >= 0.0, "prior_sigma must be non-negative");
}

}  // namespace msm
