#include "msm/world.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

namespace msm {

namespace {
constexpr double kPi = 3.14159265358979323846;

double wrap_angle(double a) {
  while (a > kPi) a -= 2.0 * kPi;
  while (a <= -kPi) a += 2.0 * kPi;
  return a;
}
}  // namespace

const WorldObject* WorldSpec::find(std::uint32_t id) const {
  for (const auto& o : objects) {
    if (o.state.id == id) return &o;
  }
  return nullptr;
}

WorldSpec generate_world(std::uint64_t seed, const WorldGenConfig& config) {
  WorldSpec world;
  world.seed = seed;
  world.bounds = config.bounds;

  RngStream rng = RngStream::from_seed(seed).child(stream_tag("world"));

  const double lo_x = config.bounds.min_x + config.edge_margin;
  const double hi_x = config.bounds.max_x - config.edge_margin;
  const double lo_y = config.bounds.min_y + config.edge_margin;
  const double hi_y = config.bounds.max_y - config.edge_margin;
  if (lo_x >= hi_x || lo_y >= hi_y) {
    throw std::runtime_error("world bounds too small for the edge margin");
  }

  std::vector<Vec2> centers;
  auto place = [&](double clearance) -> Vec2 {
    for (int attempt = 0; attempt < config.max_attempts; ++attempt) {
      Vec2 p(rng.next_uniform(lo_x, hi_x), rng.next_uniform(lo_y, hi_y));
      bool ok = true;
      for (const auto& c : centers) {
        if ((p - c).norm() < config.min_spacing + clearance) {
          ok = false;
          break;
        }
      }
      if (ok) {
        centers.push_back(p);
        return p;
      }
    }
    throw std::runtime_error("object placement infeasible within attempt budget");
  };

  std::uint32_t next_id = 0;

  for (int i = 0; i < config.n_vehicles; ++i) {
    const Vec2 c = place(0.0);
    CuboidModel cub;
    cub.d = Vec3(rng.next_uniform(config.vehicle_length_min, config.vehicle_length_max),
                 rng.next_uniform(config.vehicle_width_min, config.vehicle_width_max),
                 rng.next_uniform(config.vehicle_height_min, config.vehicle_height_max));
    const double yaw = rng.next_uniform(-kPi, kPi);
    cub.r = Vec3(0, 0, yaw);
    cub.t = Vec3(c.x(), c.y(), 0.5 * cub.d.z());
    WorldObject obj;
    obj.state = ObjectState{SemanticClass::kVehicle, 1.0, cub, next_id++};
    obj.height = cub.d.z();
    world.objects.push_back(obj);
  }

  auto add_cylinder = [&](SemanticClass cls, double r_min, double r_max,
                          double h_min, double h_max) {
    const Vec2 c = place(0.0);
    CylinderModel cyl;
    cyl.b = Vec3(c.x(), c.y(), 0.0);
    cyl.n = Vec3::UnitZ();
    cyl.radius = rng.next_uniform(r_min, r_max);
    WorldObject obj;
    obj.state = ObjectState{cls, 1.0, cyl, next_id++};
    obj.height = rng.next_uniform(h_min, h_max);
    world.objects.push_back(obj);
  };

  for (int i = 0; i < config.n_light_poles; ++i) {
    add_cylinder(SemanticClass::kLightPole, config.pole_radius_min,
                 config.pole_radius_max, config.pole_height_min,
                 config.pole_height_max);
  }
  for (int i = 0; i < config.n_tree_trunks; ++i) {
    add_cylinder(SemanticClass::kTreeTrunk, config.trunk_radius_min,
                 config.trunk_radius_max, config.trunk_height_min,
                 config.trunk_height_max);
  }

  return world;
}

SensorSpec SensorSpec::standard() {
  SensorSpec s;
  const double lo = -75.0 * kPi / 180.0;
  const double hi = 10.0 * kPi / 180.0;
  const int rings = 16;
  for (int i = 0; i < rings; ++i) {
    s.elevation_rings.push_back(lo + (hi - lo) * i / (rings - 1));
  }
  return s;
}

int SensorSpec::rays_per_ring() const {
  return std::max(1, static_cast<int>(std::floor(horizontal_fov / azimuth_resolution)));
}

double ConfidenceField::mean(SemanticClass cls, double range,
                             double viewing_angle) const {
  double m = 0.5;
  switch (cls) {
    case SemanticClass::kVehicle: {
      const double front = 0.5 * (1.0 + std::cos(viewing_angle));
      const double rear = 0.5 * (1.0 - std::cos(viewing_angle));
      m = vehicle_peak - vehicle_front_drop * std::pow(front, vehicle_front_power) -
          vehicle_rear_drop * std::pow(rear, vehicle_rear_power) -
          vehicle_range_coef * range * range;
      break;
    }
    case SemanticClass::kLightPole:
      m = pole_mean;
      break;
    case SemanticClass::kTreeTrunk:
      m = trunk_mean;
      break;
    case SemanticClass::kGround:
      m = ground_mean;
      break;
  }
  return std::clamp(m, 0.01, 0.99);
}

double viewing_angle(const ObjectState& obj, const Vec3& sensor_position) {
  const auto* cub = std::get_if<CuboidModel>(&obj.geometry);
  if (cub == nullptr) return 0.0;
  const Vec2 to_sensor = sensor_position.head<2>() - cub->t.head<2>();
  if (to_sensor.norm() < 1e-12) return 0.0;
  const double bearing = std::atan2(to_sensor.y(), to_sensor.x());
  const double heading = yaw_of(so3_exp(cub->r));
  return wrap_angle(bearing - heading);
}

double viewing_range(const ObjectState& obj, const Vec3& sensor_position) {
  const Vec2 anchor = footprint_center(obj);
  return (sensor_position.head<2>() - anchor).norm();
}

namespace {

nlohmann::json vec3_json(const Vec3& v) { return {v.x(), v.y(), v.z()}; }

Vec3 vec3_from(const nlohmann::json& j) {
  return Vec3(j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>());
}

}  // namespace

void save_world(const WorldSpec& world, const std::string& path) {
  nlohmann::json j;
  j["format"] = "msm-world";
  j["version"] = 1;
  j["seed"] = world.seed;
  j["bounds"] = {world.bounds.min_x, world.bounds.max_x, world.bounds.min_y,
                 world.bounds.max_y};
  j["ground_z"] = world.ground_z;
  nlohmann::json objs = nlohmann::json::array();
  for (const auto& o : world.objects) {
    nlohmann::json rec;
    rec["id"] = o.state.id;
    rec["class"] = class_name(o.state.cls);
    rec["confidence"] = o.state.confidence;
    if (const auto* c = std::get_if<CuboidModel>(&o.state.geometry)) {
      rec["r"] = vec3_json(c->r);
      rec["t"] = vec3_json(c->t);
      rec["d"] = vec3_json(c->d);
    } else if (const auto* c = std::get_if<CylinderModel>(&o.state.geometry)) {
      rec["b"] = vec3_json(c->b);
      rec["n"] = vec3_json(c->n);
      rec["radius"] = c->radius;
      rec["height"] = o.height;
    } else {
      const auto& p = std::get<PlaneModel>(o.state.geometry);
      rec["center"] = vec3_json(p.center);
      rec["normal"] = vec3_json(p.normal);
      rec["extent"] = p.extent;
    }
    objs.push_back(rec);
  }
  j["objects"] = objs;

  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open world file for writing: " + path);
  out << j.dump(2) << "\n";
}

WorldSpec load_world(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open world file: " + path);
  nlohmann::json j;
  in >> j;
  if (j.value("format", "") != "msm-world" || j.value("version", 0) != 1) {
    throw std::runtime_error("unsupported world file format: " + path);
  }
  WorldSpec world;
  world.seed = j.at("seed").get<std::uint64_t>();
  const auto& b = j.at("bounds");
  world.bounds = Bounds{b.at(0), b.at(1), b.at(2), b.at(3)};
  world.ground_z = j.value("ground_z", 0.0);
  for (const auto& rec : j.at("objects")) {
    WorldObject o;
    o.state.id = rec.at("id").get<std::uint32_t>();
    o.state.cls = class_from_name(rec.at("class").get<std::string>());
    o.state.confidence = rec.value("confidence", 1.0);
    if (rec.contains("d")) {
      CuboidModel c;
      c.r = vec3_from(rec.at("r"));
      c.t = vec3_from(rec.at("t"));
      c.d = vec3_from(rec.at("d"));
      o.state.geometry = c;
      o.height = c.d.z();
    } else if (rec.contains("radius")) {
      CylinderModel c;
      c.b = vec3_from(rec.at("b"));
      c.n = vec3_from(rec.at("n"));
      c.radius = rec.at("radius").get<double>();
      o.state.geometry = c;
      o.height = rec.value("height", 5.0);
    } else {
      PlaneModel p;
      p.center = vec3_from(rec.at("center"));
      p.normal = vec3_from(rec.at("normal"));
      p.extent = rec.at("extent").get<double>();
      o.state.geometry = p;
    }
    validate(o.state);
    world.objects.push_back(o);
  }
  return world;
}

}  // namespace msm
