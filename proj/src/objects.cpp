#include "msm/objects.hpp"

#include <cmath>
#include <stdexcept>

namespace msm {

const char* class_name(SemanticClass c) {
  switch (c) {
    case SemanticClass::kVehicle:
      return "vehicle";
    case SemanticClass::kLightPole:
      return "light_pole";
    case SemanticClass::kTreeTrunk:
      return "tree_trunk";
    case SemanticClass::kGround:
      return "ground";
  }
  return "unknown";
}

SemanticClass class_from_name(const std::string& name) {
  if (name == "vehicle") return SemanticClass::kVehicle;
  if (name == "light_pole") return SemanticClass::kLightPole;
  if (name == "tree_trunk") return SemanticClass::kTreeTrunk;
  if (name == "ground") return SemanticClass::kGround;
  throw std::invalid_argument("unknown semantic class: " + name);
}

void validate(const ObjectState& obj) {
  if (obj.confidence < 0.0 || obj.confidence > 1.0) {
    throw std::invalid_argument("object confidence outside [0,1]");
  }
  const bool cuboid = std::holds_alternative<CuboidModel>(obj.geometry);
  const bool cylinder = std::holds_alternative<CylinderModel>(obj.geometry);
  const bool plane = std::holds_alternative<PlaneModel>(obj.geometry);
  if (obj.cls == SemanticClass::kVehicle && !cuboid) {
    throw std::invalid_argument("vehicle must carry a cuboid model");
  }
  if (is_cylinder_class(obj.cls) && !cylinder) {
    throw std::invalid_argument("pole/trunk must carry a cylinder model");
  }
  if (obj.cls == SemanticClass::kGround && !plane) {
    throw std::invalid_argument("ground must carry a plane model");
  }
  if (cuboid) {
    const auto& c = std::get<CuboidModel>(obj.geometry);
    if (!(c.d.array() > 0.0).all()) {
      throw std::invalid_argument("cuboid dimensions must be positive");
    }
  }
  if (cylinder) {
    const auto& c = std::get<CylinderModel>(obj.geometry);
    if (std::abs(c.n.norm() - 1.0) > 1e-9) {
      throw std::invalid_argument("cylinder axis must be unit length");
    }
    if (c.radius <= 0.0) {
      throw std::invalid_argument("cylinder radius must be positive");
    }
  }
  if (plane) {
    const auto& p = std::get<PlaneModel>(obj.geometry);
    if (std::abs(p.normal.norm() - 1.0) > 1e-9) {
      throw std::invalid_argument("plane normal must be unit length");
    }
    if (p.normal.z() < 0.0) {
      throw std::invalid_argument("plane normal must point upward");
    }
  }
}

Vec2 footprint_center(const ObjectState& obj) {
  if (const auto* c = std::get_if<CuboidModel>(&obj.geometry)) {
    return c->t.head<2>();
  }
  if (const auto* c = std::get_if<CylinderModel>(&obj.geometry)) {
    return c->b.head<2>();
  }
  return std::get<PlaneModel>(obj.geometry).center.head<2>();
}

double footprint_radius(const ObjectState& obj) {
  if (const auto* c = std::get_if<CuboidModel>(&obj.geometry)) {
    return 0.5 * std::hypot(c->d.x(), c->d.y());
  }
  if (const auto* c = std::get_if<CylinderModel>(&obj.geometry)) {
    return c->radius;
  }
  return std::get<PlaneModel>(obj.geometry).extent;
}

CuboidModel transform_cuboid(const Pose& pose, const CuboidModel& c) {
  const Pose moved = se3_compose(pose, c.pose());
  CuboidModel out;
  out.r = so3_log(moved.R);
  out.t = moved.t;
  out.d = c.d;
  return out;
}

CylinderModel transform_cylinder(const Pose& pose, const CylinderModel& c) {
  CylinderModel out;
  out.b = pose.apply(c.b);
  out.n = pose.R * c.n;
  out.radius = c.radius;
  return out;
}

PlaneModel transform_plane(const Pose& pose, const PlaneModel& p) {
  PlaneModel out;
  out.center = pose.apply(p.center);
  out.normal = pose.R * p.normal;
  if (out.normal.z() < 0.0) {
    out.normal = -out.normal;
  }
  out.extent = p.extent;
  return out;
}

ObjectState transform_object(const Pose& pose, const ObjectState& obj) {
  ObjectState out = obj;
  if (const auto* c = std::get_if<CuboidModel>(&obj.geometry)) {
    out.geometry = transform_cuboid(pose, *c);
  } else if (const auto* c = std::get_if<CylinderModel>(&obj.geometry)) {
    out.geometry = transform_cylinder(pose, *c);
  } else {
    out.geometry = transform_plane(pose, std::get<PlaneModel>(obj.geometry));
  }
  return out;
}

}  // namespace msm
