#pragma once

#include <cstdint>
#include <string>
#include <variant>

#include "msm/se3.hpp"

namespace msm {

enum class SemanticClass : std::uint8_t {
  kVehicle = 0,
  kLightPole = 1,
  kTreeTrunk = 2,
  kGround = 3,
};

const char* class_name(SemanticClass c);
SemanticClass class_from_name(const std::string& name);

inline bool is_cylinder_class(SemanticClass c) {
  return c == SemanticClass::kLightPole || c == SemanticClass::kTreeTrunk;
}

// Target classes drive active exploration; the rest only anchor localization.
inline bool is_target_class(SemanticClass c) {
  return c == SemanticClass::kVehicle;
}

// Oriented box: axis-angle rotation r, center t, edge lengths d (d > 0).
struct CuboidModel {
  Vec3 r = Vec3::Zero();
  Vec3 t = Vec3::Zero();
  Vec3 d = Vec3::Ones();

  Pose pose() const { return Pose{so3_exp(r), t}; }
};

// Infinite ray from root b along unit axis n, radius > 0.
struct CylinderModel {
  Vec3 b = Vec3::Zero();
  Vec3 n = Vec3::UnitZ();
  double radius = 0.1;
};

// Local ground patch; normal kept pointing upward (n.z >= 0).
struct PlaneModel {
  Vec3 center = Vec3::Zero();
  Vec3 normal = Vec3::UnitZ();
  double extent = 1.0;
};

using Geometry = std::variant<CuboidModel, CylinderModel, PlaneModel>;

struct ObjectState {
  SemanticClass cls = SemanticClass::kVehicle;
  double confidence = 1.0;
  Geometry geometry;
  std::uint32_t id = 0;
};

// Throws std::invalid_argument when class/geometry pairing or numeric
// invariants are violated.
void validate(const ObjectState& obj);

// Ground-plane (x, y) anchor used for association and spacing: cuboid center
// or cylinder root; plane center.
Vec2 footprint_center(const ObjectState& obj);

// Half-extent of the object footprint in the ground plane.
double footprint_radius(const ObjectState& obj);

// Re-express the geometry in the frame reached through `pose` (point maps
// p -> R p + t). Class, confidence and id are unchanged.
ObjectState transform_object(const Pose& pose, const ObjectState& obj);

CuboidModel transform_cuboid(const Pose& pose, const CuboidModel& c);
CylinderModel transform_cylinder(const Pose& pose, const CylinderModel& c);
PlaneModel transform_plane(const Pose& pose, const PlaneModel& p);

}  // namespace msm
