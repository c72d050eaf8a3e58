#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "msm/objects.hpp"

namespace msm {

// Storage resolution of the compact binary map: 1 cm for lengths, 1 mrad for
// angles, 1/255 for confidences.
inline constexpr double kMapLinearRes = 0.01;
inline constexpr double kMapAngularRes = 1.0e-3;

// The state an object assumes after a save/load cycle (all fields snapped to
// the storage resolution). save(load(f)) is byte-identical to f.
ObjectState quantize_object(const ObjectState& obj);

// Bytes the object occupies in the binary encoding (entry only, no header).
std::size_t map_entry_bytes(const ObjectState& obj);

// Compact little-endian binary map. Throws std::invalid_argument for plane
// geometries (maps hold cuboids and cylinders only) and std::runtime_error on
// magic/version mismatch or truncation.
void save_map_binary(const std::vector<ObjectState>& objects, const std::string& path);
std::vector<ObjectState> load_map_binary(const std::string& path);

// Human-readable text variant; one object per line, same quantization.
void save_map_text(const std::vector<ObjectState>& objects, const std::string& path);
std::vector<ObjectState> load_map_text(const std::string& path);

// Write-temp-then-rename helpers so partially written artifacts never appear
// under their final name.
void atomic_write_text(const std::string& path, const std::string& contents);
void atomic_write_with(const std::string& path,
                       const std::function<void(const std::string&)>& writer);

}  // namespace msm
