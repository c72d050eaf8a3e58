#include "msm/map_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace msm {

namespace {

constexpr char kMagic[4] = {'M', 'S', 'M', '1'};

std::int32_t quantize(double value, double res) {
  const double q = std::round(value / res);
  if (std::abs(q) > 2147483647.0) {
    throw std::invalid_argument("map value out of quantization range");
  }
  return static_cast<std::int32_t>(q);
}

double dequantize(std::int32_t q, double res) { return q * res; }

std::uint8_t quantize_confidence(double c) {
  return static_cast<std::uint8_t>(
      std::clamp(std::lround(c * 255.0), 0L, 255L));
}

// Unit axis stored as azimuth/elevation at angular resolution.
void axis_to_angles(const Vec3& n, double& az, double& el) {
  az = std::atan2(n.y(), n.x());
  el = std::asin(std::clamp(n.z(), -1.0, 1.0));
}

Vec3 angles_to_axis(double az, double el) {
  return Vec3(std::cos(el) * std::cos(az), std::cos(el) * std::sin(az),
              std::sin(el));
}

void put_u32(std::string& out, std::uint32_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>((v >> 8) & 0xff));
  out.push_back(static_cast<char>((v >> 16) & 0xff));
  out.push_back(static_cast<char>((v >> 24) & 0xff));
}

void put_i32(std::string& out, std::int32_t v) {
  put_u32(out, static_cast<std::uint32_t>(v));
}

struct Cursor {
  const std::string& data;
  std::size_t pos = 0;

  std::uint8_t u8() {
    if (pos + 1 > data.size()) throw std::runtime_error("truncated map file");
    return static_cast<std::uint8_t>(data[pos++]);
  }
  std::uint32_t u32() {
    if (pos + 4 > data.size()) throw std::runtime_error("truncated map file");
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) {
      v |= static_cast<std::uint32_t>(static_cast<std::uint8_t>(data[pos + i]))
           << (8 * i);
    }
    pos += 4;
    return v;
  }
  std::int32_t i32() { return static_cast<std::int32_t>(u32()); }
};

void encode_entry(std::string& out, const ObjectState& obj) {
  if (std::holds_alternative<PlaneModel>(obj.geometry)) {
    throw std::invalid_argument("maps hold cuboids and cylinders only");
  }
  out.push_back(static_cast<char>(obj.cls));
  put_u32(out, obj.id);
  out.push_back(static_cast<char>(quantize_confidence(obj.confidence)));
  if (const auto* box = std::get_if<CuboidModel>(&obj.geometry)) {
    for (int i = 0; i < 3; ++i) put_i32(out, quantize(box->r[i], kMapAngularRes));
    for (int i = 0; i < 3; ++i) put_i32(out, quantize(box->t[i], kMapLinearRes));
    for (int i = 0; i < 3; ++i) {
      put_i32(out, std::max<std::int32_t>(1, quantize(box->d[i], kMapLinearRes)));
    }
  } else {
    const auto& cyl = std::get<CylinderModel>(obj.geometry);
    for (int i = 0; i < 3; ++i) put_i32(out, quantize(cyl.b[i], kMapLinearRes));
    double az = 0.0, el = 0.0;
    axis_to_angles(cyl.n, az, el);
    put_i32(out, quantize(az, kMapAngularRes));
    put_i32(out, quantize(el, kMapAngularRes));
    put_i32(out, std::max<std::int32_t>(1, quantize(cyl.radius, kMapLinearRes)));
  }
}

ObjectState decode_entry(Cursor& c) {
  ObjectState obj;
  const std::uint8_t cls = c.u8();
  if (cls > 3) throw std::runtime_error("corrupt map entry: bad class code");
  obj.cls = static_cast<SemanticClass>(cls);
  obj.id = c.u32();
  obj.confidence = c.u8() / 255.0;
  if (is_cylinder_class(obj.cls)) {
    CylinderModel cyl;
    for (int i = 0; i < 3; ++i) cyl.b[i] = dequantize(c.i32(), kMapLinearRes);
    const double az = dequantize(c.i32(), kMapAngularRes);
    const double el = dequantize(c.i32(), kMapAngularRes);
    cyl.n = angles_to_axis(az, el);
    cyl.radius = dequantize(c.i32(), kMapLinearRes);
    obj.geometry = cyl;
  } else {
    CuboidModel box;
    for (int i = 0; i < 3; ++i) box.r[i] = dequantize(c.i32(), kMapAngularRes);
    for (int i = 0; i < 3; ++i) box.t[i] = dequantize(c.i32(), kMapLinearRes);
    for (int i = 0; i < 3; ++i) box.d[i] = dequantize(c.i32(), kMapLinearRes);
    obj.geometry = box;
  }
  return obj;
}

}  // namespace

ObjectState quantize_object(const ObjectState& obj) {
  std::string buf;
  encode_entry(buf, obj);
  Cursor c{buf};
  return decode_entry(c);
}

std::size_t map_entry_bytes(const ObjectState& obj) {
  std::string buf;
  encode_entry(buf, obj);
  return buf.size();
}

void save_map_binary(const std::vector<ObjectState>& objects,
                     const std::string& path) {
  std::string out(kMagic, 4);
  put_u32(out, static_cast<std::uint32_t>(objects.size()));
  for (const auto& obj : objects) encode_entry(out, obj);
  atomic_write_text(path, out);
}

std::vector<ObjectState> load_map_binary(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open map file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  const std::string data = ss.str();
  if (data.size() < 4 || data.compare(0, 4, kMagic, 4) != 0) {
    throw std::runtime_error("unsupported map format (expected MSM1)");
  }
  Cursor c{data, 4};
  const std::uint32_t count = c.u32();
  std::vector<ObjectState> out;
  out.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) out.push_back(decode_entry(c));
  if (c.pos != data.size()) {
    throw std::runtime_error("trailing bytes in map file");
  }
  return out;
}

void save_map_text(const std::vector<ObjectState>& objects,
                   const std::string& path) {
  std::string out = "msm-map-text 1\n";
  char buf[512];
  for (const auto& raw : objects) {
    const ObjectState obj = quantize_object(raw);
    if (const auto* box = std::get_if<CuboidModel>(&obj.geometry)) {
      std::snprintf(buf, sizeof(buf),
                    "%s %u %.9g cuboid %.9g %.9g %.9g %.9g %.9g %.9g %.9g %.9g %.9g\n",
                    class_name(obj.cls), obj.id, obj.confidence, box->r.x(),
                    box->r.y(), box->r.z(), box->t.x(), box->t.y(), box->t.z(),
                    box->d.x(), box->d.y(), box->d.z());
    } else {
      const auto& cyl = std::get<CylinderModel>(obj.geometry);
      std::snprintf(buf, sizeof(buf),
                    "%s %u %.9g cylinder %.9g %.9g %.9g %.9g %.9g %.9g %.9g\n",
                    class_name(obj.cls), obj.id, obj.confidence, cyl.b.x(),
                    cyl.b.y(), cyl.b.z(), cyl.n.x(), cyl.n.y(), cyl.n.z(),
                    cyl.radius);
    }
    out += buf;
  }
  atomic_write_text(path, out);
}

std::vector<ObjectState> load_map_text(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open map file: " + path);
  std::string header;
  std::getline(in, header);
  if (header != "msm-map-text 1") {
    throw std::runtime_error("unsupported text map format");
  }
  std::vector<ObjectState> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string cls_name, kind;
    ObjectState obj;
    ss >> cls_name >> obj.id >> obj.confidence >> kind;
    obj.cls = class_from_name(cls_name);
    if (kind == "cuboid") {
      CuboidModel box;
      ss >> box.r.x() >> box.r.y() >> box.r.z() >> box.t.x() >> box.t.y() >>
          box.t.z() >> box.d.x() >> box.d.y() >> box.d.z();
      obj.geometry = box;
    } else if (kind == "cylinder") {
      CylinderModel cyl;
      ss >> cyl.b.x() >> cyl.b.y() >> cyl.b.z() >> cyl.n.x() >> cyl.n.y() >>
          cyl.n.z() >> cyl.radius;
      obj.geometry = cyl;
    } else {
      throw std::runtime_error("corrupt text map line: " + line);
    }
    if (!ss) throw std::runtime_error("corrupt text map line: " + line);
    out.push_back(obj);
  }
  return out;
}

void atomic_write_text(const std::string& path, const std::string& contents) {
  atomic_write_with(path, [&](const std::string& tmp) {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write file: " + tmp);
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out) throw std::runtime_error("short write: " + tmp);
  });
}

void atomic_write_with(const std::string& path,
                       const std::function<void(const std::string&)>& writer) {
  const std::string tmp = path + ".tmp";
  writer(tmp);
  if (std::rename(tmp.c_str(), path.c_str()) != 0) {
    throw std::runtime_error("cannot move " + tmp + " into place");
  }
}

}  // namespace msm
