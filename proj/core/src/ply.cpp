// SPDX-License-Identifier: Apache-2.0
#include "v3dg/ply.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "v3dg/bundle.hpp"
#include "v3dg/error.hpp"

namespace v3dg {

namespace {

enum class ScalarType { kInt8, kUint8, kInt16, kUint16, kInt32, kUint32, kFloat32, kFloat64 };

std::optional<ScalarType> parse_type(const std::string& t) {
  if (t == "char" || t == "int8") return ScalarType::kInt8;
  if (t == "uchar" || t == "uint8") return ScalarType::kUint8;
  if (t == "short" || t == "int16") return ScalarType::kInt16;
  if (t == "ushort" || t == "uint16") return ScalarType::kUint16;
  if (t == "int" || t == "int32") return ScalarType::kInt32;
  if (t == "uint" || t == "uint32") return ScalarType::kUint32;
  if (t == "float" || t == "float32") return ScalarType::kFloat32;
  if (t == "double" || t == "float64") return ScalarType::kFloat64;
  return std::nullopt;
}

std::size_t type_size(ScalarType t) {
  switch (t) {
    case ScalarType::kInt8:
    case ScalarType::kUint8: return 1;
    case ScalarType::kInt16:
    case ScalarType::kUint16: return 2;
    case ScalarType::kInt32:
    case ScalarType::kUint32:
    case ScalarType::kFloat32: return 4;
    case ScalarType::kFloat64: return 8;
  }
  return 0;
}

struct Property {
  std::string name;
  ScalarType type;
  std::size_t offset;
};

struct Element {
  std::string name;
  std::size_t count = 0;
  std::vector<Property> properties;
  std::size_t stride = 0;
  bool has_list = false;
};

struct Header {
  std::vector<Element> elements;
  std::size_t data_offset = 0;
};

Header parse_header(const std::vector<char>& bytes) {
  static constexpr std::string_view kEnd = "end_header";
  Header h;
  std::size_t pos = 0;
  bool first = true;
  bool saw_format = false;
  while (true) {
    const auto nl = std::find(bytes.begin() + static_cast<std::ptrdiff_t>(pos), bytes.end(), '\n');
    if (nl == bytes.end()) raise(ErrorKind::kFormat, "PLY header is not terminated");
    std::string line(bytes.begin() + static_cast<std::ptrdiff_t>(pos), nl);
    pos = static_cast<std::size_t>(nl - bytes.begin()) + 1;
    if (!line.empty() && line.back() == '\r') line.pop_back();

    if (first) {
      if (line != "ply") raise(ErrorKind::kFormat, "missing 'ply' signature");
      first = false;
      continue;
    }
    std::istringstream ls(line);
    std::string keyword;
    ls >> keyword;
    if (keyword == "format") {
      std::string fmt;
      ls >> fmt;
      if (fmt != "binary_little_endian") {
        raise(ErrorKind::kFormat, "unsupported PLY format '" + fmt + "'");
      }
      saw_format = true;
    } else if (keyword == "element") {
      Element e;
      ls >> e.name >> e.count;
      if (!ls) raise(ErrorKind::kFormat, "malformed element line: " + line);
      h.elements.push_back(std::move(e));
    } else if (keyword == "property") {
      if (h.elements.empty()) raise(ErrorKind::kFormat, "property before any element");
      Element& e = h.elements.back();
      std::string type;
      ls >> type;
      if (type == "list") {
        e.has_list = true;
        continue;
      }
      std::string name;
      ls >> name;
      const auto st = parse_type(type);
      if (!st) raise(ErrorKind::kFormat, "unknown property type '" + type + "'");
      e.properties.push_back({name, *st, e.stride});
      e.stride += type_size(*st);
    } else if (keyword == kEnd) {
      break;
    }
    // comment / obj_info lines are ignored
  }
  if (!saw_format) raise(ErrorKind::kFormat, "missing PLY format line");
  h.data_offset = pos;
  return h;
}

double read_scalar(const char* p, ScalarType t) {
  switch (t) {
    case ScalarType::kInt8: { std::int8_t v; std::memcpy(&v, p, 1); return v; }
    case ScalarType::kUint8: { std::uint8_t v; std::memcpy(&v, p, 1); return v; }
    case ScalarType::kInt16: { std::int16_t v; std::memcpy(&v, p, 2); return v; }
    case ScalarType::kUint16: { std::uint16_t v; std::memcpy(&v, p, 2); return v; }
    case ScalarType::kInt32: { std::int32_t v; std::memcpy(&v, p, 4); return v; }
    case ScalarType::kUint32: { std::uint32_t v; std::memcpy(&v, p, 4); return v; }
    case ScalarType::kFloat32: { float v; std::memcpy(&v, p, 4); return v; }
    case ScalarType::kFloat64: { double v; std::memcpy(&v, p, 8); return v; }
  }
  return 0.0;
}

constexpr std::array<const char*, 14> kRequired = {
    "x",       "y",       "z",       "f_dc_0", "f_dc_1", "f_dc_2", "opacity",
    "scale_0", "scale_1", "scale_2", "rot_0",  "rot_1",  "rot_2",  "rot_3"};

double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Open-interval clamps so activated rows always satisfy the invariants even
// when logistic/exp saturate in float precision.
constexpr float kMinOpacity = 1e-7f;
const float kMaxOpacity = std::nextafter(1.0f, 0.0f);
constexpr float kMinScale = 1e-7f;

}  // namespace

GaussianSet load_ply(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) raise(ErrorKind::kIo, "cannot open PLY file " + path.string());
  const std::vector<char> bytes((std::istreambuf_iterator<char>(in)),
                                std::istreambuf_iterator<char>());
  const Header h = parse_header(bytes);

  std::size_t offset = h.data_offset;
  const Element* vertex = nullptr;
  for (const Element& e : h.elements) {
    if (e.name == "vertex") {
      vertex = &e;
      break;
    }
    if (e.has_list) {
      raise(ErrorKind::kFormat, "list element '" + e.name + "' precedes the vertex element");
    }
    offset += e.count * e.stride;
  }
  if (!vertex) raise(ErrorKind::kFormat, "PLY has no vertex element");
  if (vertex->has_list) raise(ErrorKind::kFormat, "vertex element has list properties");

  std::array<const Property*, kRequired.size()> props{};
  for (std::size_t k = 0; k < kRequired.size(); ++k) {
    for (const Property& p : vertex->properties) {
      if (p.name == kRequired[k]) props[k] = &p;
    }
    if (!props[k]) {
      raise(ErrorKind::kFormat, std::string("PLY is missing property '") + kRequired[k] + "'");
    }
  }

  const std::size_t n = vertex->count;
  if (bytes.size() < offset + n * vertex->stride) {
    raise(ErrorKind::kIo, "PLY vertex data truncated in " + path.string());
  }

  GaussianSet gs(n);
  std::array<double, kRequired.size()> raw{};
  for (std::size_t i = 0; i < n; ++i) {
    const char* row = bytes.data() + offset + i * vertex->stride;
    for (std::size_t k = 0; k < kRequired.size(); ++k) {
      raw[k] = read_scalar(row + props[k]->offset, props[k]->type);
    }
    Gaussian3D g;
    g.position = Eigen::Vector3d(raw[0], raw[1], raw[2]).cast<float>();
    for (int c = 0; c < 3; ++c) {
      g.color[c] = static_cast<float>(std::max(0.0, 0.5 + kShC0 * raw[3 + c]));
    }
    g.opacity = std::clamp(static_cast<float>(logistic(raw[6])), kMinOpacity, kMaxOpacity);
    for (int c = 0; c < 3; ++c) {
      g.scale[c] = std::max(static_cast<float>(std::exp(raw[7 + c])), kMinScale);
    }
    const Eigen::Vector4d q(raw[10], raw[11], raw[12], raw[13]);
    g.rotation = (q / q.norm()).cast<float>();

    if (!g.position.allFinite() || !g.color.allFinite() || !std::isfinite(raw[6]) ||
        !g.scale.allFinite() || !g.rotation.allFinite()) {
      raise(ErrorKind::kData, "non-finite attribute after activation at row " + std::to_string(i));
    }
    gs.set(i, g);
  }
  return gs;
}

void write_ply(const GaussianSet& gs, const std::filesystem::path& path) {
  std::ostringstream os;
  os << "ply\nformat binary_little_endian 1.0\nelement vertex " << gs.size() << "\n";
  for (const char* name : {"x", "y", "z", "nx", "ny", "nz", "f_dc_0", "f_dc_1", "f_dc_2",
                           "opacity", "scale_0", "scale_1", "scale_2", "rot_0", "rot_1", "rot_2",
                           "rot_3"}) {
    os << "property float " << name << "\n";
  }
  os << "end_header\n";
  std::string out = os.str();
  out.reserve(out.size() + gs.size() * 17 * sizeof(float));

  auto put = [&](double v) {
    const float f = static_cast<float>(v);
    out.append(reinterpret_cast<const char*>(&f), sizeof(f));
  };
  for (std::size_t i = 0; i < gs.size(); ++i) {
    const auto& p = gs.positions[i];
    put(p.x()); put(p.y()); put(p.z());
    put(0.0); put(0.0); put(0.0);
    for (int c = 0; c < 3; ++c) put((gs.colors[i][c] - 0.5) / kShC0);
    const double o = gs.opacities[i];
    put(std::log(o / (1.0 - o)));
    for (int c = 0; c < 3; ++c) put(std::log(static_cast<double>(gs.scales[i][c])));
    for (int c = 0; c < 4; ++c) put(gs.rotations[i][c]);
  }
  write_file_atomic(path, out.data(), out.size());
}

}  // namespace v3dg
