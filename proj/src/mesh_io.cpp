#include <cstring>
#include <fstream>
#include <sstream>
#include <string>
#include <unordered_map>

#include "flymethrough/mesh.hpp"

namespace flymethrough {

namespace {

std::ifstream open_input(const std::filesystem::path& path, std::ios::openmode mode) {
  std::ifstream in(path, mode);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  return in;
}

void fan_triangulate(const std::vector<std::int64_t>& polygon, std::vector<Triangle>& out) {
  for (std::size_t i = 1; i + 1 < polygon.size(); ++i) {
    out.push_back({static_cast<std::uint32_t>(polygon[0]), static_cast<std::uint32_t>(polygon[i]),
                   static_cast<std::uint32_t>(polygon[i + 1])});
  }
}

enum class PlyType { Int8, UInt8, Int16, UInt16, Int32, UInt32, Float32, Float64 };

PlyType parse_ply_type(const std::string& name, std::size_t line) {
  static const std::unordered_map<std::string, PlyType> kTypes = {
      {"char", PlyType::Int8},     {"int8", PlyType::Int8},      {"uchar", PlyType::UInt8},
      {"uint8", PlyType::UInt8},   {"short", PlyType::Int16},    {"int16", PlyType::Int16},
      {"ushort", PlyType::UInt16}, {"uint16", PlyType::UInt16},  {"int", PlyType::Int32},
      {"int32", PlyType::Int32},   {"uint", PlyType::UInt32},    {"uint32", PlyType::UInt32},
      {"float", PlyType::Float32}, {"float32", PlyType::Float32}, {"double", PlyType::Float64},
      {"float64", PlyType::Float64}};
  auto it = kTypes.find(name);
  if (it == kTypes.end()) {
    throw Error(ErrorCode::ParseError, "line " + std::to_string(line) + ": unknown PLY type " + name);
  }
  return it->second;
}

std::size_t ply_size(PlyType t) {
  switch (t) {
    case PlyType::Int8:
    case PlyType::UInt8: return 1;
    case PlyType::Int16:
    case PlyType::UInt16: return 2;
    case PlyType::Int32:
    case PlyType::UInt32:
    case PlyType::Float32: return 4;
    case PlyType::Float64: return 8;
  }
  return 0;
}

template <typename T>
T read_raw(std::istream& in) {
  T value;
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
  if (!in) throw Error(ErrorCode::ParseError, "unexpected end of binary PLY data");
  return value;
}

// Host is assumed little-endian, matching binary_little_endian.
double read_binary(std::istream& in, PlyType t) {
  switch (t) {
    case PlyType::Int8: return read_raw<std::int8_t>(in);
    case PlyType::UInt8: return read_raw<std::uint8_t>(in);
    case PlyType::Int16: return read_raw<std::int16_t>(in);
    case PlyType::UInt16: return read_raw<std::uint16_t>(in);
    case PlyType::Int32: return read_raw<std::int32_t>(in);
    case PlyType::UInt32: return read_raw<std::uint32_t>(in);
    case PlyType::Float32: return read_raw<float>(in);
    case PlyType::Float64: return read_raw<double>(in);
  }
  return 0.0;
}

struct PlyProperty {
  std::string name;
  PlyType type = PlyType::Float32;
  bool is_list = false;
  PlyType count_type = PlyType::UInt8;
};

struct PlyElement {
  std::string name;
  std::size_t count = 0;
  std::vector<PlyProperty> properties;
};

}  // namespace

TriMesh load_obj(const std::filesystem::path& path) {
  auto in = open_input(path, std::ios::in);
  std::vector<WorldPoint> vertices;
  std::vector<Triangle> triangles;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream ss(line);
    std::string tag;
    if (!(ss >> tag)) continue;
    if (tag == "v") {
      WorldPoint v;
      if (!(ss >> v.x() >> v.y() >> v.z())) {
        throw Error(ErrorCode::ParseError, path.string() + ":" + std::to_string(line_no) +
                                               ": malformed vertex");
      }
      vertices.push_back(v);
    } else if (tag == "f") {
      std::vector<std::int64_t> polygon;
      std::string token;
      while (ss >> token) {
        const std::int64_t raw = std::stoll(token.substr(0, token.find('/')));
        // OBJ indices are 1-based; negative values count back from the end.
        const std::int64_t idx = raw > 0 ? raw - 1 : static_cast<std::int64_t>(vertices.size()) + raw;
        if (idx < 0 || idx >= static_cast<std::int64_t>(vertices.size())) {
          throw Error(ErrorCode::ParseError, path.string() + ":" + std::to_string(line_no) +
                                                 ": face index out of range");
        }
        polygon.push_back(idx);
      }
      fan_triangulate(polygon, triangles);
    }
  }
  return TriMesh(std::move(vertices), std::move(triangles));
}

TriMesh load_ply(const std::filesystem::path& path) {
  auto in = open_input(path, std::ios::in | std::ios::binary);
  std::string line;
  std::getline(in, line);
  if (line.rfind("ply", 0) != 0) throw Error(ErrorCode::ParseError, path.string() + ": not a PLY file");

  bool binary = false;
  std::vector<PlyElement> elements;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::istringstream ss(line);
    std::string keyword;
    ss >> keyword;
    if (keyword == "format") {
      std::string fmt;
      ss >> fmt;
      if (fmt == "binary_little_endian") {
        binary = true;
      } else if (fmt != "ascii") {
        throw Error(ErrorCode::UnsupportedFormat, "PLY format " + fmt);
      }
    } else if (keyword == "element") {
      PlyElement e;
      ss >> e.name >> e.count;
      elements.push_back(e);
    } else if (keyword == "property") {
      if (elements.empty()) {
        throw Error(ErrorCode::ParseError, "line " + std::to_string(line_no) + ": property before element");
      }
      PlyProperty p;
      std::string type;
      ss >> type;
      if (type == "list") {
        std::string count_type, item_type;
        ss >> count_type >> item_type >> p.name;
        p.is_list = true;
        p.count_type = parse_ply_type(count_type, line_no);
        p.type = parse_ply_type(item_type, line_no);
      } else {
        p.type = parse_ply_type(type, line_no);
        ss >> p.name;
      }
      elements.back().properties.push_back(p);
    } else if (keyword == "end_header") {
      break;
    }
  }

  std::vector<WorldPoint> vertices;
  std::vector<Triangle> triangles;
  std::vector<double> row;
  std::vector<std::int64_t> polygon;
  for (const PlyElement& e : elements) {
    const bool is_vertex = e.name == "vertex";
    const bool is_face = e.name == "face";
    int ix = -1, iy = -1, iz = -1, iface = -1;
    for (std::size_t k = 0; k < e.properties.size(); ++k) {
      const std::string& n = e.properties[k].name;
      if (n == "x") ix = static_cast<int>(k);
      if (n == "y") iy = static_cast<int>(k);
      if (n == "z") iz = static_cast<int>(k);
      if (n == "vertex_indices" || n == "vertex_index") iface = static_cast<int>(k);
    }
    if (is_vertex && (ix < 0 || iy < 0 || iz < 0)) {
      throw Error(ErrorCode::ParseError, path.string() + ": vertex element lacks x/y/z");
    }
    for (std::size_t i = 0; i < e.count; ++i) {
      std::istringstream ascii_line;
      if (!binary) {
        if (!std::getline(in, line)) throw Error(ErrorCode::ParseError, "truncated ASCII PLY body");
        ++line_no;
        ascii_line.str(line);
      }
      auto read_value = [&](PlyType t) -> double {
        if (binary) return read_binary(in, t);
        double v;
        if (!(ascii_line >> v)) {
          throw Error(ErrorCode::ParseError, "line " + std::to_string(line_no) + ": malformed PLY row");
        }
        return v;
      };
      row.assign(e.properties.size(), 0.0);
      for (std::size_t k = 0; k < e.properties.size(); ++k) {
        const PlyProperty& p = e.properties[k];
        if (!p.is_list) {
          row[k] = read_value(p.type);
          continue;
        }
        const auto n = static_cast<std::size_t>(read_value(p.count_type));
        if (is_face && static_cast<int>(k) == iface) {
          polygon.clear();
          for (std::size_t j = 0; j < n; ++j) {
            polygon.push_back(static_cast<std::int64_t>(read_value(p.type)));
          }
        } else if (binary) {
          in.ignore(static_cast<std::streamsize>(n * ply_size(p.type)));
        } else {
          for (std::size_t j = 0; j < n; ++j) read_value(p.type);
        }
      }
      if (is_vertex) {
        vertices.emplace_back(row[ix], row[iy], row[iz]);
      } else if (is_face && iface >= 0) {
        for (std::int64_t idx : polygon) {
          if (idx < 0 || idx >= static_cast<std::int64_t>(vertices.size())) {
            throw Error(ErrorCode::ParseError, path.string() + ": face index out of range");
          }
        }
        fan_triangulate(polygon, triangles);
      }
    }
  }
  return TriMesh(std::move(vertices), std::move(triangles));
}

TriMesh load_mesh(const std::filesystem::path& path, bool axis_flip) {
  std::string ext = path.extension().string();
  for (char& c : ext) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  TriMesh mesh;
  if (ext == ".obj") {
    mesh = load_obj(path);
  } else if (ext == ".ply") {
    mesh = load_ply(path);
  } else {
    throw Error(ErrorCode::UnsupportedFormat, "mesh extension " + ext);
  }
  if (axis_flip) mesh = mesh.transformed(axis_flip_rotation(), Eigen::Vector3d::Zero());
  return mesh;
}

void write_ply(const std::filesystem::path& path, const TriMesh& mesh) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out << "ply\nformat binary_little_endian 1.0\n"
      << "element vertex " << mesh.vertices().size() << "\n"
      << "property double x\nproperty double y\nproperty double z\n"
      << "element face " << mesh.triangles().size() << "\n"
      << "property list uchar int vertex_indices\nend_header\n";
  for (const WorldPoint& v : mesh.vertices()) {
    const double xyz[3] = {v.x(), v.y(), v.z()};
    out.write(reinterpret_cast<const char*>(xyz), sizeof(xyz));
  }
  for (const Triangle& t : mesh.triangles()) {
    const std::uint8_t n = 3;
    const std::int32_t idx[3] = {static_cast<std::int32_t>(t[0]), static_cast<std::int32_t>(t[1]),
                                 static_cast<std::int32_t>(t[2])};
    out.write(reinterpret_cast<const char*>(&n), 1);
    out.write(reinterpret_cast<const char*>(idx), sizeof(idx));
  }
}

}  // namespace flymethrough
