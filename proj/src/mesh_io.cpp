#include "scenefit/mesh_io.hpp"

#include "scenefit/log.hpp"

#include <array>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace scenefit {

namespace {

[[noreturn]] void fail(const std::filesystem::path& path, const std::string& what) {
  throw std::runtime_error(path.string() + ": " + what);
}

void finalize(TriMesh& mesh, const std::filesystem::path& path) {
  mesh.validate();
  mesh.update_normals();
  const OrientationReport report = orientation_report(mesh);
  if (!report.consistent())
    log_warn(path.string(), ": winding inconsistencies (", report.inconsistent_edges,
             " flipped, ", report.nonmanifold_edges, " non-manifold edges); proceeding");
}

}  // namespace

TriMesh load_obj(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(path, "cannot open");
  TriMesh mesh;
  std::string line;
  while (std::getline(in, line)) {
    if (line.rfind("v ", 0) == 0) {
      std::istringstream ss(line.substr(2));
      Vec3 v;
      if (!(ss >> v[0] >> v[1] >> v[2])) fail(path, "bad vertex line: " + line);
      mesh.vertices.push_back(v);
    } else if (line.rfind("f ", 0) == 0) {
      std::istringstream ss(line.substr(2));
      std::array<int, 3> idx{};
      std::string token;
      for (int k = 0; k < 3; ++k) {
        if (!(ss >> token)) fail(path, "bad face line: " + line);
        // "i", "i/j", "i/j/k", "i//k" all start with the vertex index.
        idx[k] = std::stoi(token.substr(0, token.find('/')));
        if (idx[k] < 1) fail(path, "face indices must be positive: " + line);
      }
      if (ss >> token) fail(path, "only triangle faces are supported: " + line);
      mesh.faces.push_back(Face(idx[0] - 1, idx[1] - 1, idx[2] - 1));
    }
  }
  finalize(mesh, path);
  return mesh;
}

void save_obj(const TriMesh& mesh, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) fail(path, "cannot open for writing");
  out.precision(17);
  for (const Vec3& v : mesh.vertices) out << "v " << v[0] << ' ' << v[1] << ' ' << v[2] << '\n';
  for (const Face& f : mesh.faces)
    out << "f " << f[0] + 1 << ' ' << f[1] + 1 << ' ' << f[2] + 1 << '\n';
  if (!out) fail(path, "write failed");
}

namespace {

struct PlyProperty {
  std::string type;
  std::string name;
};

std::size_t scalar_size(const std::string& type) {
  if (type == "char" || type == "uchar" || type == "int8" || type == "uint8") return 1;
  if (type == "short" || type == "ushort" || type == "int16" || type == "uint16") return 2;
  if (type == "int" || type == "uint" || type == "int32" || type == "uint32" ||
      type == "float" || type == "float32")
    return 4;
  if (type == "double" || type == "float64") return 8;
  throw std::runtime_error("ply: unknown scalar type " + type);
}

double read_scalar(std::istream& in, const std::string& type) {
  char buf[8];
  in.read(buf, static_cast<std::streamsize>(scalar_size(type)));
  if (type == "float" || type == "float32") {
    float v;
    std::memcpy(&v, buf, 4);
    return v;
  }
  if (type == "double" || type == "float64") {
    double v;
    std::memcpy(&v, buf, 8);
    return v;
  }
  if (type == "int" || type == "int32") {
    int32_t v;
    std::memcpy(&v, buf, 4);
    return v;
  }
  if (type == "uint" || type == "uint32") {
    uint32_t v;
    std::memcpy(&v, buf, 4);
    return v;
  }
  if (type == "uchar" || type == "uint8") return static_cast<unsigned char>(buf[0]);
  if (type == "char" || type == "int8") return static_cast<signed char>(buf[0]);
  if (type == "short" || type == "int16") {
    int16_t v;
    std::memcpy(&v, buf, 2);
    return v;
  }
  uint16_t v;
  std::memcpy(&v, buf, 2);
  return v;
}

}  // namespace

TriMesh load_ply(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(path, "cannot open");
  std::string line;
  std::getline(in, line);
  if (line != "ply") fail(path, "not a ply file");

  std::size_t vertex_count = 0, face_count = 0;
  std::vector<PlyProperty> vertex_props;
  std::string face_count_type = "uchar", face_index_type = "int";
  std::string current_element;
  bool binary_le = false;

  while (std::getline(in, line)) {
    std::istringstream ss(line);
    std::string word;
    ss >> word;
    if (word == "comment") continue;
    if (word == "format") {
      std::string fmt;
      ss >> fmt;
      binary_le = (fmt == "binary_little_endian");
      if (!binary_le) fail(path, "only binary_little_endian ply is supported");
    } else if (word == "element") {
      std::string name;
      std::size_t count;
      ss >> name >> count;
      current_element = name;
      if (name == "vertex") vertex_count = count;
      else if (name == "face") face_count = count;
      else fail(path, "unsupported element " + name);
    } else if (word == "property") {
      std::string type;
      ss >> type;
      if (type == "list") {
        std::string count_type, index_type, name;
        ss >> count_type >> index_type >> name;
        if (current_element != "face" || name != "vertex_indices")
          fail(path, "unsupported list property " + name);
        face_count_type = count_type;
        face_index_type = index_type;
      } else {
        std::string name;
        ss >> name;
        if (current_element == "vertex") vertex_props.push_back({type, name});
      }
    } else if (word == "end_header") {
      break;
    }
  }

  TriMesh mesh;
  mesh.vertices.resize(vertex_count);
  for (std::size_t v = 0; v < vertex_count; ++v) {
    Vec3 p = Vec3::Zero();
    for (const PlyProperty& prop : vertex_props) {
      const double value = read_scalar(in, prop.type);
      if (prop.name == "x") p[0] = value;
      else if (prop.name == "y") p[1] = value;
      else if (prop.name == "z") p[2] = value;
    }
    mesh.vertices[v] = p;
  }
  mesh.faces.reserve(face_count);
  for (std::size_t f = 0; f < face_count; ++f) {
    const int n = static_cast<int>(read_scalar(in, face_count_type));
    std::vector<int> idx(n);
    for (int k = 0; k < n; ++k) idx[k] = static_cast<int>(read_scalar(in, face_index_type));
    if (n == 3) {
      mesh.faces.push_back(Face(idx[0], idx[1], idx[2]));
    } else if (n > 3) {  // fan-triangulate
      for (int k = 1; k + 1 < n; ++k) mesh.faces.push_back(Face(idx[0], idx[k], idx[k + 1]));
    } else {
      fail(path, "degenerate face record");
    }
  }
  if (!in) fail(path, "truncated ply payload");
  finalize(mesh, path);
  return mesh;
}

void save_ply(const TriMesh& mesh, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(path, "cannot open for writing");
  out << "ply\nformat binary_little_endian 1.0\n";
  out << "element vertex " << mesh.vertices.size() << '\n';
  out << "property double x\nproperty double y\nproperty double z\n";
  out << "element face " << mesh.faces.size() << '\n';
  out << "property list uchar int vertex_indices\n";
  out << "end_header\n";
  for (const Vec3& v : mesh.vertices) {
    const double xyz[3] = {v[0], v[1], v[2]};
    out.write(reinterpret_cast<const char*>(xyz), sizeof(xyz));
  }
  for (const Face& f : mesh.faces) {
    const unsigned char count = 3;
    const int32_t idx[3] = {f[0], f[1], f[2]};
    out.write(reinterpret_cast<const char*>(&count), 1);
    out.write(reinterpret_cast<const char*>(idx), sizeof(idx));
  }
  if (!out) fail(path, "write failed");
}

TriMesh load_mesh(const std::filesystem::path& path) {
  const auto ext = path.extension().string();
  if (ext == ".obj") return load_obj(path);
  if (ext == ".ply") return load_ply(path);
  fail(path, "unsupported mesh extension '" + ext + "'");
}

void save_mesh(const TriMesh& mesh, const std::filesystem::path& path) {
  const auto ext = path.extension().string();
  if (ext == ".obj") return save_obj(mesh, path);
  if (ext == ".ply") return save_ply(mesh, path);
  fail(path, "unsupported mesh extension '" + ext + "'");
}

}  // namespace scenefit
