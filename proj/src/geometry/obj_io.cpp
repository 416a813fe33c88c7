#include "smal/geometry/obj_io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

namespace smal {

namespace {

// "3", "3/1", "3//2", "3/1/2" -> vertex index, resolving negatives.
int parse_face_corner(const std::string& token, int vertex_count,
                      const std::string& path) {
  size_t slash = token.find('/');
  const std::string head = slash == std::string::npos ? token
                                                      : token.substr(0, slash);
  int idx = 0;
  try {
    idx = std::stoi(head);
  } catch (const std::exception&) {
    throw io_error(path + ": bad face index '" + token + "'");
  }
  if (idx < 0) idx = vertex_count + idx + 1;
  if (idx < 1 || idx > vertex_count)
    throw io_error(path + ": face index " + head + " out of range");
  return idx - 1;
}

}  // namespace

Mesh read_obj(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot open OBJ file: " + path);
  Mesh mesh;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    std::string tag;
    ls >> tag;
    if (tag == "v") {
      Vec3 p;
      if (!(ls >> p.x() >> p.y() >> p.z()))
        throw io_error(path + ": malformed vertex line: " + line);
      mesh.vertices.push_back(p);
    } else if (tag == "f") {
      std::vector<int> corners;
      std::string token;
      while (ls >> token)
        corners.push_back(
            parse_face_corner(token, mesh.vertex_count(), path));
      if (corners.size() < 3)
        throw io_error(path + ": face with fewer than 3 corners: " + line);
      for (size_t k = 2; k < corners.size(); ++k)
        mesh.faces.push_back({corners[0], corners[k - 1], corners[k]});
    }
    // vn / vt / usemtl / o / g / s are ignored.
  }
  validate_mesh(mesh);
  return mesh;
}

void write_obj(const std::string& path, const Mesh& mesh) {
  std::ofstream out(path);
  if (!out) throw io_error("cannot write OBJ file: " + path);
  char buf[128];
  for (const Vec3& v : mesh.vertices) {
    std::snprintf(buf, sizeof(buf), "v %.17g %.17g %.17g\n", v.x(), v.y(),
                  v.z());
    out << buf;
  }
  for (const Face& f : mesh.faces)
    out << "f " << f[0] + 1 << ' ' << f[1] + 1 << ' ' << f[2] + 1 << '\n';
  if (!out) throw io_error("failed while writing: " + path);
}

}  // namespace smal
