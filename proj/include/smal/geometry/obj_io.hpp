#pragma once

#include <string>

#include "smal/geometry/mesh.hpp"

namespace smal {

/// Reads vertices and triangular faces from a Wavefront OBJ file.
/// Normals/texcoords in `f` entries are accepted and discarded; polygons with
/// more than three corners are fan-triangulated.
Mesh read_obj(const std::string& path);

void write_obj(const std::string& path, const Mesh& mesh);

}  // namespace smal
