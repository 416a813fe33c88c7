#pragma once

#include <vector>

#include "smal/geometry/mesh.hpp"

namespace smal {

/// PCA space over neutral-pose vertex vectors.
struct ShapeSpace {
  VecX mean_shape;    // 3V
  MatX basis;         // 3V x n, orthonormal columns
  VecX eigenvalues;   // sample variances along each column, descending

  int component_count() const { return static_cast<int>(basis.cols()); }
  int vertex_count() const { return static_cast<int>(mean_shape.size()) / 3; }

  VecX reconstruct(const VecX& coefficients) const;
  VecX project(const VecX& flat_vertices) const;
};

VecX flatten_vertices(const std::vector<Vec3>& vertices);
std::vector<Vec3> unflatten_vertices(const VecX& flat);

/// PCA of the stacked samples; eigenvalues use the 1/(n-1) convention.
/// Throws when n_components exceeds min(3V, samples-1).
ShapeSpace build_shape_space(const std::vector<std::vector<Vec3>>& meshes,
                             int n_components);

}  // namespace smal
