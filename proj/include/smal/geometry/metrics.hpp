#pragma once

#include <vector>

#include "smal/geometry/mesh.hpp"

namespace smal {

/// Closest point on triangle abc to p.
Vec3 closest_point_on_triangle(const Vec3& p, const Vec3& a, const Vec3& b,
                               const Vec3& c);

/// Exact point-to-surface distances via a triangle AABB grid.
class TriangleGrid {
 public:
  explicit TriangleGrid(const Mesh& mesh);
  double distance(const Vec3& q) const;

 private:
  const Mesh mesh_;
  Vec3 origin_;
  double cell_size_ = 1.0;
  int dims_[3] = {1, 1, 1};
  std::vector<std::vector<int>> cells_;
  int flat_index(int ix, int iy, int iz) const;
  int cell_of(double x, int axis) const;
};

/// Mean distance from scan vertices to the surface of `mesh`.
double scan_to_mesh_distance(const std::vector<Vec3>& scan_points,
                             const Mesh& mesh);

}  // namespace smal
