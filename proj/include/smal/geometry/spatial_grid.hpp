#pragma once

#include <vector>

#include "smal/common.hpp"

namespace smal {

/// Uniform hash grid over a fixed point set for nearest-neighbor queries.
/// Queries are exact (expanding shell search with a conservative cutoff).
class PointGrid {
 public:
  explicit PointGrid(const std::vector<Vec3>& points);

  /// Index of the nearest point to q. The point set must be nonempty.
  int nearest(const Vec3& q) const;

  /// Nearest neighbor for every query point.
  std::vector<int> nearest_many(const std::vector<Vec3>& queries) const;

  int size() const { return static_cast<int>(points_.size()); }
  const std::vector<Vec3>& points() const { return points_; }

 private:
  int cell_of(const Vec3& p, int axis) const;
  int flat_index(int ix, int iy, int iz) const;

  std::vector<Vec3> points_;
  Vec3 origin_;
  double cell_size_ = 1.0;
  int dims_[3] = {1, 1, 1};
  std::vector<std::vector<int>> cells_;
  bool brute_force_ = false;
};

}  // namespace smal
