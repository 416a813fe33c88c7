#include "smal/geometry/spatial_grid.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace smal {

namespace {
constexpr int kBruteForceThreshold = 64;
}

PointGrid::PointGrid(const std::vector<Vec3>& points) : points_(points) {
  if (points_.empty()) throw validation_error("PointGrid over empty point set");
  if (points_.size() < kBruteForceThreshold) {
    brute_force_ = true;
    return;
  }
  Vec3 lo = points_.front(), hi = points_.front();
  for (const Vec3& p : points_) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  const Vec3 extent = (hi - lo).cwiseMax(1e-12);
  // Aim for a few points per cell.
  const double target_cells = std::max(1.0, points_.size() / 4.0);
  const double volume = extent.prod();
  cell_size_ = std::cbrt(volume / target_cells);
  cell_size_ = std::max(cell_size_, 1e-12);
  origin_ = lo;
  for (int a = 0; a < 3; ++a)
    dims_[a] = std::max(1, static_cast<int>(extent[a] / cell_size_) + 1);
  cells_.assign(static_cast<size_t>(dims_[0]) * dims_[1] * dims_[2], {});
  for (size_t i = 0; i < points_.size(); ++i) {
    const Vec3& p = points_[i];
    cells_[flat_index(cell_of(p, 0), cell_of(p, 1), cell_of(p, 2))]
        .push_back(static_cast<int>(i));
  }
}

int PointGrid::cell_of(const Vec3& p, int axis) const {
  int c = static_cast<int>((p[axis] - origin_[axis]) / cell_size_);
  return std::clamp(c, 0, dims_[axis] - 1);
}

int PointGrid::flat_index(int ix, int iy, int iz) const {
  return (ix * dims_[1] + iy) * dims_[2] + iz;
}

int PointGrid::nearest(const Vec3& q) const {
  if (brute_force_) {
    int best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (size_t i = 0; i < points_.size(); ++i) {
      const double d = (points_[i] - q).squaredNorm();
      if (d < best_d) {
        best_d = d;
        best = static_cast<int>(i);
      }
    }
    return best;
  }
  const int cx = cell_of(q, 0), cy = cell_of(q, 1), cz = cell_of(q, 2);
  int best = -1;
  double best_d = std::numeric_limits<double>::infinity();
  const int max_radius = std::max({dims_[0], dims_[1], dims_[2]});
  for (int radius = 0; radius <= max_radius; ++radius) {
    // Once a candidate exists, one extra shell guarantees exactness: any
    // closer point must lie within distance best and thus within the shells
    // already visited plus one.
    if (best >= 0) {
      const double safe = (radius - 1) * cell_size_;
      if (safe * safe > best_d) break;
    }
    const int x0 = std::max(0, cx - radius), x1 = std::min(dims_[0] - 1, cx + radius);
    const int y0 = std::max(0, cy - radius), y1 = std::min(dims_[1] - 1, cy + radius);
    const int z0 = std::max(0, cz - radius), z1 = std::min(dims_[2] - 1, cz + radius);
    for (int ix = x0; ix <= x1; ++ix) {
      for (int iy = y0; iy <= y1; ++iy) {
        for (int iz = z0; iz <= z1; ++iz) {
          const bool on_shell = ix == x0 || ix == x1 || iy == y0 || iy == y1 ||
                                iz == z0 || iz == z1;
          if (radius > 0 && !on_shell) continue;
          for (int i : cells_[flat_index(ix, iy, iz)]) {
            const double d = (points_[i] - q).squaredNorm();
            if (d < best_d) {
              best_d = d;
              best = i;
            }
          }
        }
      }
    }
  }
  return best;
}

std::vector<int> PointGrid::nearest_many(const std::vector<Vec3>& queries) const {
  std::vector<int> out(queries.size());
  for (size_t i = 0; i < queries.size(); ++i) out[i] = nearest(queries[i]);
  return out;
}

}  // namespace smal
