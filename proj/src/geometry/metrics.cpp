#include "smal/geometry/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace smal {

Vec3 closest_point_on_triangle(const Vec3& p, const Vec3& a, const Vec3& b,
                               const Vec3& c) {
  // Ericson, Real-Time Collision Detection, 5.1.5.
  const Vec3 ab = b - a, ac = c - a, ap = p - a;
  const double d1 = ab.dot(ap), d2 = ac.dot(ap);
  if (d1 <= 0.0 && d2 <= 0.0) return a;

  const Vec3 bp = p - b;
  const double d3 = ab.dot(bp), d4 = ac.dot(bp);
  if (d3 >= 0.0 && d4 <= d3) return b;

  const double vc = d1 * d4 - d3 * d2;
  if (vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0) return a + (d1 / (d1 - d3)) * ab;

  const Vec3 cp = p - c;
  const double d5 = ab.dot(cp), d6 = ac.dot(cp);
  if (d6 >= 0.0 && d5 <= d6) return c;

  const double vb = d5 * d2 - d1 * d6;
  if (vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0) return a + (d2 / (d2 - d6)) * ac;

  const double va = d3 * d6 - d5 * d4;
  if (va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0)
    return b + ((d4 - d3) / ((d4 - d3) + (d5 - d6))) * (c - b);

  const double denom = 1.0 / (va + vb + vc);
  return a + ab * (vb * denom) + ac * (vc * denom);
}

int TriangleGrid::flat_index(int ix, int iy, int iz) const {
  return (ix * dims_[1] + iy) * dims_[2] + iz;
}

int TriangleGrid::cell_of(double x, int axis) const {
  int c = static_cast<int>((x - origin_[axis]) / cell_size_);
  return std::clamp(c, 0, dims_[axis] - 1);
}

TriangleGrid::TriangleGrid(const Mesh& mesh) : mesh_(mesh) {
  if (mesh_.faces.empty())
    throw validation_error("TriangleGrid over empty mesh");
  Vec3 lo = mesh_.vertices.front(), hi = mesh_.vertices.front();
  for (const Vec3& p : mesh_.vertices) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  const Vec3 extent = (hi - lo).cwiseMax(1e-12);
  const double target_cells = std::max(1.0, mesh_.faces.size() / 2.0);
  cell_size_ = std::max(std::cbrt(extent.prod() / target_cells), 1e-12);
  origin_ = lo;
  for (int a = 0; a < 3; ++a)
    dims_[a] = std::max(1, static_cast<int>(extent[a] / cell_size_) + 1);
  cells_.assign(static_cast<size_t>(dims_[0]) * dims_[1] * dims_[2], {});
  for (size_t t = 0; t < mesh_.faces.size(); ++t) {
    const Face& f = mesh_.faces[t];
    Vec3 flo = mesh_.vertices[f[0]], fhi = flo;
    for (int k = 1; k < 3; ++k) {
      flo = flo.cwiseMin(mesh_.vertices[f[k]]);
      fhi = fhi.cwiseMax(mesh_.vertices[f[k]]);
    }
    for (int ix = cell_of(flo.x(), 0); ix <= cell_of(fhi.x(), 0); ++ix)
      for (int iy = cell_of(flo.y(), 1); iy <= cell_of(fhi.y(), 1); ++iy)
        for (int iz = cell_of(flo.z(), 2); iz <= cell_of(fhi.z(), 2); ++iz)
          cells_[flat_index(ix, iy, iz)].push_back(static_cast<int>(t));
  }
}

double TriangleGrid::distance(const Vec3& q) const {
  const int cx = cell_of(q.x(), 0), cy = cell_of(q.y(), 1),
            cz = cell_of(q.z(), 2);
  double best = std::numeric_limits<double>::infinity();
  const int max_radius = std::max({dims_[0], dims_[1], dims_[2]});
  for (int radius = 0; radius <= max_radius; ++radius) {
    if (std::isfinite(best)) {
      const double safe = (radius - 1) * cell_size_;
      if (safe > 0 && safe * safe > best) break;
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
          for (int t : cells_[flat_index(ix, iy, iz)]) {
            const Face& f = mesh_.faces[t];
            const Vec3 cp = closest_point_on_triangle(
                q, mesh_.vertices[f[0]], mesh_.vertices[f[1]],
                mesh_.vertices[f[2]]);
            best = std::min(best, (cp - q).squaredNorm());
          }
        }
      }
    }
  }
  return std::sqrt(best);
}

double scan_to_mesh_distance(const std::vector<Vec3>& scan_points,
                             const Mesh& mesh) {
  if (scan_points.empty())
    throw validation_error("scan-to-mesh distance of empty scan");
  TriangleGrid grid(mesh);
  double sum = 0.0;
  for (const Vec3& p : scan_points) sum += grid.distance(p);
  return sum / static_cast<double>(scan_points.size());
}

}  // namespace smal
