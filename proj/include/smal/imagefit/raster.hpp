#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "smal/geometry/mesh.hpp"
#include "smal/imagefit/camera.hpp"

namespace smal {

struct BinaryMask {
  int width = 0;
  int height = 0;
  std::vector<uint8_t> inside;  // row-major, 0/1

  bool at(int x, int y) const { return inside[y * width + x] != 0; }
  int count() const;
  bool empty() const { return count() == 0; }
  double iou(const BinaryMask& other) const;
  BinaryMask downsampled() const;  // half resolution, any-inside rule
};

struct RasterResult {
  BinaryMask mask;
  std::vector<double> depth;  // row-major, +inf where uncovered
};

/// Deterministic software rasterization of every triangle (no backface
/// culling); pixel centers inside a projected triangle are covered, with a
/// perspective-correct depth buffer. Throws if any vertex is behind the
/// camera or the projection misses the image entirely.
RasterResult render_silhouette(const std::vector<Vec3>& vertices,
                               const std::vector<Face>& faces,
                               const Camera& camera);

void write_pgm(const std::string& path, const BinaryMask& mask);
BinaryMask read_pgm(const std::string& path);

}  // namespace smal
