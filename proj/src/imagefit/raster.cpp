#include "smal/imagefit/raster.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

namespace smal {

int BinaryMask::count() const {
  int n = 0;
  for (uint8_t v : inside) n += v != 0;
  return n;
}

double BinaryMask::iou(const BinaryMask& other) const {
  if (width != other.width || height != other.height)
    throw validation_error("IoU of differently sized masks");
  int inter = 0, uni = 0;
  for (size_t i = 0; i < inside.size(); ++i) {
    const bool a = inside[i] != 0, b = other.inside[i] != 0;
    inter += a && b;
    uni += a || b;
  }
  return uni == 0 ? 1.0 : static_cast<double>(inter) / uni;
}

BinaryMask BinaryMask::downsampled() const {
  BinaryMask out;
  out.width = std::max(1, width / 2);
  out.height = std::max(1, height / 2);
  out.inside.assign(static_cast<size_t>(out.width) * out.height, 0);
  for (int y = 0; y < out.height; ++y) {
    for (int x = 0; x < out.width; ++x) {
      bool any = false;
      for (int dy = 0; dy < 2 && !any; ++dy)
        for (int dx = 0; dx < 2 && !any; ++dx) {
          const int sx = 2 * x + dx, sy = 2 * y + dy;
          if (sx < width && sy < height) any = at(sx, sy);
        }
      out.inside[y * out.width + x] = any ? 1 : 0;
    }
  }
  return out;
}

RasterResult render_silhouette(const std::vector<Vec3>& vertices,
                               const std::vector<Face>& faces,
                               const Camera& camera) {
  camera.validate();
  RasterResult out;
  out.mask.width = camera.width;
  out.mask.height = camera.height;
  out.mask.inside.assign(static_cast<size_t>(camera.width) * camera.height, 0);
  out.depth.assign(out.mask.inside.size(),
                   std::numeric_limits<double>::infinity());

  std::vector<Vec2> projected(vertices.size());
  std::vector<double> inv_z(vertices.size());
  for (size_t v = 0; v < vertices.size(); ++v) {
    if (vertices[v].z() <= 1e-9)
      throw validation_error("vertex " + std::to_string(v) +
                             " is behind the camera");
    projected[v] = project(vertices[v], camera);
    inv_z[v] = 1.0 / vertices[v].z();
  }

  for (const Face& f : faces) {
    const Vec2 a = projected[f[0]], b = projected[f[1]], c = projected[f[2]];
    const double area = (b - a).x() * (c - a).y() - (b - a).y() * (c - a).x();
    if (std::abs(area) < 1e-12) continue;
    const int x0 = std::max(0, static_cast<int>(std::floor(
                                   std::min({a.x(), b.x(), c.x()}) - 0.5)));
    const int x1 = std::min(camera.width - 1,
                            static_cast<int>(std::ceil(
                                std::max({a.x(), b.x(), c.x()}) - 0.5)));
    const int y0 = std::max(0, static_cast<int>(std::floor(
                                   std::min({a.y(), b.y(), c.y()}) - 0.5)));
    const int y1 = std::min(camera.height - 1,
                            static_cast<int>(std::ceil(
                                std::max({a.y(), b.y(), c.y()}) - 0.5)));
    for (int y = y0; y <= y1; ++y) {
      for (int x = x0; x <= x1; ++x) {
        const Vec2 p(x + 0.5, y + 0.5);
        // Barycentric coordinates (sign handled by the area denominator).
        const double w0 = ((b - p).x() * (c - p).y() - (b - p).y() * (c - p).x()) / area;
        const double w1 = ((c - p).x() * (a - p).y() - (c - p).y() * (a - p).x()) / area;
        const double w2 = 1.0 - w0 - w1;
        if (w0 < 0 || w1 < 0 || w2 < 0) continue;
        const size_t idx = static_cast<size_t>(y) * camera.width + x;
        out.mask.inside[idx] = 1;
        // Perspective-correct depth via linear 1/z.
        const double z =
            1.0 / (w0 * inv_z[f[0]] + w1 * inv_z[f[1]] + w2 * inv_z[f[2]]);
        if (z < out.depth[idx]) out.depth[idx] = z;
      }
    }
  }
  if (out.mask.empty())
    throw validation_error("mesh projects to an empty silhouette");
  return out;
}

void write_pgm(const std::string& path, const BinaryMask& mask) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw io_error("cannot write mask: " + path);
  out << "P5\n" << mask.width << " " << mask.height << "\n255\n";
  std::vector<uint8_t> bytes(mask.inside.size());
  for (size_t i = 0; i < bytes.size(); ++i)
    bytes[i] = mask.inside[i] ? 255 : 0;
  out.write(reinterpret_cast<const char*>(bytes.data()), bytes.size());
  if (!out) throw io_error("failed while writing mask: " + path);
}

BinaryMask read_pgm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error("cannot open mask: " + path);
  std::string magic;
  in >> magic;
  if (magic != "P5" && magic != "P2")
    throw io_error(path + ": unsupported mask format '" + magic +
                   "' (PGM P5/P2 expected)");
  auto next_token = [&]() {
    std::string tok;
    while (in >> tok) {
      if (tok[0] == '#') {
        std::string rest;
        std::getline(in, rest);
        continue;
      }
      return tok;
    }
    throw io_error(path + ": truncated PGM header");
  };
  BinaryMask mask;
  mask.width = std::stoi(next_token());
  mask.height = std::stoi(next_token());
  const int maxval = std::stoi(next_token());
  if (mask.width <= 0 || mask.height <= 0 || maxval <= 0 || maxval > 255)
    throw io_error(path + ": bad PGM header");
  const size_t n = static_cast<size_t>(mask.width) * mask.height;
  mask.inside.resize(n);
  if (magic == "P5") {
    in.get();  // single whitespace after maxval
    std::vector<uint8_t> bytes(n);
    in.read(reinterpret_cast<char*>(bytes.data()), n);
    if (!in) throw io_error(path + ": truncated PGM payload");
    for (size_t i = 0; i < n; ++i)
      mask.inside[i] = bytes[i] > maxval / 2 ? 1 : 0;
  } else {
    for (size_t i = 0; i < n; ++i) {
      int v;
      if (!(in >> v)) throw io_error(path + ": truncated PGM payload");
      mask.inside[i] = v > maxval / 2 ? 1 : 0;
    }
  }
  return mask;
}

}  // namespace smal
