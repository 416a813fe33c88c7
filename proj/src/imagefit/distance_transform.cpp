#include "smal/imagefit/distance_transform.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace smal {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// 1D squared-distance transform (lower envelope of parabolas).
void edt_1d(const std::vector<double>& f, std::vector<double>& d, int n,
            std::vector<int>& v, std::vector<double>& z) {
  int k = 0;
  v[0] = 0;
  z[0] = -kInf;
  z[1] = kInf;
  for (int q = 1; q < n; ++q) {
    if (f[q] == kInf) continue;
    if (f[v[0]] == kInf) {
      k = 0;
      v[0] = q;
      z[0] = -kInf;
      z[1] = kInf;
      continue;
    }
    double s = ((f[q] + q * q) - (f[v[k]] + v[k] * v[k])) / (2.0 * q - 2.0 * v[k]);
    while (s <= z[k]) {
      --k;
      s = ((f[q] + q * q) - (f[v[k]] + v[k] * v[k])) / (2.0 * q - 2.0 * v[k]);
    }
    ++k;
    v[k] = q;
    z[k] = s;
    z[k + 1] = kInf;
  }
  k = 0;
  for (int q = 0; q < n; ++q) {
    if (f[v[0]] == kInf) {
      d[q] = kInf;
      continue;
    }
    while (z[k + 1] < q) ++k;
    const double dq = q - v[k];
    d[q] = dq * dq + f[v[k]];
  }
}

}  // namespace

std::vector<double> distance_transform(const BinaryMask& mask) {
  if (mask.empty()) throw validation_error("distance transform of empty mask");
  const int w = mask.width, h = mask.height;
  std::vector<double> field(static_cast<size_t>(w) * h);
  for (size_t i = 0; i < field.size(); ++i)
    field[i] = mask.inside[i] ? 0.0 : kInf;

  const int maxdim = std::max(w, h);
  std::vector<double> scratch_f(maxdim), scratch_d(maxdim), z(maxdim + 1);
  std::vector<int> v(maxdim);

  // Columns, then rows.
  for (int x = 0; x < w; ++x) {
    for (int y = 0; y < h; ++y) scratch_f[y] = field[y * w + x];
    edt_1d(scratch_f, scratch_d, h, v, z);
    for (int y = 0; y < h; ++y) field[y * w + x] = scratch_d[y];
  }
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) scratch_f[x] = field[y * w + x];
    edt_1d(scratch_f, scratch_d, w, v, z);
    for (int x = 0; x < w; ++x) field[y * w + x] = scratch_d[x];
  }
  for (double& d : field) d = std::sqrt(d);
  return field;
}

double sample_field(const std::vector<double>& field, int width, int height,
                    const Vec2& p, Vec2* gradient) {
  // Field values live at pixel centers (x+0.5, y+0.5).
  const Vec2 clamped(
      std::clamp(p.x(), 0.5, width - 0.5),
      std::clamp(p.y(), 0.5, height - 0.5));
  const double gx = clamped.x() - 0.5, gy = clamped.y() - 0.5;
  const int x0 = std::min(static_cast<int>(gx), width - 2 >= 0 ? width - 2 : 0);
  const int y0 = std::min(static_cast<int>(gy), height - 2 >= 0 ? height - 2 : 0);
  const int x1 = std::min(x0 + 1, width - 1);
  const int y1 = std::min(y0 + 1, height - 1);
  const double tx = gx - x0, ty = gy - y0;
  const double f00 = field[y0 * width + x0], f10 = field[y0 * width + x1];
  const double f01 = field[y1 * width + x0], f11 = field[y1 * width + x1];
  const double top = f00 + tx * (f10 - f00);
  const double bot = f01 + tx * (f11 - f01);
  double value = top + ty * (bot - top);
  Vec2 grad(
      (1 - ty) * (f10 - f00) + ty * (f11 - f01),
      bot - top);

  // Outside the valid area the value keeps growing with the clamp distance.
  const Vec2 off = p - clamped;
  const double off_norm = off.norm();
  if (off_norm > 0) {
    value += off_norm;
    grad = grad.cwiseProduct(Vec2(p.x() == clamped.x() ? 1.0 : 0.0,
                                  p.y() == clamped.y() ? 1.0 : 0.0));
    grad += off / off_norm;
  }
  if (gradient) *gradient = grad;
  return value;
}

}  // namespace smal
