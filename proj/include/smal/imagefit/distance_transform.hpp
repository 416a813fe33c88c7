#pragma once

#include "smal/imagefit/raster.hpp"

namespace smal {

/// Exact Euclidean distance (in pixels, between pixel centers) to the
/// nearest inside pixel; zero on inside pixels. Throws on an empty mask.
std::vector<double> distance_transform(const BinaryMask& mask);

/// Bilinear interpolation of a pixel-center field at a continuous point,
/// with the value extended by the clamp distance outside the image. Also
/// returns the spatial gradient.
double sample_field(const std::vector<double>& field, int width, int height,
                    const Vec2& p, Vec2* gradient);

}  // namespace smal
