#pragma once

#include <map>
#include <optional>
#include <string>

#include "smal/imagefit/raster.hpp"

namespace smal {

/// 2D keypoints (absent = unlabeled/invisible) plus a binary silhouette.
struct ImageObservation {
  int width = 0;
  int height = 0;
  std::map<std::string, std::optional<Vec2>> keypoints;
  BinaryMask silhouette;
  std::string image_path;

  int visible_count() const;
  void validate() const;
  ImageObservation level(int l) const;  // downsampled copy
};

/// Annotation JSON: {image, resolution: [w,h], keypoints: {name: [u,v]|null},
/// silhouette: mask path}. The mask path is resolved relative to the
/// annotation file.
ImageObservation read_annotation(const std::string& path);
void write_annotation(const std::string& path, const ImageObservation& obs,
                      const std::string& mask_relpath);

}  // namespace smal
