#include "smal/imagefit/observation.hpp"

#include <filesystem>
#include <fstream>

#include <json.hpp>

namespace smal {

int ImageObservation::visible_count() const {
  int n = 0;
  for (const auto& [name, p] : keypoints) n += p.has_value();
  return n;
}

void ImageObservation::validate() const {
  if (width <= 0 || height <= 0)
    throw validation_error("observation resolution missing");
  if (silhouette.width != width || silhouette.height != height)
    throw validation_error("silhouette does not match the stated resolution");
  if (silhouette.empty()) throw validation_error("empty silhouette mask");
  for (const auto& [name, p] : keypoints) {
    if (!p) continue;
    if (p->x() < 0 || p->x() > width || p->y() < 0 || p->y() > height)
      throw validation_error("visible keypoint '" + name +
                             "' lies outside the image");
  }
}

ImageObservation ImageObservation::level(int l) const {
  ImageObservation out = *this;
  for (int i = 0; i < l; ++i)
    out.silhouette = out.silhouette.downsampled();
  out.width = out.silhouette.width;
  out.height = out.silhouette.height;
  const double s = 1.0 / (1 << l);
  for (auto& [name, p] : out.keypoints)
    if (p) *p *= s;
  return out;
}

ImageObservation read_annotation(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot open annotation: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw io_error("annotation JSON parse error in " + path + ": " + e.what());
  }
  ImageObservation obs;
  obs.width = j.at("resolution").at(0).get<int>();
  obs.height = j.at("resolution").at(1).get<int>();
  if (j.contains("image")) obs.image_path = j.at("image").get<std::string>();
  for (const auto& [name, val] : j.at("keypoints").items()) {
    if (val.is_null()) {
      obs.keypoints[name] = std::nullopt;
    } else {
      obs.keypoints[name] =
          Vec2(val.at(0).get<double>(), val.at(1).get<double>());
    }
  }
  const std::string mask_rel = j.at("silhouette").get<std::string>();
  const auto mask_path =
      std::filesystem::path(path).parent_path() / mask_rel;
  obs.silhouette = read_pgm(mask_path.string());
  obs.validate();
  return obs;
}

void write_annotation(const std::string& path, const ImageObservation& obs,
                      const std::string& mask_relpath) {
  nlohmann::json j;
  j["resolution"] = {obs.width, obs.height};
  if (!obs.image_path.empty()) j["image"] = obs.image_path;
  nlohmann::json kps;
  for (const auto& [name, p] : obs.keypoints) {
    if (p)
      kps[name] = {p->x(), p->y()};
    else
      kps[name] = nullptr;
  }
  j["keypoints"] = std::move(kps);
  j["silhouette"] = mask_relpath;
  std::ofstream out(path);
  if (!out) throw io_error("cannot write annotation: " + path);
  out << j.dump(2) << '\n';
  const auto mask_path =
      std::filesystem::path(path).parent_path() / mask_relpath;
  write_pgm(mask_path.string(), obs.silhouette);
}

}  // namespace smal
