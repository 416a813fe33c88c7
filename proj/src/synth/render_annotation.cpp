#include "smal/synth/synth.hpp"

namespace smal {

ImageObservation render_annotation(
    const Mesh& mesh, const std::map<std::string, std::vector<int>>& keypoint_map,
    const Camera& camera) {
  const RasterResult raster =
      render_silhouette(mesh.vertices, mesh.faces, camera);

  ImageObservation obs;
  obs.width = camera.width;
  obs.height = camera.height;
  obs.silhouette = raster.mask;

  const double occlusion_tol = 0.02 * bbox_diagonal(mesh);
  for (const auto& [name, verts] : keypoint_map) {
    Vec2 mean2 = Vec2::Zero();
    Vec3 mean3 = Vec3::Zero();
    for (int v : verts) {
      mean2 += project(mesh.vertices[v], camera);
      mean3 += mesh.vertices[v];
    }
    mean2 /= static_cast<double>(verts.size());
    mean3 /= static_cast<double>(verts.size());

    bool visible = mean2.x() >= 0 && mean2.x() <= camera.width &&
                   mean2.y() >= 0 && mean2.y() <= camera.height;
    if (visible) {
      const int px = std::clamp(static_cast<int>(mean2.x()), 0, camera.width - 1);
      const int py = std::clamp(static_cast<int>(mean2.y()), 0, camera.height - 1);
      const double zbuf = raster.depth[static_cast<size_t>(py) * camera.width + px];
      visible = mean3.z() <= zbuf + occlusion_tol;
    }
    obs.keypoints[name] = visible ? std::optional<Vec2>(mean2) : std::nullopt;
  }
  obs.validate();
  return obs;
}

}  // namespace smal
