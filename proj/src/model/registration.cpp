#include "smal/model/registration.hpp"

#include "smal/geometry/rotations.hpp"

namespace smal {

std::vector<Affine> gloss_part_transforms(const GlossTemplate& tmpl,
                                          const GlossParams& params) {
  std::vector<Affine> out(tmpl.part_count());
  for (int i = 0; i < tmpl.part_count(); ++i) {
    out[i].rot = rodrigues_to_matrix(params.parts[i].rotation);
    out[i].trans = params.parts[i].location -
                   out[i].rot * tmpl.parts[i].neutral_location;
  }
  return out;
}

std::vector<Vec3> pose_normalize(const Registration& reg,
                                 const SkinningWeights& weights) {
  return invert_blended(reg.part_transforms, weights, reg.vertices);
}

std::vector<Vec3> symmetrize(const std::vector<Vec3>& vertices,
                             const MirrorCorrespondence& corr) {
  const std::vector<Vec3> mirrored = mirror_sagittal(vertices, corr);
  std::vector<Vec3> out(vertices.size());
  for (size_t i = 0; i < vertices.size(); ++i)
    out[i] = 0.5 * (vertices[i] + mirrored[i]);
  return out;
}

}  // namespace smal
