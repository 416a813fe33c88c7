#pragma once

#include <string>

#include "smal/geometry/lbs.hpp"
#include "smal/gloss/params.hpp"

namespace smal {

/// A template-topology mesh aligned to one target, with the per-part pose
/// estimate that pose normalization inverts.
struct Registration {
  std::string source_id;
  std::string stage;  // "gloss" | "arap" | "coupled"
  std::vector<Vec3> vertices;
  std::vector<Affine> part_transforms;
};

/// Rigid per-part transforms implied by a part-model state: neutral-space
/// point -> posed point.
std::vector<Affine> gloss_part_transforms(const GlossTemplate& tmpl,
                                          const GlossParams& params);

/// Undo each vertex's blended part transform, bringing the registration into
/// the neutral pose. Round trip with apply_blended is exact.
std::vector<Vec3> pose_normalize(const Registration& reg,
                                 const SkinningWeights& weights);

/// (v + mirror(v)) / 2; output is exactly mirror-symmetric.
std::vector<Vec3> symmetrize(const std::vector<Vec3>& vertices,
                             const MirrorCorrespondence& corr);

}  // namespace smal
