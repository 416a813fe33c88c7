#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "smal/gloss/params.hpp"
#include "smal/imagefit/observation.hpp"

namespace smal {

/// Coarse part roles used for pose limits, priors, and the pose sampler.
enum class PartCategory { Torso, Neck, Head, Jaw, Ear, Eye, LegUpper, LegLower, Paw, Tail };

PartCategory part_category(const std::string& part_name);

/// Per-axis rotation bounds for a joint of the given category (radians).
/// The root joint is unbounded and handled by callers.
Vec3 category_rotation_bound(PartCategory cat);

/// Shape-recipe means per animal family. Values are coefficients fed through
/// the analytic per-part shape basis, so every generated animal is exactly
/// representable by the part model.
struct FamilyRecipe {
  std::string name = "generic";
  double body_scale = 0.0;
  double torso_length = 0.0;
  double torso_width = 0.0;
  double leg_length = 0.0;
  double leg_width = 0.0;
  double neck_length = 0.0;
  double head_scale = 0.0;
  double tail_length = 0.0;
  double jitter = 0.05;  // sampling spread around the means
};

/// Named recipes: feline, canine, equine, bovine, hippo, generic.
FamilyRecipe family_recipe(const std::string& name);
std::vector<std::string> family_names();

struct SynthSpec {
  uint64_t seed = 0;
  double resolution = 1.0;
  FamilyRecipe recipe;
  double pose_scale = 1.0;
  double noise_level = 0.01;  // fraction of the bbox diagonal
  // Smooth surface detail outside the part model's shape space, as a
  // fraction of the noise sigma. Sized so the generating parameters stay
  // within noise level of the scan.
  double detail_scale = 0.7;
  bool remesh = true;
  int max_retries = 10;
};

/// Builds the canonical 33-part quadruped template: part meshes, interfaces,
/// rig, keypoints, mirror pairing, and the analytic + learned deformation
/// bases. Deterministic for a fixed resolution.
GlossTemplate make_template(double resolution = 1.0);

/// Scripted LBS pose sequences on the template (walk, tail swish, head turn,
/// jaw open). Used to learn the pose-deformation basis and the priors.
std::vector<VecX> scripted_animation_thetas(const GlossTemplate& tmpl);
std::vector<VecX> scripted_walk_thetas(const GlossTemplate& tmpl);

struct SynthAnimal {
  std::string id;
  Mesh scan;
  std::map<std::string, Vec3> scan_keypoints;
  GlossParams true_params;      // stitched-assembly parameters
  VecX true_theta;              // joint rotations used for posing
  Mesh template_pose_mesh;      // merged mesh before noise/remesh
  FamilyRecipe recipe_used;     // with jitter applied
};

/// Draws one ground-truth animal: recipe-shaped parts posed by sampled joint
/// rotations, stitched, noised, and optionally remeshed. Self-intersecting
/// poses are rejected and resampled up to spec.max_retries.
SynthAnimal sample_animal(const GlossTemplate& tmpl, const SynthSpec& spec,
                          uint64_t seed);

/// True when any two triangles of unrelated parts (not the same part, not
/// parent/child) intersect.
bool has_self_intersections(const Mesh& mesh, const PartLabeling& labeling,
                            const KinematicTree& tree);

/// Projects the mapped keypoints (marking self-occluded or out-of-frame ones
/// invisible via the depth buffer) and rasterizes the silhouette.
ImageObservation render_annotation(
    const Mesh& mesh, const std::map<std::string, std::vector<int>>& keypoint_map,
    const Camera& camera);

}  // namespace smal
