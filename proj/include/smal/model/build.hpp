#pragma once

#include "smal/model/registration.hpp"
#include "smal/model/smal_model.hpp"
#include "smal/synth/synth.hpp"

namespace smal {

/// Everything except the learned pieces: rig, limits, keypoints, mirror.
SmalModel model_skeleton_from_template(const GlossTemplate& tmpl);

/// Reflects a pose across the sagittal plane: left/right joints swap and
/// their Rodrigues vectors transform as (x, -y, -z).
VecX mirror_theta(const GlossTemplate& tmpl, const VecX& theta);

/// Gaussian over poses from the given samples plus their mirrored copies,
/// diagonally loaded; the root rotation is left unbounded.
GaussianPrior build_pose_prior(const GlossTemplate& tmpl,
                               const std::vector<VecX>& thetas,
                               double diagonal_load = 1e-4);

/// Hand-authored per-category joint bounds; the root is unbounded.
void joint_limits_for(const GlossTemplate& tmpl, VecX& lower, VecX& upper);

/// One shape sample: pose-normalize, symmetrize, and smooth a registration.
std::vector<Vec3> neutral_shape_sample(const GlossTemplate& tmpl,
                                       const Registration& reg);

/// Learns the PCA shape space over the registrations' shape samples
/// (min(component_cap, samples-1) components). The pose prior uses the
/// scripted walk cycle plus `recovered_poses`.
SmalModel build_smal_model(const GlossTemplate& tmpl,
                           const std::vector<Registration>& registrations,
                           int component_cap,
                           const std::vector<VecX>& recovered_poses);

/// Per-family Gaussians over shape coefficients; covariances are diagonally
/// loaded when a family has no more samples than dimensions.
std::map<std::string, GaussianPrior> fit_family_priors(
    const std::map<std::string, std::vector<VecX>>& coefficients_by_family,
    double lambda_reg);

}  // namespace smal
