#pragma once

#include <vector>

#include "smal/geometry/mesh.hpp"
#include "smal/geometry/rig.hpp"

namespace smal {

/// Joint transforms composed along the kinematic tree. theta holds one
/// Rodrigues vector per joint (relative rotation); gamma shifts the root.
struct JointTransforms {
  std::vector<Mat3> rot;  // accumulated rotation per joint
  std::vector<Vec3> pos;  // accumulated joint position
};

JointTransforms forward_kinematics(const KinematicTree& tree,
                                   const VecX& theta, const Vec3& gamma);

/// Per-joint affine mapping a neutral-space point to posed space:
/// x -> G_k (x - j_k) + g_k.
std::vector<Affine> part_transforms(const KinematicTree& tree,
                                    const JointTransforms& jt);

std::vector<Vec3> apply_blended(const std::vector<Affine>& transforms,
                                const SkinningWeights& weights,
                                const std::vector<Vec3>& verts);

/// Inverse of apply_blended: undoes each vertex's blended affine. Throws
/// (naming the vertex) when a blended transform is numerically singular.
std::vector<Vec3> invert_blended(const std::vector<Affine>& transforms,
                                 const SkinningWeights& weights,
                                 const std::vector<Vec3>& posed);

/// Pose the template by theta (length 3N) and root translation gamma.
Mesh lbs_pose(const Mesh& tmpl, const KinematicTree& tree,
              const SkinningWeights& weights, const VecX& theta,
              const Vec3& gamma);

/// Reverse-mode derivatives through LBS. Given dE/d(posed vertex) for every
/// vertex, produces dE/dtheta, dE/dgamma, the direct dE/d(neutral vertex)
/// path, and dE/d(joint position).
struct LbsGradients {
  VecX theta;
  Vec3 gamma = Vec3::Zero();
  std::vector<Vec3> neutral;
  std::vector<Vec3> joints;
};

LbsGradients lbs_pullback(const KinematicTree& tree, const VecX& theta,
                          const SkinningWeights& weights,
                          const std::vector<Vec3>& neutral_verts,
                          const std::vector<Vec3>& posed_grads);

}  // namespace smal
