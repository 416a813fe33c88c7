#include "smal/geometry/lbs.hpp"

#include "smal/geometry/rotations.hpp"

namespace smal {

JointTransforms forward_kinematics(const KinematicTree& tree,
                                   const VecX& theta, const Vec3& gamma) {
  const int n = tree.joint_count();
  if (theta.size() != 3 * n)
    throw validation_error("theta length " + std::to_string(theta.size()) +
                           " does not match 3 x " + std::to_string(n) +
                           " joints");
  JointTransforms jt;
  jt.rot.resize(n);
  jt.pos.resize(n);
  for (int j : tree.topological_order()) {
    const Mat3 local = rodrigues_to_matrix(theta.segment<3>(3 * j));
    const int p = tree.parent[j];
    if (p < 0) {
      jt.rot[j] = local;
      jt.pos[j] = tree.joint_positions[j] + gamma;
    } else {
      jt.rot[j] = jt.rot[p] * local;
      jt.pos[j] =
          jt.rot[p] * (tree.joint_positions[j] - tree.joint_positions[p]) +
          jt.pos[p];
    }
  }
  return jt;
}

std::vector<Affine> part_transforms(const KinematicTree& tree,
                                    const JointTransforms& jt) {
  std::vector<Affine> out(tree.joint_count());
  for (int k = 0; k < tree.joint_count(); ++k) {
    out[k].rot = jt.rot[k];
    out[k].trans = jt.pos[k] - jt.rot[k] * tree.joint_positions[k];
  }
  return out;
}

std::vector<Vec3> apply_blended(const std::vector<Affine>& transforms,
                                const SkinningWeights& weights,
                                const std::vector<Vec3>& verts) {
  if (weights.vertex_count() != static_cast<int>(verts.size()))
    throw validation_error("skinning weight rows do not match vertex count");
  std::vector<Vec3> out(verts.size());
  for (size_t v = 0; v < verts.size(); ++v) {
    Vec3 p = Vec3::Zero();
    for (const auto& [k, w] : weights.rows[v]) p += w * transforms[k](verts[v]);
    out[v] = p;
  }
  return out;
}

std::vector<Vec3> invert_blended(const std::vector<Affine>& transforms,
                                 const SkinningWeights& weights,
                                 const std::vector<Vec3>& posed) {
  if (weights.vertex_count() != static_cast<int>(posed.size()))
    throw validation_error("skinning weight rows do not match vertex count");
  std::vector<Vec3> out(posed.size());
  for (size_t v = 0; v < posed.size(); ++v) {
    Mat3 a = Mat3::Zero();
    Vec3 t = Vec3::Zero();
    for (const auto& [k, w] : weights.rows[v]) {
      a += w * transforms[k].rot;
      t += w * transforms[k].trans;
    }
    const double det = a.determinant();
    if (std::abs(det) < 1e-12)
      throw solver_error("blended transform singular at vertex " +
                         std::to_string(v));
    out[v] = a.inverse() * (posed[v] - t);
  }
  return out;
}

Mesh lbs_pose(const Mesh& tmpl, const KinematicTree& tree,
              const SkinningWeights& weights, const VecX& theta,
              const Vec3& gamma) {
  const JointTransforms jt = forward_kinematics(tree, theta, gamma);
  Mesh out = tmpl;
  out.vertices =
      apply_blended(part_transforms(tree, jt), weights, tmpl.vertices);
  return out;
}

LbsGradients lbs_pullback(const KinematicTree& tree, const VecX& theta,
                          const SkinningWeights& weights,
                          const std::vector<Vec3>& neutral_verts,
                          const std::vector<Vec3>& posed_grads) {
  const int n = tree.joint_count();
  const JointTransforms jt = forward_kinematics(tree, theta, Vec3::Zero());

  LbsGradients out;
  out.theta = VecX::Zero(3 * n);
  out.neutral.assign(neutral_verts.size(), Vec3::Zero());
  out.joints.assign(n, Vec3::Zero());

  // Per-joint adjoints of the accumulated transforms.
  std::vector<Mat3> rot_bar(n, Mat3::Zero());
  std::vector<Vec3> pos_bar(n, Vec3::Zero());
  for (size_t v = 0; v < neutral_verts.size(); ++v) {
    const Vec3& vb = posed_grads[v];
    if (vb.isZero()) continue;
    for (const auto& [k, w] : weights.rows[v]) {
      const Vec3 centered = neutral_verts[v] - tree.joint_positions[k];
      rot_bar[k] += (w * vb) * centered.transpose();
      pos_bar[k] += w * vb;
      const Vec3 back = w * (jt.rot[k].transpose() * vb);
      out.neutral[v] += back;
      out.joints[k] -= back;
    }
  }

  const std::vector<int> order = tree.topological_order();
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    const int j = *it;
    const Mat3 jr = so3_right_jacobian(theta.segment<3>(3 * j));
    for (int c = 0; c < 3; ++c)
      out.theta[3 * j + c] =
          rot_bar[j].cwiseProduct(jt.rot[j] * skew(jr.col(c))).sum();
    const int p = tree.parent[j];
    if (p < 0) {
      out.gamma += pos_bar[j];
      out.joints[j] += pos_bar[j];
      continue;
    }
    const Vec3 delta = tree.joint_positions[j] - tree.joint_positions[p];
    const Mat3 local = rodrigues_to_matrix(theta.segment<3>(3 * j));
    rot_bar[p] += rot_bar[j] * local.transpose() + pos_bar[j] * delta.transpose();
    pos_bar[p] += pos_bar[j];
    const Vec3 delta_bar = jt.rot[p].transpose() * pos_bar[j];
    out.joints[j] += delta_bar;
    out.joints[p] -= delta_bar;
  }
  return out;
}

}  // namespace smal
