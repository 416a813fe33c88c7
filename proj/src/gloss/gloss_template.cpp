#include "smal/gloss/gloss_template.hpp"

#include <Eigen/SVD>

namespace smal {

std::vector<Vec3> GlossTemplate::regress_joints(
    const std::vector<Vec3>& merged_vertices) const {
  std::vector<Vec3> joints(part_count());
  for (int j = 0; j < part_count(); ++j) {
    Vec3 acc = Vec3::Zero();
    for (int v : joint_rings[j]) acc += merged_vertices[v];
    joints[j] = acc / static_cast<double>(joint_rings[j].size());
  }
  return joints;
}

void GlossTemplate::validate() const {
  const int n = part_count();
  if (n != tree.joint_count())
    throw validation_error("part count does not match kinematic tree");
  if (static_cast<int>(joint_rings.size()) != n)
    throw validation_error("joint ring list does not match part count");
  validate_mesh(merged_mesh);
  validate_labeling(labeling, merged_vertex_count());
  validate_weights(weights, n);

  // Interface edges must mirror the kinematic tree.
  std::vector<int> seen_parent(n, -1);
  for (const PartInterface& itf : interfaces) {
    int child, parent;
    if (tree.parent[itf.part_a] == itf.part_b) {
      child = itf.part_a;
      parent = itf.part_b;
    } else if (tree.parent[itf.part_b] == itf.part_a) {
      child = itf.part_b;
      parent = itf.part_a;
    } else {
      throw validation_error("interface edge is not a kinematic tree edge");
    }
    seen_parent[child] = parent;
    if (itf.pairs.empty()) throw validation_error("empty interface");
  }
  for (int j = 0; j < n; ++j)
    if (tree.parent[j] >= 0 && seen_parent[j] != tree.parent[j])
      throw validation_error("missing interface for part " + std::to_string(j));

  if (scan_keypoints.size() != 36)
    throw validation_error("expected 36 scan keypoints, got " +
                           std::to_string(scan_keypoints.size()));
  for (const auto& [name, ref] : scan_keypoints) {
    if (ref.part < 0 || ref.part >= n || ref.vertex < 0 ||
        ref.vertex >= parts[ref.part].vertex_count())
      throw validation_error("keypoint " + name + " out of range");
  }
  for (const auto& [name, verts] : image_keypoints)
    if (verts.empty() || verts.size() > 4)
      throw validation_error("image keypoint " + name +
                             " must reference 1..4 vertices");

  // Duplicated interface vertices must coincide in the neutral assembly.
  for (const PartInterface& itf : interfaces) {
    const PartMesh& a = parts[itf.part_a];
    const PartMesh& b = parts[itf.part_b];
    for (const auto& [va, vb] : itf.pairs) {
      const Vec3 pa = a.vertices[va] + a.neutral_location;
      const Vec3 pb = b.vertices[vb] + b.neutral_location;
      if ((pa - pb).norm() > 1e-9)
        throw validation_error("interface duplicates do not coincide between " +
                               a.name + " and " + b.name);
    }
  }
}

MatX build_shape_basis(const std::vector<Vec3>& part_template) {
  const int n = static_cast<int>(part_template.size());
  if (n < 4) throw validation_error("part needs at least 4 vertices");
  MatX basis = MatX::Zero(3 * n, 7);
  for (int v = 0; v < n; ++v) {
    const Vec3& p = part_template[v];
    // Column 0: uniform scale. Columns 1-3: per-axis scales.
    basis.block<3, 1>(3 * v, 0) = p;
    basis(3 * v + 0, 1) = p.x();
    basis(3 * v + 1, 2) = p.y();
    basis(3 * v + 2, 3) = p.z();
    // Columns 4-6: stretches. Stretch along an axis leaves that coordinate
    // alone and scales the other two in proportion to it.
    basis(3 * v + 1, 4) = p.x() * p.y();
    basis(3 * v + 2, 4) = p.x() * p.z();
    basis(3 * v + 0, 5) = p.y() * p.x();
    basis(3 * v + 2, 5) = p.y() * p.z();
    basis(3 * v + 0, 6) = p.z() * p.x();
    basis(3 * v + 1, 6) = p.z() * p.y();
  }
  return basis;
}

PosePartBasis build_pose_basis(const std::vector<VecX>& displacement_frames,
                               double variance_fraction, int max_components) {
  if (displacement_frames.size() < 2)
    throw validation_error("pose basis needs at least 2 frames");
  const int dim = static_cast<int>(displacement_frames.front().size());
  const int f = static_cast<int>(displacement_frames.size());

  PosePartBasis out;
  // The basis is computed about the part template itself (zero mean), so a
  // neutral parameter vector reproduces the template exactly and interface
  // duplicates stay coincident. The animation's mean displacement is instead
  // captured by the leading components.
  out.mean = VecX::Zero(dim);

  MatX data(f, dim);
  for (int i = 0; i < f; ++i) data.row(i) = displacement_frames[i].transpose();

  Eigen::JacobiSVD<MatX> svd(data, Eigen::ComputeThinV);
  const VecX singular = svd.singularValues();
  const double total = singular.squaredNorm();
  if (total < 1e-20) {
    out.basis = MatX::Zero(dim, 0);
    return out;
  }
  double kept = 0.0;
  int count = 0;
  for (int i = 0; i < singular.size() && count < max_components; ++i) {
    kept += singular[i] * singular[i];
    ++count;
    if (kept / total >= variance_fraction) break;
  }
  out.basis = svd.matrixV().leftCols(count);
  // Deterministic sign: largest-magnitude entry of each column positive.
  for (int c = 0; c < count; ++c) {
    int idx;
    out.basis.col(c).cwiseAbs().maxCoeff(&idx);
    if (out.basis(idx, c) < 0) out.basis.col(c) = -out.basis.col(c);
  }
  return out;
}

}  // namespace smal
