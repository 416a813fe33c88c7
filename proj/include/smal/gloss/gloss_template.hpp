#pragma once

#include <map>
#include <string>
#include <vector>

#include "smal/geometry/lbs.hpp"
#include "smal/geometry/mesh.hpp"
#include "smal/geometry/rig.hpp"

namespace smal {

/// One body part in its local frame (centroid of the neutral assembly at the
/// origin). merged_index maps each local vertex to the stitched global mesh.
struct PartMesh {
  std::string name;
  std::vector<Vec3> vertices;
  std::vector<Face> faces;
  Vec3 neutral_location = Vec3::Zero();
  std::vector<int> merged_index;

  int vertex_count() const { return static_cast<int>(vertices.size()); }
};

/// Vertex-to-vertex correspondences at the seam between two connected parts.
struct PartInterface {
  int part_a = -1;
  int part_b = -1;
  std::vector<std::array<int, 2>> pairs;  // (vertex in a, vertex in b)
};

struct PartVertexRef {
  int part = -1;
  int vertex = -1;
};

/// Per-part pose-deformation space learned from animation samples.
struct PosePartBasis {
  VecX mean;   // 3 n_i, displacement from the part template
  MatX basis;  // 3 n_i x n_d, orthonormal columns

  int component_count() const { return static_cast<int>(basis.cols()); }
};

/// The segmented, skinned, stitched quadruped template shared by the whole
/// pipeline. Parts carry their own local meshes; the merged mesh is the
/// deduplicated global topology.
struct GlossTemplate {
  std::vector<PartMesh> parts;
  std::vector<PartInterface> interfaces;       // tree edges
  std::map<std::string, PartVertexRef> scan_keypoints;  // 36 names
  std::vector<std::vector<int>> symmetry_groups;

  Mesh merged_mesh;
  PartLabeling labeling;      // on the merged mesh
  SkinningWeights weights;    // on the merged mesh
  KinematicTree tree;         // joint i belongs to part i
  std::vector<std::vector<int>> joint_rings;  // merged ids averaged per joint
  MirrorCorrespondence mirror;                // on the merged mesh
  std::map<std::string, int> scan_keypoint_vertices;          // merged ids
  std::map<std::string, std::vector<int>> image_keypoints;    // 1..4 merged ids

  std::vector<MatX> shape_basis;  // per part, 3 n_i x 7
  VecX shape_prior_variance;      // length 7
  std::vector<PosePartBasis> pose_basis;

  std::vector<int> tail_parts;
  std::vector<Vec3> tail_prior_variance;  // per tail part, per axis

  int part_count() const { return static_cast<int>(parts.size()); }
  int merged_vertex_count() const { return merged_mesh.vertex_count(); }

  /// Joint positions by the interface-centroid rule for arbitrary merged
  /// vertex positions (used for shape-dependent joints).
  std::vector<Vec3> regress_joints(const std::vector<Vec3>& merged_vertices) const;

  void validate() const;
};

/// Analytic per-part shape space: uniform scale, per-axis scales, and three
/// stretch modes, all about the part's local origin.
MatX build_shape_basis(const std::vector<Vec3>& part_template);

/// PCA of per-part displacement samples (frames already in the part's local
/// frame). Keeps the smallest component count reaching variance_fraction,
/// capped at max_components.
PosePartBasis build_pose_basis(const std::vector<VecX>& displacement_frames,
                               double variance_fraction, int max_components);

}  // namespace smal
