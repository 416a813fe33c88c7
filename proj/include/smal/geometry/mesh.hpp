#pragma once

#include <array>
#include <vector>

#include "smal/common.hpp"

namespace smal {

using Face = std::array<int, 3>;

/// Triangle mesh with positions and faces. Operations on it are free
/// functions; the struct itself is a plain value.
struct Mesh {
  std::vector<Vec3> vertices;
  std::vector<Face> faces;

  int vertex_count() const { return static_cast<int>(vertices.size()); }
  int face_count() const { return static_cast<int>(faces.size()); }
};

/// Throws if a face references a missing vertex or repeats an index.
void validate_mesh(const Mesh& mesh);

/// Axis-aligned bounding box diagonal length.
double bbox_diagonal(const Mesh& mesh);
double bbox_diagonal(const std::vector<Vec3>& points);

Vec3 vertex_median(const std::vector<Vec3>& points);

/// Unique undirected edges (i < j).
std::vector<std::array<int, 2>> mesh_edges(const Mesh& mesh);

/// 1-ring vertex neighborhoods.
std::vector<std::vector<int>> vertex_adjacency(const Mesh& mesh);

/// Area-weighted unit vertex normals. Throws for vertices with no faces.
std::vector<Vec3> vertex_normals(const Mesh& mesh);

/// Same, but skips the per-vertex isolated check and reports unnormalized
/// accumulators; used by the differentiable path.
std::vector<Vec3> vertex_normal_accumulators(const Mesh& mesh);

/// Reverse-mode derivative of unit vertex normals: given dE/dn per vertex,
/// accumulates dE/dv into vertex_grads (same length as vertices).
void vertex_normals_pullback(const Mesh& mesh,
                             const std::vector<Vec3>& normal_grads,
                             std::vector<Vec3>& vertex_grads);

/// Uniform-weight Laplacian smoothing; synchronous updates, topology kept.
Mesh laplacian_smooth(const Mesh& mesh, int iterations, double step);
void laplacian_smooth_in_place(std::vector<Vec3>& vertices,
                               const std::vector<std::vector<int>>& adjacency,
                               int iterations, double step);

/// Left/right pairing across the sagittal plane x = 0. Midline vertices are
/// self-paired. pair_of[i] == j means vertex i mirrors to vertex j.
struct MirrorCorrespondence {
  std::vector<int> pair_of;
};

/// Builds the pairing by nearest reflected vertex. Throws when some vertex
/// has no counterpart within tol.
MirrorCorrespondence build_mirror_correspondence(const Mesh& mesh, double tol);

/// Reflects across x = 0 and swaps left/right vertex identities, so the
/// result has the original topology. Involution.
Mesh mirror_sagittal(const Mesh& mesh, const MirrorCorrespondence& corr);
std::vector<Vec3> mirror_sagittal(const std::vector<Vec3>& vertices,
                                  const MirrorCorrespondence& corr);

}  // namespace smal
