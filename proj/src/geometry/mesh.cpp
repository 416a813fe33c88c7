#include "smal/geometry/mesh.hpp"

#include <algorithm>
#include <set>

namespace smal {

void validate_mesh(const Mesh& mesh) {
  const int v = mesh.vertex_count();
  for (size_t f = 0; f < mesh.faces.size(); ++f) {
    const Face& face = mesh.faces[f];
    for (int k = 0; k < 3; ++k) {
      if (face[k] < 0 || face[k] >= v)
        throw validation_error("face " + std::to_string(f) +
                               " references vertex " + std::to_string(face[k]) +
                               " out of range");
    }
    if (face[0] == face[1] || face[1] == face[2] || face[0] == face[2])
      throw validation_error("face " + std::to_string(f) + " is degenerate");
  }
}

double bbox_diagonal(const std::vector<Vec3>& points) {
  if (points.empty()) return 0.0;
  Vec3 lo = points.front(), hi = points.front();
  for (const Vec3& p : points) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  return (hi - lo).norm();
}

double bbox_diagonal(const Mesh& mesh) { return bbox_diagonal(mesh.vertices); }

Vec3 vertex_median(const std::vector<Vec3>& points) {
  if (points.empty()) throw validation_error("median of empty point set");
  Vec3 med;
  std::vector<double> coord(points.size());
  for (int axis = 0; axis < 3; ++axis) {
    for (size_t i = 0; i < points.size(); ++i) coord[i] = points[i][axis];
    auto mid = coord.begin() + coord.size() / 2;
    std::nth_element(coord.begin(), mid, coord.end());
    med[axis] = *mid;
  }
  return med;
}

std::vector<std::array<int, 2>> mesh_edges(const Mesh& mesh) {
  std::set<std::array<int, 2>> edges;
  for (const Face& f : mesh.faces) {
    for (int k = 0; k < 3; ++k) {
      int a = f[k], b = f[(k + 1) % 3];
      if (a > b) std::swap(a, b);
      edges.insert({a, b});
    }
  }
  return {edges.begin(), edges.end()};
}

std::vector<std::vector<int>> vertex_adjacency(const Mesh& mesh) {
  std::vector<std::set<int>> nbr(mesh.vertex_count());
  for (const Face& f : mesh.faces) {
    for (int k = 0; k < 3; ++k) {
      const int a = f[k], b = f[(k + 1) % 3];
      nbr[a].insert(b);
      nbr[b].insert(a);
    }
  }
  std::vector<std::vector<int>> out(mesh.vertex_count());
  for (int i = 0; i < mesh.vertex_count(); ++i)
    out[i].assign(nbr[i].begin(), nbr[i].end());
  return out;
}

std::vector<Vec3> vertex_normal_accumulators(const Mesh& mesh) {
  std::vector<Vec3> acc(mesh.vertex_count(), Vec3::Zero());
  for (const Face& f : mesh.faces) {
    const Vec3 c = (mesh.vertices[f[1]] - mesh.vertices[f[0]])
                       .cross(mesh.vertices[f[2]] - mesh.vertices[f[0]]);
    acc[f[0]] += c;
    acc[f[1]] += c;
    acc[f[2]] += c;
  }
  return acc;
}

std::vector<Vec3> vertex_normals(const Mesh& mesh) {
  std::vector<Vec3> acc = vertex_normal_accumulators(mesh);
  for (int i = 0; i < mesh.vertex_count(); ++i) {
    const double n = acc[i].norm();
    if (n < 1e-300)
      throw validation_error("vertex " + std::to_string(i) +
                             " has no incident area; normal undefined");
    acc[i] /= n;
  }
  return acc;
}

void vertex_normals_pullback(const Mesh& mesh,
                             const std::vector<Vec3>& normal_grads,
                             std::vector<Vec3>& vertex_grads) {
  const std::vector<Vec3> acc = vertex_normal_accumulators(mesh);
  // d(u/|u|)/du applied to incoming normal gradients.
  std::vector<Vec3> acc_grads(mesh.vertex_count(), Vec3::Zero());
  for (int i = 0; i < mesh.vertex_count(); ++i) {
    if (normal_grads[i].isZero()) continue;
    const double len = acc[i].norm();
    if (len < 1e-300) continue;
    const Vec3 n = acc[i] / len;
    acc_grads[i] = (normal_grads[i] - n * n.dot(normal_grads[i])) / len;
  }
  for (const Face& f : mesh.faces) {
    const Vec3 cbar = acc_grads[f[0]] + acc_grads[f[1]] + acc_grads[f[2]];
    if (cbar.isZero()) continue;
    const Vec3 p = mesh.vertices[f[1]] - mesh.vertices[f[0]];
    const Vec3 q = mesh.vertices[f[2]] - mesh.vertices[f[0]];
    const Vec3 pbar = q.cross(cbar);
    const Vec3 qbar = cbar.cross(p);
    vertex_grads[f[1]] += pbar;
    vertex_grads[f[2]] += qbar;
    vertex_grads[f[0]] -= pbar + qbar;
  }
}

void laplacian_smooth_in_place(std::vector<Vec3>& vertices,
                               const std::vector<std::vector<int>>& adjacency,
                               int iterations, double step) {
  if (step <= 0.0 || step >= 1.0)
    throw validation_error("smoothing step must lie in (0,1)");
  if (iterations < 0) throw validation_error("negative iteration count");
  std::vector<Vec3> next(vertices.size());
  for (int it = 0; it < iterations; ++it) {
    for (size_t i = 0; i < vertices.size(); ++i) {
      if (adjacency[i].empty()) {
        next[i] = vertices[i];
        continue;
      }
      Vec3 mean = Vec3::Zero();
      for (int j : adjacency[i]) mean += vertices[j];
      mean /= static_cast<double>(adjacency[i].size());
      next[i] = vertices[i] + step * (mean - vertices[i]);
    }
    vertices.swap(next);
  }
}

Mesh laplacian_smooth(const Mesh& mesh, int iterations, double step) {
  Mesh out = mesh;
  laplacian_smooth_in_place(out.vertices, vertex_adjacency(mesh), iterations,
                            step);
  return out;
}

MirrorCorrespondence build_mirror_correspondence(const Mesh& mesh,
                                                 double tol) {
  const int v = mesh.vertex_count();
  MirrorCorrespondence corr;
  corr.pair_of.assign(v, -1);
  // Deterministic brute force; templates are built once.
  for (int i = 0; i < v; ++i) {
    const Vec3 target(-mesh.vertices[i].x(), mesh.vertices[i].y(),
                      mesh.vertices[i].z());
    int best = -1;
    double best_d = tol;
    for (int j = 0; j < v; ++j) {
      const double d = (mesh.vertices[j] - target).norm();
      if (d < best_d) {
        best_d = d;
        best = j;
      }
    }
    if (best < 0)
      throw validation_error("vertex " + std::to_string(i) +
                             " has no mirror counterpart within tolerance");
    corr.pair_of[i] = best;
  }
  for (int i = 0; i < v; ++i)
    if (corr.pair_of[corr.pair_of[i]] != i)
      throw validation_error("mirror pairing is not symmetric at vertex " +
                             std::to_string(i));
  return corr;
}

std::vector<Vec3> mirror_sagittal(const std::vector<Vec3>& vertices,
                                  const MirrorCorrespondence& corr) {
  if (corr.pair_of.size() != vertices.size())
    throw validation_error("mirror correspondence does not cover the mesh");
  std::vector<Vec3> out(vertices.size());
  for (size_t i = 0; i < vertices.size(); ++i) {
    const Vec3& src = vertices[corr.pair_of[i]];
    out[i] = Vec3(-src.x(), src.y(), src.z());
  }
  return out;
}

Mesh mirror_sagittal(const Mesh& mesh, const MirrorCorrespondence& corr) {
  Mesh out = mesh;
  out.vertices = mirror_sagittal(mesh.vertices, corr);
  return out;
}

}  // namespace smal
