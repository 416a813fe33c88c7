#include <algorithm>
#include <map>
#include <random>
#include <set>

#include "smal/geometry/rotations.hpp"
#include "smal/geometry/spatial_grid.hpp"
#include "smal/synth/synth.hpp"

namespace smal {

namespace {

// Möller-Trumbore segment/triangle intersection, proper crossings only.
bool segment_hits_triangle(const Vec3& p, const Vec3& q, const Vec3& a,
                           const Vec3& b, const Vec3& c) {
  const Vec3 dir = q - p;
  const Vec3 e1 = b - a, e2 = c - a;
  const Vec3 h = dir.cross(e2);
  const double det = e1.dot(h);
  if (std::abs(det) < 1e-14) return false;
  const double inv = 1.0 / det;
  const Vec3 s = p - a;
  const double u = s.dot(h) * inv;
  if (u < 0.0 || u > 1.0) return false;
  const Vec3 qv = s.cross(e1);
  const double v = dir.dot(qv) * inv;
  if (v < 0.0 || u + v > 1.0) return false;
  const double t = e2.dot(qv) * inv;
  return t > 1e-10 && t < 1.0 - 1e-10;
}

bool triangles_intersect(const Vec3& a0, const Vec3& a1, const Vec3& a2,
                         const Vec3& b0, const Vec3& b1, const Vec3& b2) {
  return segment_hits_triangle(a0, a1, b0, b1, b2) ||
         segment_hits_triangle(a1, a2, b0, b1, b2) ||
         segment_hits_triangle(a2, a0, b0, b1, b2) ||
         segment_hits_triangle(b0, b1, a0, a1, a2) ||
         segment_hits_triangle(b1, b2, a0, a1, a2) ||
         segment_hits_triangle(b2, b0, a0, a1, a2);
}

int face_part(const Face& f, const PartLabeling& labeling) {
  const int l0 = labeling.part_of_vertex[f[0]];
  const int l1 = labeling.part_of_vertex[f[1]];
  const int l2 = labeling.part_of_vertex[f[2]];
  if (l0 == l1 || l0 == l2) return l0;
  if (l1 == l2) return l1;
  return std::min({l0, l1, l2});
}

bool parts_related(int a, int b, const KinematicTree& tree) {
  return a == b || tree.parent[a] == b || tree.parent[b] == a;
}

}  // namespace

bool has_self_intersections(const Mesh& mesh, const PartLabeling& labeling,
                            const KinematicTree& tree) {
  const int nf = mesh.face_count();
  std::vector<int> owner(nf);
  std::vector<Vec3> lo(nf), hi(nf);
  for (int f = 0; f < nf; ++f) {
    owner[f] = face_part(mesh.faces[f], labeling);
    lo[f] = mesh.vertices[mesh.faces[f][0]]
                .cwiseMin(mesh.vertices[mesh.faces[f][1]])
                .cwiseMin(mesh.vertices[mesh.faces[f][2]]);
    hi[f] = mesh.vertices[mesh.faces[f][0]]
                .cwiseMax(mesh.vertices[mesh.faces[f][1]])
                .cwiseMax(mesh.vertices[mesh.faces[f][2]]);
  }

  // Uniform grid over face boxes.
  Vec3 glo = lo[0], ghi = hi[0];
  for (int f = 1; f < nf; ++f) {
    glo = glo.cwiseMin(lo[f]);
    ghi = ghi.cwiseMax(hi[f]);
  }
  const Vec3 extent = (ghi - glo).cwiseMax(1e-9);
  const double cell = std::cbrt(extent.prod() / std::max(1, nf / 4));
  int dims[3];
  for (int a = 0; a < 3; ++a)
    dims[a] = std::max(1, std::min(128, static_cast<int>(extent[a] / cell) + 1));
  auto cell_of = [&](const Vec3& p, int axis) {
    return std::clamp(static_cast<int>((p[axis] - glo[axis]) /
                                       (extent[axis] / dims[axis])),
                      0, dims[axis] - 1);
  };
  std::vector<std::vector<int>> buckets(
      static_cast<size_t>(dims[0]) * dims[1] * dims[2]);
  for (int f = 0; f < nf; ++f) {
    for (int ix = cell_of(lo[f], 0); ix <= cell_of(hi[f], 0); ++ix)
      for (int iy = cell_of(lo[f], 1); iy <= cell_of(hi[f], 1); ++iy)
        for (int iz = cell_of(lo[f], 2); iz <= cell_of(hi[f], 2); ++iz)
          buckets[(ix * dims[1] + iy) * dims[2] + iz].push_back(f);
  }

  std::set<std::pair<int, int>> tested;
  for (const auto& bucket : buckets) {
    for (size_t i = 0; i < bucket.size(); ++i) {
      for (size_t j = i + 1; j < bucket.size(); ++j) {
        int fa = bucket[i], fb = bucket[j];
        if (parts_related(owner[fa], owner[fb], tree)) continue;
        if ((lo[fa].array() > hi[fb].array()).any() ||
            (lo[fb].array() > hi[fa].array()).any())
          continue;
        if (fa > fb) std::swap(fa, fb);
        if (!tested.insert({fa, fb}).second) continue;
        const Face& A = mesh.faces[fa];
        const Face& B = mesh.faces[fb];
        if (triangles_intersect(mesh.vertices[A[0]], mesh.vertices[A[1]],
                                mesh.vertices[A[2]], mesh.vertices[B[0]],
                                mesh.vertices[B[1]], mesh.vertices[B[2]]))
          return true;
      }
    }
  }
  return false;
}

namespace {

struct RecipeValues {
  FamilyRecipe recipe;
};

FamilyRecipe jitter_recipe(const FamilyRecipe& base, std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  FamilyRecipe r = base;
  r.body_scale += base.jitter * g(rng);
  r.torso_length += base.jitter * g(rng);
  r.torso_width += base.jitter * g(rng);
  r.leg_length += base.jitter * g(rng);
  r.leg_width += base.jitter * g(rng);
  r.neck_length += base.jitter * g(rng);
  r.head_scale += base.jitter * g(rng);
  r.tail_length += base.jitter * g(rng);
  return r;
}

std::vector<VecX> recipe_shape_coefficients(const GlossTemplate& tmpl,
                                            const FamilyRecipe& r) {
  std::vector<VecX> shapes(tmpl.part_count());
  for (int i = 0; i < tmpl.part_count(); ++i) {
    VecX s = VecX::Zero(7);
    s[0] = r.body_scale;
    switch (part_category(tmpl.parts[i].name)) {
      case PartCategory::Torso:
        s[2] += r.torso_length;
        s[1] += r.torso_width;
        s[3] += r.torso_width;
        break;
      case PartCategory::Neck:
        s[2] += r.neck_length;
        break;
      case PartCategory::Head:
      case PartCategory::Jaw:
      case PartCategory::Ear:
      case PartCategory::Eye:
        s[0] += r.head_scale;
        break;
      case PartCategory::LegUpper:
      case PartCategory::LegLower:
        s[3] += r.leg_length;
        s[1] += r.leg_width;
        s[2] += r.leg_width;
        break;
      case PartCategory::Paw:
        s[1] += r.leg_width;
        break;
      case PartCategory::Tail:
        s[2] += r.tail_length;
        break;
    }
    shapes[i] = s;
  }
  return shapes;
}

VecX sample_theta(const GlossTemplate& tmpl, double pose_scale,
                  std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const int n = tmpl.part_count();
  VecX theta = VecX::Zero(3 * n);
  theta.segment<3>(0) =
      pose_scale * Vec3(0.06 * g(rng), 0.06 * g(rng), 0.25 * u(rng));
  for (int i = 1; i < n; ++i) {
    const PartCategory cat = part_category(tmpl.parts[i].name);
    Vec3 sigma;
    switch (cat) {
      case PartCategory::Torso: sigma = Vec3(0.05, 0.02, 0.05); break;
      case PartCategory::Neck: sigma = Vec3(0.12, 0.04, 0.10); break;
      case PartCategory::Head: sigma = Vec3(0.10, 0.04, 0.08); break;
      case PartCategory::Jaw: sigma = Vec3(0.08, 0.01, 0.01); break;
      case PartCategory::Ear:
      case PartCategory::Eye: sigma = Vec3(0.02, 0.02, 0.02); break;
      case PartCategory::LegUpper: sigma = Vec3(0.20, 0.05, 0.08); break;
      case PartCategory::LegLower: sigma = Vec3(0.15, 0.04, 0.06); break;
      case PartCategory::Paw: sigma = Vec3(0.08, 0.03, 0.03); break;
      case PartCategory::Tail: sigma = Vec3(0.22, 0.07, 0.22); break;
    }
    const Vec3 bound = 0.8 * category_rotation_bound(cat);
    for (int c = 0; c < 3; ++c) {
      double v = pose_scale * sigma[c] * g(rng);
      theta[3 * i + c] = std::clamp(v, -bound[c], bound[c]);
    }
  }
  return theta;
}

// Parts are posed rigidly by forward kinematics; each child is then slid so
// the interface ring centroids coincide, which keeps chains of scaled parts
// connected (and the result exactly representable by the part model).
GlossParams stitched_assembly(const GlossTemplate& tmpl,
                              const std::vector<VecX>& shapes,
                              const VecX& theta) {
  const JointTransforms jt =
      forward_kinematics(tmpl.tree, theta, Vec3::Zero());
  std::map<int, const PartInterface*> interface_of_child;
  for (const PartInterface& itf : tmpl.interfaces) {
    const int child =
        tmpl.tree.parent[itf.part_a] == itf.part_b ? itf.part_a : itf.part_b;
    interface_of_child[child] = &itf;
  }

  GlossParams params;
  params.parts.resize(tmpl.part_count());
  std::vector<std::vector<Vec3>> local(tmpl.part_count());
  for (int i : tmpl.tree.topological_order()) {
    PartParams& p = params.parts[i];
    p.shape = shapes[i];
    p.pose_deform = VecX::Zero(tmpl.pose_basis[i].component_count());
    p.rotation = matrix_to_rodrigues(jt.rot[i]);
    local[i] = part_vertices_local(tmpl, i, p);
    const Mat3 rot = rodrigues_to_matrix(p.rotation);
    if (tmpl.tree.parent[i] < 0) {
      p.location = jt.rot[i] * (tmpl.parts[i].neutral_location -
                                tmpl.tree.joint_positions[i]) +
                   jt.pos[i];
      continue;
    }
    const PartInterface& itf = *interface_of_child.at(i);
    const int parent = tmpl.tree.parent[i];
    Vec3 parent_mean = Vec3::Zero(), child_mean = Vec3::Zero();
    const Mat3 parent_rot =
        rodrigues_to_matrix(params.parts[parent].rotation);
    for (const auto& [va, vb] : itf.pairs) {
      const int child_local = itf.part_a == i ? va : vb;
      const int parent_local = itf.part_a == i ? vb : va;
      parent_mean += parent_rot * local[parent][parent_local] +
                     params.parts[parent].location;
      child_mean += rot * local[i][child_local];
    }
    parent_mean /= static_cast<double>(itf.pairs.size());
    child_mean /= static_cast<double>(itf.pairs.size());
    p.location = parent_mean - child_mean;
  }
  return params;
}

Mesh remesh_scan(const Mesh& input, int target_vertices, double jitter_sigma,
                 std::mt19937_64& rng) {
  // Midpoint subdivision.
  Mesh sub;
  sub.vertices = input.vertices;
  std::map<std::pair<int, int>, int> midpoints;
  auto midpoint = [&](int a, int b) {
    const auto key = std::minmax(a, b);
    auto it = midpoints.find(key);
    if (it != midpoints.end()) return it->second;
    sub.vertices.push_back(0.5 * (input.vertices[a] + input.vertices[b]));
    const int id = sub.vertex_count() - 1;
    midpoints[key] = id;
    return id;
  };
  for (const Face& f : input.faces) {
    const int ab = midpoint(f[0], f[1]);
    const int bc = midpoint(f[1], f[2]);
    const int ca = midpoint(f[2], f[0]);
    sub.faces.push_back({f[0], ab, ca});
    sub.faces.push_back({f[1], bc, ab});
    sub.faces.push_back({f[2], ca, bc});
    sub.faces.push_back({ab, bc, ca});
  }
  std::normal_distribution<double> g(0.0, jitter_sigma);
  for (Vec3& v : sub.vertices) v += Vec3(g(rng), g(rng), g(rng));

  // Vertex clustering on a uniform grid, bisecting the cell size until the
  // cluster count lands near the target.
  Vec3 lo = sub.vertices[0], hi = sub.vertices[0];
  for (const Vec3& v : sub.vertices) {
    lo = lo.cwiseMin(v);
    hi = hi.cwiseMax(v);
  }
  const double diag = (hi - lo).norm();
  double lo_cell = diag / 400.0, hi_cell = diag / 8.0;
  Mesh best;
  int best_count = -1;
  for (int it = 0; it < 18; ++it) {
    const double cell = 0.5 * (lo_cell + hi_cell);
    std::map<std::array<int, 3>, int> cluster_of_cell;
    std::vector<int> cluster(sub.vertex_count());
    std::vector<Vec3> sums;
    std::vector<int> counts;
    for (int v = 0; v < sub.vertex_count(); ++v) {
      std::array<int, 3> key;
      for (int a = 0; a < 3; ++a)
        key[a] = static_cast<int>(std::floor((sub.vertices[v][a] - lo[a]) / cell));
      auto [iter, fresh] = cluster_of_cell.try_emplace(
          key, static_cast<int>(sums.size()));
      if (fresh) {
        sums.push_back(Vec3::Zero());
        counts.push_back(0);
      }
      cluster[v] = iter->second;
      sums[iter->second] += sub.vertices[v];
      ++counts[iter->second];
    }
    Mesh out;
    out.vertices.resize(sums.size());
    for (size_t cidx = 0; cidx < sums.size(); ++cidx)
      out.vertices[cidx] = sums[cidx] / counts[cidx];
    std::set<std::array<int, 3>> seen;
    for (const Face& f : sub.faces) {
      Face m{cluster[f[0]], cluster[f[1]], cluster[f[2]]};
      if (m[0] == m[1] || m[1] == m[2] || m[0] == m[2]) continue;
      std::array<int, 3> key{m[0], m[1], m[2]};
      std::sort(key.begin(), key.end());
      if (!seen.insert(key).second) continue;
      out.faces.push_back(m);
    }
    const int count = out.vertex_count();
    if (best_count < 0 || std::abs(count - target_vertices) <
                              std::abs(best_count - target_vertices)) {
      best = out;
      best_count = count;
    }
    if (count > target_vertices)
      lo_cell = cell;
    else
      hi_cell = cell;
  }
  return best;
}

}  // namespace

SynthAnimal sample_animal(const GlossTemplate& tmpl, const SynthSpec& spec,
                          uint64_t seed) {
  if (spec.noise_level < 0.0 || spec.noise_level > 0.05)
    throw validation_error("noise level must lie in [0, 0.05]");

  std::mt19937_64 rng_shape(seed ^ 0x9e3779b97f4a7c15ull);
  const FamilyRecipe recipe = jitter_recipe(spec.recipe, rng_shape);
  const std::vector<VecX> shapes = recipe_shape_coefficients(tmpl, recipe);

  SynthAnimal animal;
  animal.recipe_used = recipe;
  animal.id = recipe.name + "_" + std::to_string(seed);

  bool accepted = false;
  for (int attempt = 0; attempt <= spec.max_retries; ++attempt) {
    std::mt19937_64 rng_pose(seed * 6364136223846793005ull +
                             1442695040888963407ull + attempt);
    const VecX theta =
        sample_theta(tmpl, spec.pose_scale * (attempt == 0 ? 1.0 : 0.8),
                     rng_pose);
    const GlossParams params = stitched_assembly(tmpl, shapes, theta);
    Mesh merged = merge_parts(params, tmpl);
    if (has_self_intersections(merged, tmpl.labeling, tmpl.tree)) continue;
    animal.true_params = params;
    animal.true_theta = theta;
    animal.template_pose_mesh = std::move(merged);
    accepted = true;
    break;
  }
  if (!accepted)
    throw solver_error("failed to sample a self-intersection-free pose for seed " +
                       std::to_string(seed));

  const double sigma =
      spec.noise_level * bbox_diagonal(animal.template_pose_mesh);

  // Smooth normal-displacement detail the part model cannot represent;
  // this is the fine geometry the model-free refinement recovers.
  if (sigma > 0 && spec.detail_scale > 0) {
    std::mt19937_64 rng_detail(seed ^ 0xa24baed4963ee407ull);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::normal_distribution<double> g(0.0, 1.0);
    Vec3 dir1(g(rng_detail), g(rng_detail), g(rng_detail));
    Vec3 dir2(g(rng_detail), g(rng_detail), g(rng_detail));
    dir1.normalize();
    dir2.normalize();
    const double diag = bbox_diagonal(animal.template_pose_mesh);
    const double freq1 = 2.0 * M_PI * (2.5 + 1.5 * u(rng_detail)) / diag;
    const double freq2 = 2.0 * M_PI * (2.5 + 1.5 * u(rng_detail)) / diag;
    const double phase1 = 2.0 * M_PI * u(rng_detail);
    const double phase2 = 2.0 * M_PI * u(rng_detail);
    const double amp = spec.detail_scale * sigma;
    const auto normals = vertex_normals(animal.template_pose_mesh);
    for (int v = 0; v < animal.template_pose_mesh.vertex_count(); ++v) {
      const Vec3& p = animal.template_pose_mesh.vertices[v];
      const double field = std::sin(freq1 * p.dot(dir1) + phase1) *
                           std::cos(freq2 * p.dot(dir2) + phase2);
      animal.template_pose_mesh.vertices[v] += amp * field * normals[v];
    }
  }

  for (const auto& [name, m] : tmpl.scan_keypoint_vertices)
    animal.scan_keypoints[name] = animal.template_pose_mesh.vertices[m];

  std::mt19937_64 rng_noise(seed ^ 0xc2b2ae3d27d4eb4full);
  Mesh noisy = animal.template_pose_mesh;
  if (sigma > 0) {
    std::normal_distribution<double> g(0.0, sigma);
    for (Vec3& v : noisy.vertices) v += Vec3(g(rng_noise), g(rng_noise), g(rng_noise));
  }
  if (spec.remesh) {
    animal.scan = remesh_scan(
        noisy, static_cast<int>(1.5 * tmpl.merged_vertex_count()),
        0.3 * sigma, rng_noise);
  } else {
    animal.scan = std::move(noisy);
  }
  return animal;
}

}  // namespace smal
