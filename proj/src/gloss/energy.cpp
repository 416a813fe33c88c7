#include "smal/gloss/energy.hpp"

#include <cmath>

#include "smal/geometry/rotations.hpp"
#include "smal/geometry/spatial_grid.hpp"
#include "smal/optim/robust.hpp"

namespace smal {

void GlossWeights::validate() const {
  for (double k : {k_sm, k_s, k_d, k_st, k_kp, k_m2s, k_s2m, k_c, k_tail})
    if (k < 0) throw validation_error("energy weights must be non-negative");
}

GlossEnergy::GlossEnergy(const GlossTemplate& tmpl, Mesh scan,
                         std::map<std::string, Vec3> scan_keypoints,
                         GlossWeights weights)
    : tmpl_(tmpl),
      scan_(std::move(scan)),
      scan_keypoints_(std::move(scan_keypoints)),
      weights_(weights) {
  weights_.validate();
  if (scan_.vertices.empty()) throw validation_error("empty scan");
  for (const auto& [name, p] : scan_keypoints_)
    if (!tmpl_.scan_keypoints.count(name))
      throw validation_error("scan keypoint '" + name +
                             "' is not in the template vocabulary");

  const double diag = bbox_diagonal(tmpl_.merged_mesh);
  sigma_m2s_ = weights_.sigma_m2s > 0 ? weights_.sigma_m2s : 0.1 * diag;
  sigma_s2m_ = weights_.sigma_s2m > 0 ? weights_.sigma_s2m : 0.1 * diag;

  // Template normals per part and interface normal gaps, both at neutral.
  template_local_normals_.resize(tmpl_.part_count());
  for (int i = 0; i < tmpl_.part_count(); ++i) {
    Mesh part{tmpl_.parts[i].vertices, tmpl_.parts[i].faces};
    template_local_normals_[i] = vertex_normals(part);
  }
  template_normal_gaps_.resize(tmpl_.interfaces.size());
  for (size_t e = 0; e < tmpl_.interfaces.size(); ++e) {
    const PartInterface& itf = tmpl_.interfaces[e];
    for (const auto& [va, vb] : itf.pairs) {
      const Vec3 na = template_local_normals_[itf.part_a][va];
      const Vec3 nb = template_local_normals_[itf.part_b][vb];
      template_normal_gaps_[e].push_back((na - nb).squaredNorm());
    }
  }

  refresh_correspondences(GlossParams::neutral(tmpl_));
}

void GlossEnergy::refresh_correspondences(const GlossParams& params) {
  const auto globals = all_part_vertices_global(tmpl_, params);
  PointGrid scan_grid(scan_.vertices);
  m2s_nearest_.resize(tmpl_.part_count());
  std::vector<Vec3> stacked;
  std::vector<PartVertexRef> stacked_ref;
  for (int i = 0; i < tmpl_.part_count(); ++i) {
    m2s_nearest_[i].resize(globals[i].size());
    for (size_t v = 0; v < globals[i].size(); ++v) {
      m2s_nearest_[i][v] = scan_grid.nearest(globals[i][v]);
      stacked.push_back(globals[i][v]);
      stacked_ref.push_back({i, static_cast<int>(v)});
    }
  }
  PointGrid model_grid(stacked);
  s2m_nearest_.resize(scan_.vertices.size());
  for (size_t s = 0; s < scan_.vertices.size(); ++s)
    s2m_nearest_[s] = stacked_ref[model_grid.nearest(scan_.vertices[s])];
}

double GlossEnergy::evaluate(const GlossParams& params,
                             GlossParams* grad) const {
  return evaluate_impl(params, grad, nullptr);
}

std::map<std::string, double> GlossEnergy::term_values(
    const GlossParams& params) const {
  std::map<std::string, double> terms;
  evaluate_impl(params, nullptr, &terms);
  return terms;
}

double GlossEnergy::evaluate_impl(const GlossParams& params, GlossParams* grad,
                                  std::map<std::string, double>* terms) const {
  const int n = tmpl_.part_count();
  if (params.part_count() != n)
    throw validation_error("parameter part count mismatch");

  // Forward quantities.
  std::vector<std::vector<Vec3>> locals(n), globals(n);
  std::vector<Mat3> rot(n);
  for (int i = 0; i < n; ++i) {
    locals[i] = part_vertices_local(tmpl_, i, params.parts[i]);
    rot[i] = rodrigues_to_matrix(params.parts[i].rotation);
    globals[i].resize(locals[i].size());
    for (size_t v = 0; v < locals[i].size(); ++v)
      globals[i][v] = rot[i] * locals[i][v] + params.parts[i].location;
  }
  // Per-part local normals (depend on shape/pose coefficients).
  std::vector<std::vector<Vec3>> local_normals(n);
  std::vector<Mesh> local_meshes(n);
  const bool need_curv = weights_.k_c > 0;
  if (need_curv) {
    for (int i = 0; i < n; ++i) {
      local_meshes[i] = Mesh{locals[i], tmpl_.parts[i].faces};
      local_normals[i] = vertex_normals(local_meshes[i]);
    }
  }

  // Gradient accumulators.
  std::vector<std::vector<Vec3>> ghat, nbar;
  if (grad) {
    grad->parts.assign(n, PartParams{});
    ghat.resize(n);
    nbar.resize(n);
    for (int i = 0; i < n; ++i) {
      grad->parts[i].shape = VecX::Zero(7);
      grad->parts[i].pose_deform =
          VecX::Zero(tmpl_.pose_basis[i].component_count());
      ghat[i].assign(locals[i].size(), Vec3::Zero());
      nbar[i].assign(locals[i].size(), Vec3::Zero());
    }
  }

  double e_s = 0, e_d = 0, e_sm = 0, e_st = 0, e_kp = 0, e_m2s = 0, e_s2m = 0,
         e_curv = 0, e_tail = 0;

  // Shape / pose-deformation priors.
  for (int i = 0; i < n; ++i) {
    const VecX& s = params.parts[i].shape;
    e_s += (s.array().square() / tmpl_.shape_prior_variance.array()).sum();
    e_d += params.parts[i].pose_deform.squaredNorm();
    if (grad) {
      grad->parts[i].shape +=
          weights_.k_s * 2.0 *
          (s.array() / tmpl_.shape_prior_variance.array()).matrix();
      grad->parts[i].pose_deform +=
          weights_.k_d * 2.0 * params.parts[i].pose_deform;
    }
  }

  // Symmetry coupling: all pairs within each group.
  for (const auto& group : tmpl_.symmetry_groups) {
    for (size_t a = 0; a < group.size(); ++a) {
      for (size_t b = a + 1; b < group.size(); ++b) {
        const VecX diff =
            params.parts[group[a]].shape - params.parts[group[b]].shape;
        e_sm += diff.squaredNorm();
        if (grad) {
          grad->parts[group[a]].shape += weights_.k_sm * 2.0 * diff;
          grad->parts[group[b]].shape -= weights_.k_sm * 2.0 * diff;
        }
      }
    }
  }

  // Stitching and curvature over interfaces.
  for (size_t e = 0; e < tmpl_.interfaces.size(); ++e) {
    const PartInterface& itf = tmpl_.interfaces[e];
    for (size_t pair_idx = 0; pair_idx < itf.pairs.size(); ++pair_idx) {
      const auto& [va, vb] = itf.pairs[pair_idx];
      const Vec3 d = globals[itf.part_a][va] - globals[itf.part_b][vb];
      e_st += d.squaredNorm();
      if (grad) {
        ghat[itf.part_a][va] += weights_.k_st * 2.0 * d;
        ghat[itf.part_b][vb] -= weights_.k_st * 2.0 * d;
      }
      if (need_curv) {
        const Vec3 na = rot[itf.part_a] * local_normals[itf.part_a][va];
        const Vec3 nb = rot[itf.part_b] * local_normals[itf.part_b][vb];
        const double gap = (na - nb).squaredNorm();
        const double diff = gap - template_normal_gaps_[e][pair_idx];
        e_curv += std::abs(diff);
        // Subgradient 0 at the kink; the tolerance absorbs the float noise
        // of exactly-preserved gaps under rigid motion.
        if (grad && std::abs(diff) > 1e-10) {
          const double sgn = diff > 0 ? 1.0 : -1.0;
          const Vec3 gn = weights_.k_c * sgn * 2.0 * (na - nb);
          nbar[itf.part_a][va] += gn;
          nbar[itf.part_b][vb] -= gn;
        }
      }
    }
  }

  // Keypoints.
  for (const auto& [name, target] : scan_keypoints_) {
    const PartVertexRef ref = tmpl_.scan_keypoints.at(name);
    const Vec3 d = globals[ref.part][ref.vertex] - target;
    e_kp += d.squaredNorm();
    if (grad) ghat[ref.part][ref.vertex] += weights_.k_kp * 2.0 * d;
  }

  // Robust model-to-scan distances with frozen assignments.
  const GemanMcClure rho_m2s(sigma_m2s_);
  for (int i = 0; i < n; ++i) {
    for (size_t v = 0; v < globals[i].size(); ++v) {
      const Vec3 d = globals[i][v] - scan_.vertices[m2s_nearest_[i][v]];
      const double sq = d.squaredNorm();
      e_m2s += rho_m2s.value(sq);
      if (grad)
        ghat[i][v] += weights_.k_m2s * rho_m2s.derivative(sq) * 2.0 * d;
    }
  }
  const GemanMcClure rho_s2m(sigma_s2m_);
  for (size_t s = 0; s < scan_.vertices.size(); ++s) {
    const PartVertexRef ref = s2m_nearest_[s];
    const Vec3 d = globals[ref.part][ref.vertex] - scan_.vertices[s];
    const double sq = d.squaredNorm();
    e_s2m += rho_s2m.value(sq);
    if (grad)
      ghat[ref.part][ref.vertex] +=
          weights_.k_s2m * rho_s2m.derivative(sq) * 2.0 * d;
  }

  // Tail pose prior over relative rotations.
  for (size_t ti = 0; ti < tmpl_.tail_parts.size(); ++ti) {
    const int i = tmpl_.tail_parts[ti];
    const int parent = tmpl_.tree.parent[i];
    const RelativeRotation rel = relative_rodrigues(
        params.parts[parent].rotation, params.parts[i].rotation);
    const Vec3 inv_var = tmpl_.tail_prior_variance[ti].cwiseInverse();
    e_tail += rel.q.dot(inv_var.asDiagonal() * rel.q);
    if (grad) {
      const Vec3 qbar = 2.0 * inv_var.asDiagonal() * rel.q;
      grad->parts[i].rotation +=
          weights_.k_tail * rel.dq_dchild.transpose() * qbar;
      grad->parts[parent].rotation +=
          weights_.k_tail * rel.dq_dparent.transpose() * qbar;
    }
  }

  // Pull global-vertex and normal gradients back to the parameters.
  if (grad) {
    for (int i = 0; i < n; ++i) {
      Mat3 rot_grad = Mat3::Zero();
      std::vector<Vec3> local_grads(locals[i].size(), Vec3::Zero());
      for (size_t v = 0; v < locals[i].size(); ++v) {
        const Vec3& gh = ghat[i][v];
        if (!gh.isZero()) {
          grad->parts[i].location += gh;
          rot_grad += gh * locals[i][v].transpose();
          local_grads[v] += rot[i].transpose() * gh;
        }
      }
      if (need_curv) {
        std::vector<Vec3> normal_grads(locals[i].size(), Vec3::Zero());
        bool any = false;
        for (size_t v = 0; v < locals[i].size(); ++v) {
          if (nbar[i][v].isZero()) continue;
          any = true;
          rot_grad += nbar[i][v] * local_normals[i][v].transpose();
          normal_grads[v] = rot[i].transpose() * nbar[i][v];
        }
        if (any)
          vertex_normals_pullback(local_meshes[i], normal_grads, local_grads);
      }
      grad->parts[i].rotation +=
          rotation_pullback(params.parts[i].rotation, rot_grad);
      // Local vertex gradients through the deformation bases.
      VecX flat(3 * locals[i].size());
      for (size_t v = 0; v < locals[i].size(); ++v)
        flat.segment<3>(3 * v) = local_grads[v];
      grad->parts[i].shape += tmpl_.shape_basis[i].transpose() * flat;
      if (tmpl_.pose_basis[i].component_count() > 0)
        grad->parts[i].pose_deform += tmpl_.pose_basis[i].basis.transpose() * flat;
    }
  }

  if (terms) {
    (*terms)["E_s"] = e_s;
    (*terms)["E_d"] = e_d;
    (*terms)["E_sm"] = e_sm;
    (*terms)["E_stitch"] = e_st;
    (*terms)["E_kp"] = e_kp;
    (*terms)["E_m2s"] = e_m2s;
    (*terms)["E_s2m"] = e_s2m;
    (*terms)["E_curv"] = e_curv;
    (*terms)["E_pose"] = e_tail;
  }
  return weights_.k_s * e_s + weights_.k_d * e_d + weights_.k_sm * e_sm +
         weights_.k_st * e_st + weights_.k_kp * e_kp + weights_.k_m2s * e_m2s +
         weights_.k_s2m * e_s2m + weights_.k_c * e_curv +
         weights_.k_tail * e_tail;
}

EnergyFunction GlossEnergy::as_energy_function() const {
  const GlossEnergy* self = this;
  return make_energy(dimension(), [self](const VecX& x, VecX& g) {
    const GlossParams p = unpack_gloss_params(self->tmpl_, x);
    GlossParams pg;
    const double value = self->evaluate(p, &pg);
    g = pack_gloss_params(pg);
    return value;
  });
}

double gloss_energy(const GlossTemplate& tmpl, const GlossParams& params,
                    const Mesh& scan,
                    const std::map<std::string, Vec3>& scan_keypoints,
                    const GlossWeights& weights, GlossParams* grad) {
  GlossEnergy energy(tmpl, scan, scan_keypoints, weights);
  energy.refresh_correspondences(params);
  return energy.evaluate(params, grad);
}

}  // namespace smal
