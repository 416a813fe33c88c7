#pragma once

#include <string>

#include "smal/gloss/gloss_template.hpp"

namespace smal {

/// Per-part pose/shape variables: location, Rodrigues rotation, analytic
/// shape coefficients, and pose-deformation coefficients.
struct PartParams {
  Vec3 location = Vec3::Zero();
  Vec3 rotation = Vec3::Zero();
  VecX shape;
  VecX pose_deform;
};

struct GlossParams {
  std::vector<PartParams> parts;

  static GlossParams neutral(const GlossTemplate& tmpl);

  int part_count() const { return static_cast<int>(parts.size()); }
};

/// Part vertices in the part's local frame:
/// vec(p_i) = t_i + pose_mean_i + B_s,i s_i + B_p,i d_i.
std::vector<Vec3> part_vertices_local(const GlossTemplate& tmpl, int part,
                                      const PartParams& params);

/// Local vertices mapped to the global frame: R(r_i) p + l_i.
std::vector<Vec3> part_vertices_global(const GlossTemplate& tmpl, int part,
                                       const PartParams& params);

std::vector<std::vector<Vec3>> all_part_vertices_global(
    const GlossTemplate& tmpl, const GlossParams& params);

/// Collapses duplicated interface vertices (averaging the copies) into the
/// fixed merged topology. Output vertex count is the same for every input.
Mesh merge_parts(const GlossParams& params, const GlossTemplate& tmpl);
std::vector<Vec3> merge_part_vertices(
    const std::vector<std::vector<Vec3>>& part_verts,
    const GlossTemplate& tmpl);

/// Flat parameter packing for the solver: per part
/// [location, rotation, shape, pose_deform].
VecX pack_gloss_params(const GlossParams& params);
GlossParams unpack_gloss_params(const GlossTemplate& tmpl, const VecX& x);
int gloss_param_dimension(const GlossTemplate& tmpl);

void write_gloss_params_json(const std::string& path, const GlossParams& p);
GlossParams read_gloss_params_json(const std::string& path);

}  // namespace smal
