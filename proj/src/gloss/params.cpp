#include "smal/gloss/params.hpp"

#include <fstream>

#include <json.hpp>

#include "smal/geometry/rotations.hpp"

namespace smal {

GlossParams GlossParams::neutral(const GlossTemplate& tmpl) {
  GlossParams p;
  p.parts.resize(tmpl.part_count());
  for (int i = 0; i < tmpl.part_count(); ++i) {
    p.parts[i].location = tmpl.parts[i].neutral_location;
    p.parts[i].shape = VecX::Zero(7);
    p.parts[i].pose_deform =
        VecX::Zero(tmpl.pose_basis.empty()
                       ? 0
                       : tmpl.pose_basis[i].component_count());
  }
  return p;
}

std::vector<Vec3> part_vertices_local(const GlossTemplate& tmpl, int part,
                                      const PartParams& params) {
  const PartMesh& pm = tmpl.parts[part];
  const int n = pm.vertex_count();
  VecX flat(3 * n);
  for (int v = 0; v < n; ++v) flat.segment<3>(3 * v) = pm.vertices[v];
  if (!tmpl.pose_basis.empty()) {
    const PosePartBasis& pb = tmpl.pose_basis[part];
    if (pb.mean.size() == flat.size()) flat += pb.mean;
    if (params.pose_deform.size() != pb.component_count())
      throw validation_error("pose-deformation coefficient size mismatch");
    if (pb.component_count() > 0) flat += pb.basis * params.pose_deform;
  }
  if (params.shape.size() != 7)
    throw validation_error("shape coefficient size mismatch");
  flat += tmpl.shape_basis[part] * params.shape;
  std::vector<Vec3> out(n);
  for (int v = 0; v < n; ++v) out[v] = flat.segment<3>(3 * v);
  return out;
}

std::vector<Vec3> part_vertices_global(const GlossTemplate& tmpl, int part,
                                       const PartParams& params) {
  std::vector<Vec3> local = part_vertices_local(tmpl, part, params);
  const Mat3 rot = rodrigues_to_matrix(params.rotation);
  for (Vec3& v : local) v = rot * v + params.location;
  return local;
}

std::vector<std::vector<Vec3>> all_part_vertices_global(
    const GlossTemplate& tmpl, const GlossParams& params) {
  std::vector<std::vector<Vec3>> out(tmpl.part_count());
  for (int i = 0; i < tmpl.part_count(); ++i)
    out[i] = part_vertices_global(tmpl, i, params.parts[i]);
  return out;
}

std::vector<Vec3> merge_part_vertices(
    const std::vector<std::vector<Vec3>>& part_verts,
    const GlossTemplate& tmpl) {
  std::vector<Vec3> merged(tmpl.merged_vertex_count(), Vec3::Zero());
  std::vector<int> copies(tmpl.merged_vertex_count(), 0);
  for (int i = 0; i < tmpl.part_count(); ++i) {
    const PartMesh& pm = tmpl.parts[i];
    for (int v = 0; v < pm.vertex_count(); ++v) {
      merged[pm.merged_index[v]] += part_verts[i][v];
      ++copies[pm.merged_index[v]];
    }
  }
  for (int m = 0; m < tmpl.merged_vertex_count(); ++m) {
    if (copies[m] == 0)
      throw validation_error("merged vertex without any part copy");
    merged[m] /= static_cast<double>(copies[m]);
  }
  return merged;
}

Mesh merge_parts(const GlossParams& params, const GlossTemplate& tmpl) {
  Mesh out;
  out.faces = tmpl.merged_mesh.faces;
  out.vertices =
      merge_part_vertices(all_part_vertices_global(tmpl, params), tmpl);
  return out;
}

int gloss_param_dimension(const GlossTemplate& tmpl) {
  int dim = 0;
  for (int i = 0; i < tmpl.part_count(); ++i)
    dim += 13 + tmpl.pose_basis[i].component_count();
  return dim;
}

VecX pack_gloss_params(const GlossParams& params) {
  int dim = 0;
  for (const PartParams& p : params.parts)
    dim += 13 + static_cast<int>(p.pose_deform.size());
  VecX x(dim);
  int at = 0;
  for (const PartParams& p : params.parts) {
    x.segment<3>(at) = p.location;
    x.segment<3>(at + 3) = p.rotation;
    x.segment(at + 6, 7) = p.shape;
    x.segment(at + 13, p.pose_deform.size()) = p.pose_deform;
    at += 13 + static_cast<int>(p.pose_deform.size());
  }
  return x;
}

GlossParams unpack_gloss_params(const GlossTemplate& tmpl, const VecX& x) {
  if (x.size() != gloss_param_dimension(tmpl))
    throw validation_error("packed parameter size mismatch");
  GlossParams params;
  params.parts.resize(tmpl.part_count());
  int at = 0;
  for (int i = 0; i < tmpl.part_count(); ++i) {
    PartParams& p = params.parts[i];
    const int nd = tmpl.pose_basis[i].component_count();
    p.location = x.segment<3>(at);
    p.rotation = x.segment<3>(at + 3);
    p.shape = x.segment(at + 6, 7);
    p.pose_deform = x.segment(at + 13, nd);
    at += 13 + nd;
  }
  return params;
}

void write_gloss_params_json(const std::string& path, const GlossParams& p) {
  nlohmann::json arr = nlohmann::json::array();
  for (const PartParams& part : p.parts) {
    nlohmann::json jp;
    jp["location"] = {part.location.x(), part.location.y(), part.location.z()};
    jp["rodrigues"] = {part.rotation.x(), part.rotation.y(), part.rotation.z()};
    jp["shape"] = std::vector<double>(part.shape.data(),
                                      part.shape.data() + part.shape.size());
    jp["pose_deform"] =
        std::vector<double>(part.pose_deform.data(),
                            part.pose_deform.data() + part.pose_deform.size());
    arr.push_back(std::move(jp));
  }
  std::ofstream out(path);
  if (!out) throw io_error("cannot write params file: " + path);
  out << arr.dump(2) << '\n';
}

GlossParams read_gloss_params_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot open params file: " + path);
  nlohmann::json arr;
  try {
    in >> arr;
  } catch (const std::exception& e) {
    throw io_error("params JSON parse error in " + path + ": " + e.what());
  }
  GlossParams p;
  for (const auto& jp : arr) {
    PartParams part;
    for (int c = 0; c < 3; ++c) {
      part.location[c] = jp.at("location").at(c).get<double>();
      part.rotation[c] = jp.at("rodrigues").at(c).get<double>();
    }
    const auto shape = jp.at("shape").get<std::vector<double>>();
    const auto pd = jp.at("pose_deform").get<std::vector<double>>();
    part.shape = Eigen::Map<const VecX>(shape.data(), shape.size());
    part.pose_deform = Eigen::Map<const VecX>(pd.data(), pd.size());
    p.parts.push_back(std::move(part));
  }
  return p;
}

}  // namespace smal
