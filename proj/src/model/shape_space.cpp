#include "smal/model/shape_space.hpp"

#include <Eigen/SVD>

namespace smal {

VecX flatten_vertices(const std::vector<Vec3>& vertices) {
  VecX flat(3 * vertices.size());
  for (size_t v = 0; v < vertices.size(); ++v)
    flat.segment<3>(3 * v) = vertices[v];
  return flat;
}

std::vector<Vec3> unflatten_vertices(const VecX& flat) {
  std::vector<Vec3> out(flat.size() / 3);
  for (size_t v = 0; v < out.size(); ++v) out[v] = flat.segment<3>(3 * v);
  return out;
}

VecX ShapeSpace::reconstruct(const VecX& coefficients) const {
  if (coefficients.size() > basis.cols())
    throw validation_error("too many shape coefficients");
  return mean_shape + basis.leftCols(coefficients.size()) * coefficients;
}

VecX ShapeSpace::project(const VecX& flat_vertices) const {
  return basis.transpose() * (flat_vertices - mean_shape);
}

ShapeSpace build_shape_space(const std::vector<std::vector<Vec3>>& meshes,
                             int n_components) {
  const int n = static_cast<int>(meshes.size());
  if (n < 2) throw validation_error("shape space needs at least 2 meshes");
  const int dim = 3 * static_cast<int>(meshes.front().size());
  for (const auto& m : meshes)
    if (3 * static_cast<int>(m.size()) != dim)
      throw validation_error("shape samples must share one topology");
  if (n_components > std::min(dim, n - 1))
    throw validation_error("requested more components than available: " +
                           std::to_string(n_components));

  ShapeSpace space;
  space.mean_shape = VecX::Zero(dim);
  for (const auto& m : meshes) space.mean_shape += flatten_vertices(m);
  space.mean_shape /= static_cast<double>(n);

  MatX centered(n, dim);
  for (int i = 0; i < n; ++i)
    centered.row(i) = (flatten_vertices(meshes[i]) - space.mean_shape).transpose();

  Eigen::JacobiSVD<MatX> svd(centered, Eigen::ComputeThinV);
  space.basis = svd.matrixV().leftCols(n_components);
  space.eigenvalues =
      svd.singularValues().head(n_components).array().square() / (n - 1.0);
  // Deterministic column signs.
  for (int c = 0; c < n_components; ++c) {
    int idx;
    space.basis.col(c).cwiseAbs().maxCoeff(&idx);
    if (space.basis(idx, c) < 0) space.basis.col(c) = -space.basis.col(c);
  }
  return space;
}

}  // namespace smal
