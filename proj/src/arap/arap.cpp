#include "smal/arap/arap.hpp"

#include <Eigen/Sparse>
#include <Eigen/SVD>
#include <cmath>

#include "smal/geometry/spatial_grid.hpp"
#include "smal/optim/robust.hpp"

namespace smal {

namespace {

struct DataTerms {
  // Quadratic pulls: per vertex, weight and target (from robust surrogates).
  std::vector<double> vertex_weight;       // m2s + s2m + kp, accumulated
  std::vector<Vec3> vertex_pull;           // weight * target, accumulated
  double energy = 0.0;                     // true (non-surrogate) value
};

}  // namespace

double arap_energy(const std::vector<Vec3>& vertices,
                   const std::vector<Mat3>& rotations,
                   const std::vector<Vec3>& rest,
                   const std::vector<std::vector<int>>& adjacency,
                   std::vector<Vec3>* grad) {
  const int n = static_cast<int>(vertices.size());
  if (static_cast<int>(rotations.size()) != n)
    throw validation_error("one rotation per vertex cell required");
  double energy = 0.0;
  for (int i = 0; i < n; ++i) {
    if (adjacency[i].empty())
      throw validation_error("vertex " + std::to_string(i) +
                             " has a degenerate (edgeless) cell");
    for (int j : adjacency[i]) {
      const Vec3 d =
          (vertices[i] - vertices[j]) - rotations[i] * (rest[i] - rest[j]);
      energy += d.squaredNorm();
      if (grad) {
        (*grad)[i] += 2.0 * d;
        (*grad)[j] -= 2.0 * d;
      }
    }
  }
  return energy;
}

std::vector<Mat3> fit_cell_rotations(
    const std::vector<Vec3>& vertices, const std::vector<Vec3>& rest,
    const std::vector<std::vector<int>>& adjacency) {
  const int n = static_cast<int>(vertices.size());
  std::vector<Mat3> rotations(n);
  for (int i = 0; i < n; ++i) {
    Mat3 s = Mat3::Zero();
    for (int j : adjacency[i])
      s += (rest[i] - rest[j]) * (vertices[i] - vertices[j]).transpose();
    Eigen::JacobiSVD<Mat3> svd(s, Eigen::ComputeFullU | Eigen::ComputeFullV);
    Mat3 r = svd.matrixV() * svd.matrixU().transpose();
    if (r.determinant() < 0) {
      Mat3 v = svd.matrixV();
      v.col(2) = -v.col(2);
      r = v * svd.matrixU().transpose();
    }
    rotations[i] = r;
  }
  return rotations;
}

ArapResult refine(const ArapProblem& problem) {
  const int n = static_cast<int>(problem.initial_vertices.size());
  if (n == 0) throw validation_error("empty refinement problem");
  for (const Vec3& v : problem.initial_vertices)
    if (!v.allFinite()) throw validation_error("non-finite initial vertex");
  const bool coupled = !problem.coupling_target.empty();
  if (coupled && static_cast<int>(problem.coupling_target.size()) != n)
    throw validation_error("coupling target size mismatch");

  Mesh shape;
  shape.vertices = problem.initial_vertices;
  shape.faces = problem.faces;
  const auto adjacency = vertex_adjacency(shape);
  for (int i = 0; i < n; ++i)
    if (adjacency[i].empty())
      throw validation_error("vertex " + std::to_string(i) +
                             " has no incident edges");

  const std::vector<Vec3>& rest = problem.initial_vertices;
  const double sigma = problem.data.sigma > 0
                           ? problem.data.sigma
                           : 0.1 * bbox_diagonal(problem.scan);
  const GemanMcClure rho(sigma);
  const double l1_eps = 1e-6 * std::max(1.0, bbox_diagonal(problem.scan));

  PointGrid scan_grid(problem.scan.vertices);

  // Keypoint pulls (fixed over the run).
  std::vector<std::pair<int, Vec3>> keypoint_pulls;
  for (const auto& [name, target] : problem.scan_keypoints) {
    auto it = problem.keypoint_vertices.find(name);
    if (it == problem.keypoint_vertices.end())
      throw validation_error("keypoint '" + name + "' has no template vertex");
    keypoint_pulls.emplace_back(it->second, target);
  }

  std::vector<Vec3> v = problem.initial_vertices;
  std::vector<int> m2s_nn(n);
  std::vector<int> s2m_nn(problem.scan.vertices.size());
  auto refresh_correspondences = [&]() {
    for (int i = 0; i < n; ++i) m2s_nn[i] = scan_grid.nearest(v[i]);
    PointGrid model_grid(v);
    for (size_t s = 0; s < problem.scan.vertices.size(); ++s)
      s2m_nn[s] = model_grid.nearest(problem.scan.vertices[s]);
  };
  refresh_correspondences();

  auto data_energy = [&]() {
    double e = 0.0;
    for (int i = 0; i < n; ++i)
      e += problem.data.k_m2s *
           rho.value((v[i] - problem.scan.vertices[m2s_nn[i]]).squaredNorm());
    for (size_t s = 0; s < problem.scan.vertices.size(); ++s)
      e += problem.data.k_s2m *
           rho.value((v[s2m_nn[s]] - problem.scan.vertices[s]).squaredNorm());
    for (const auto& [idx, target] : keypoint_pulls)
      e += problem.data.k_kp * (v[idx] - target).squaredNorm();
    if (coupled)
      for (int i = 0; i < n; ++i)
        e += problem.coupling_weight *
             (v[i] - problem.coupling_target[i]).cwiseAbs().sum();
    return e;
  };

  std::vector<Mat3> rotations = fit_cell_rotations(v, rest, adjacency);
  ArapResult result;
  double energy = problem.arap_weight *
                      arap_energy(v, rotations, rest, adjacency) +
                  data_energy();
  result.energy_trace.push_back(energy);

  // Laplacian of the rigidity term: 4 w (deg I - A).
  Eigen::SparseMatrix<double> laplacian(n, n);
  {
    std::vector<Eigen::Triplet<double>> trips;
    for (int i = 0; i < n; ++i) {
      trips.emplace_back(i, i, 4.0 * problem.arap_weight * adjacency[i].size());
      for (int j : adjacency[i])
        trips.emplace_back(i, j, -4.0 * problem.arap_weight);
    }
    laplacian.setFromTriplets(trips.begin(), trips.end());
  }

  for (int iter = 1; iter <= problem.max_iterations; ++iter) {
    if (iter % problem.correspondence_refresh_period == 0)
      refresh_correspondences();

    // Local step.
    rotations = fit_cell_rotations(v, rest, adjacency);

    // Global step: quadratic surrogates around the current iterate.
    std::vector<double> diag(n, 0.0);
    std::vector<Vec3> pull(n, Vec3::Zero());
    for (int i = 0; i < n; ++i) {
      const Vec3& target = problem.scan.vertices[m2s_nn[i]];
      const double a = problem.data.k_m2s *
                       rho.derivative((v[i] - target).squaredNorm());
      diag[i] += 2.0 * a;
      pull[i] += 2.0 * a * target;
    }
    for (size_t s = 0; s < problem.scan.vertices.size(); ++s) {
      const Vec3& target = problem.scan.vertices[s];
      const int i = s2m_nn[s];
      const double a = problem.data.k_s2m *
                       rho.derivative((v[i] - target).squaredNorm());
      diag[i] += 2.0 * a;
      pull[i] += 2.0 * a * target;
    }
    for (const auto& [idx, target] : keypoint_pulls) {
      diag[idx] += 2.0 * problem.data.k_kp;
      pull[idx] += 2.0 * problem.data.k_kp * target;
    }

    // Rigidity right-hand side.
    std::vector<Vec3> rhs_arap(n, Vec3::Zero());
    for (int i = 0; i < n; ++i)
      for (int j : adjacency[i])
        rhs_arap[i] += 2.0 * problem.arap_weight *
                       ((rotations[i] + rotations[j]) * (rest[i] - rest[j]));

    if (!coupled) {
      Eigen::SparseMatrix<double> system = laplacian;
      for (int i = 0; i < n; ++i) system.coeffRef(i, i) += diag[i];
      Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver(system);
      if (solver.info() != Eigen::Success)
        throw solver_error("refinement system factorization failed");
      MatX rhs(n, 3);
      for (int i = 0; i < n; ++i)
        rhs.row(i) = (rhs_arap[i] + pull[i]).transpose();
      const MatX sol = solver.solve(rhs);
      for (int i = 0; i < n; ++i) v[i] = sol.row(i).transpose();
    } else {
      // L1 coupling weights differ per coordinate: one solve per axis.
      for (int axis = 0; axis < 3; ++axis) {
        Eigen::SparseMatrix<double> system = laplacian;
        VecX rhs(n);
        for (int i = 0; i < n; ++i) {
          const double r =
              std::abs(v[i][axis] - problem.coupling_target[i][axis]);
          const double u =
              problem.coupling_weight / (2.0 * std::max(r, l1_eps));
          system.coeffRef(i, i) += diag[i] + 2.0 * u;
          rhs[i] = rhs_arap[i][axis] + pull[i][axis] +
                   2.0 * u * problem.coupling_target[i][axis];
        }
        Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver(system);
        if (solver.info() != Eigen::Success)
          throw solver_error("refinement system factorization failed");
        const VecX sol = solver.solve(rhs);
        for (int i = 0; i < n; ++i) v[i][axis] = sol[i];
      }
    }

    rotations = fit_cell_rotations(v, rest, adjacency);
    const double new_energy = problem.arap_weight *
                                  arap_energy(v, rotations, rest, adjacency) +
                              data_energy();
    result.energy_trace.push_back(new_energy);
    result.iterations = iter;
    const double rel = (energy - new_energy) / std::max(1.0, energy);
    energy = new_energy;
    if (rel >= 0 && rel < problem.relative_tolerance) break;
  }
  result.vertices = std::move(v);
  return result;
}

}  // namespace smal
