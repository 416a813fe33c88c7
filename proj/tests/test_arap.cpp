#include <doctest.h>

#include <random>

#include "smal/arap/arap.hpp"
#include "smal/geometry/metrics.hpp"
#include "smal/geometry/rotations.hpp"
#include "smal/gloss/fit.hpp"
#include "smal/synth/synth.hpp"

using namespace smal;

namespace {

const GlossTemplate& shared_template() {
  static GlossTemplate t = make_template(0.8);
  return t;
}

std::map<std::string, int> template_keypoint_vertices(const GlossTemplate& t) {
  return t.scan_keypoint_vertices;
}

}  // namespace

TEST_CASE("arap energy vanishes at the rest shape and under global rotation") {
  const GlossTemplate& t = shared_template();
  const Mesh& mesh = t.merged_mesh;
  const auto adjacency = vertex_adjacency(mesh);

  std::vector<Mat3> identity(mesh.vertex_count(), Mat3::Identity());
  CHECK(arap_energy(mesh.vertices, identity, mesh.vertices, adjacency) ==
        doctest::Approx(0.0));

  const Mat3 rot = rodrigues_to_matrix(Vec3(0.4, -0.3, 1.1));
  std::vector<Vec3> rotated(mesh.vertices.size());
  for (size_t i = 0; i < mesh.vertices.size(); ++i)
    rotated[i] = rot * mesh.vertices[i];
  const auto fitted = fit_cell_rotations(rotated, mesh.vertices, adjacency);
  CHECK(arap_energy(rotated, fitted, mesh.vertices, adjacency) ==
        doctest::Approx(0.0).epsilon(1e-12));
  for (const Mat3& r : fitted)
    CHECK((r - rot).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("arap energy of a single displaced vertex matches the closed form") {
  const GlossTemplate& t = shared_template();
  const Mesh& mesh = t.merged_mesh;
  const auto adjacency = vertex_adjacency(mesh);
  std::vector<Vec3> v = mesh.vertices;
  const int moved = 100;
  const Vec3 delta(0.01, -0.02, 0.015);
  v[moved] += delta;
  std::vector<Mat3> identity(mesh.vertex_count(), Mat3::Identity());
  // With identity rotations, each incident directed edge (in both cells)
  // contributes |delta|^2.
  const double expected =
      2.0 * adjacency[moved].size() * delta.squaredNorm();
  CHECK(arap_energy(v, identity, mesh.vertices, adjacency) ==
        doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("arap gradient matches finite differences") {
  const GlossTemplate& t = shared_template();
  Mesh small;  // use a small patch for FD speed
  small.vertices = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {1, 1, 0.2}, {0.5, 0.5, 0.7}};
  small.faces = {{0, 1, 4}, {1, 3, 4}, {3, 2, 4}, {2, 0, 4}};
  const auto adjacency = vertex_adjacency(small);
  std::mt19937_64 rng(2);
  std::normal_distribution<double> g(0.0, 0.1);
  std::vector<Vec3> v = small.vertices;
  for (Vec3& p : v) p += Vec3(g(rng), g(rng), g(rng));
  const auto rotations = fit_cell_rotations(v, small.vertices, adjacency);

  std::vector<Vec3> grad(v.size(), Vec3::Zero());
  arap_energy(v, rotations, small.vertices, adjacency, &grad);
  const double eps = 1e-7;
  for (size_t i = 0; i < v.size(); ++i) {
    for (int c = 0; c < 3; ++c) {
      auto vp = v, vm = v;
      vp[i][c] += eps;
      vm[i][c] -= eps;
      const double fd = (arap_energy(vp, rotations, small.vertices, adjacency) -
                         arap_energy(vm, rotations, small.vertices, adjacency)) /
                        (2 * eps);
      CHECK(std::abs(fd - grad[i][c]) < 1e-6);
    }
  }
}

TEST_CASE("refine is a fixed point when the scan equals the initial mesh") {
  const GlossTemplate& t = shared_template();
  ArapProblem problem;
  problem.initial_vertices = t.merged_mesh.vertices;
  problem.faces = t.merged_mesh.faces;
  problem.scan = t.merged_mesh;
  problem.keypoint_vertices = template_keypoint_vertices(t);
  for (const auto& [name, m] : t.scan_keypoint_vertices)
    problem.scan_keypoints[name] = t.merged_mesh.vertices[m];
  const ArapResult result = refine(problem);
  for (int i = 0; i < t.merged_vertex_count(); ++i)
    CHECK((result.vertices[i] - t.merged_mesh.vertices[i]).norm() < 1e-6);
}

TEST_CASE("huge coupling weight pins the output to the target") {
  const GlossTemplate& t = shared_template();
  std::mt19937_64 rng(5);
  std::normal_distribution<double> g(0.0, 0.01);
  ArapProblem problem;
  problem.initial_vertices = t.merged_mesh.vertices;
  problem.faces = t.merged_mesh.faces;
  problem.scan = t.merged_mesh;
  problem.coupling_target = t.merged_mesh.vertices;
  for (Vec3& p : problem.coupling_target) p += Vec3(g(rng), g(rng), g(rng));
  problem.coupling_weight = 1e9;
  const ArapResult result = refine(problem);
  for (int i = 0; i < t.merged_vertex_count(); ++i)
    CHECK((result.vertices[i] - problem.coupling_target[i]).norm() < 1e-3);
}

TEST_CASE("energy trace is monotonically non-increasing") {
  const GlossTemplate& t = shared_template();
  SynthSpec spec;
  spec.recipe = family_recipe("canine");
  spec.noise_level = 0.01;
  const SynthAnimal animal = sample_animal(t, spec, 9);

  ArapProblem problem;
  problem.initial_vertices = t.merged_mesh.vertices;
  problem.faces = t.merged_mesh.faces;
  problem.scan = animal.scan;
  problem.scan_keypoints = animal.scan_keypoints;
  problem.keypoint_vertices = template_keypoint_vertices(t);
  const ArapResult result = refine(problem);
  for (size_t i = 1; i < result.energy_trace.size(); ++i)
    CHECK(result.energy_trace[i] <=
          result.energy_trace[i - 1] + 1e-9 * (1 + result.energy_trace[i - 1]));
}

TEST_CASE("refinement tightens a part-model fit substantially") {
  const GlossTemplate& t = shared_template();
  SynthSpec spec;
  spec.recipe = family_recipe("feline");
  spec.noise_level = 0.01;
  const SynthAnimal animal = sample_animal(t, spec, 31);

  GlossFitConfig config;
  const GlossFitResult fit =
      fit_gloss(t, animal.scan, animal.scan_keypoints, config);
  const Mesh fitted = merge_parts(fit.params, t);
  const double before = scan_to_mesh_distance(animal.scan.vertices, fitted);

  ArapProblem problem;
  problem.initial_vertices = fitted.vertices;
  problem.faces = fitted.faces;
  problem.scan = animal.scan;
  problem.scan_keypoints = animal.scan_keypoints;
  problem.keypoint_vertices = template_keypoint_vertices(t);
  const ArapResult result = refine(problem);
  Mesh refined = fitted;
  refined.vertices = result.vertices;
  const double after = scan_to_mesh_distance(animal.scan.vertices, refined);
  MESSAGE("scan-to-mesh before ", before, " after ", after);
  CHECK(after < before * 0.7);
}
