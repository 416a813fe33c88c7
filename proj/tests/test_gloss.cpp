#include <doctest.h>

#include <random>

#include "smal/geometry/metrics.hpp"
#include "smal/geometry/rotations.hpp"
#include "smal/gloss/fit.hpp"
#include "smal/optim/gradcheck.hpp"
#include "smal/synth/synth.hpp"

using namespace smal;

namespace {

const GlossTemplate& shared_template() {
  static GlossTemplate t = make_template(0.8);
  return t;
}

std::map<std::string, Vec3> template_keypoints(const GlossTemplate& t,
                                               const Mesh& mesh) {
  std::map<std::string, Vec3> k;
  for (const auto& [name, m] : t.scan_keypoint_vertices)
    k[name] = mesh.vertices[m];
  return k;
}

GlossParams randomized_params(const GlossTemplate& t, uint64_t seed,
                              double scale) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  GlossParams p = GlossParams::neutral(t);
  for (PartParams& part : p.parts) {
    part.location += scale * 0.05 * Vec3(g(rng), g(rng), g(rng));
    part.rotation = scale * 0.15 * Vec3(g(rng), g(rng), g(rng));
    for (int c = 0; c < 7; ++c) part.shape[c] = scale * 0.05 * g(rng);
    for (int c = 0; c < part.pose_deform.size(); ++c)
      part.pose_deform[c] = scale * 0.02 * g(rng);
  }
  return p;
}

}  // namespace

TEST_CASE("shape basis columns follow the analytic definitions") {
  std::vector<Vec3> part = {{1, 2, 3}, {0.5, -1, 2}, {-1, 0, 1}, {2, 2, -2}};
  const MatX basis = build_shape_basis(part);
  REQUIRE(basis.rows() == 12);
  REQUIRE(basis.cols() == 7);

  // Uniform scale displaces (1,2,3) by c*(1,2,3).
  const double c = 0.37;
  CHECK(basis.block<3, 1>(0, 0).isApprox(Vec3(1, 2, 3), 1e-15));

  // Stretch-x on (1, y, z): y and z scale in proportion to x = 1, x fixed.
  VecX coeff = VecX::Zero(7);
  coeff[4] = c;
  const VecX displaced = basis * coeff;
  CHECK(displaced[0] == 0.0);
  CHECK(displaced[1] == doctest::Approx(c * 2.0));
  CHECK(displaced[2] == doctest::Approx(c * 3.0));

  // Zero coefficients leave the template unchanged.
  CHECK((basis * VecX::Zero(7)).norm() == 0.0);
}

TEST_CASE("pose basis on synthetic bend frames reconstructs held-out frame") {
  // Capsule-ish part: two rings along z.
  std::vector<Vec3> part;
  for (int r = 0; r < 4; ++r)
    for (int k = 0; k < 8; ++k)
      part.push_back(Vec3(0.3 * std::cos(2 * M_PI * k / 8),
                          0.3 * std::sin(2 * M_PI * k / 8), 0.25 * r));
  const int dim = static_cast<int>(part.size()) * 3;
  auto bend = [&](double amount) {
    VecX d(dim);
    for (size_t v = 0; v < part.size(); ++v) {
      const double z = part[v].z();
      // Rotation-like displacement about the x axis, growing with z.
      d.segment<3>(3 * v) =
          Vec3(0, -amount * z * z, amount * z * part[v].y());
    }
    return d;
  };
  std::vector<VecX> frames;
  for (int f = 0; f < 20; ++f) frames.push_back(bend(-0.5 + f * 0.05));
  const PosePartBasis basis = build_pose_basis(frames, 0.9, 5);
  CHECK(basis.component_count() >= 1);

  const VecX held_out = bend(0.62);
  const VecX coeff = basis.basis.transpose() * (held_out - basis.mean);
  const VecX recon = basis.mean + basis.basis * coeff;
  CHECK((recon - held_out).norm() < 0.1 * held_out.norm());

  // Degenerate cases.
  std::vector<VecX> same(3, VecX::Zero(dim));
  const PosePartBasis none = build_pose_basis(same, 0.9, 5);
  CHECK(none.component_count() == 0);
  CHECK(none.mean.norm() == 0.0);

  std::vector<VecX> pair = {bend(0.3), bend(-0.3)};
  const PosePartBasis rank1 = build_pose_basis(pair, 0.9, 5);
  CHECK(rank1.component_count() == 1);
}

TEST_CASE("part vertices match a dense matrix oracle") {
  const GlossTemplate& t = shared_template();
  std::mt19937_64 rng(5);
  std::normal_distribution<double> g(0.0, 0.3);
  for (int part = 0; part < t.part_count(); part += 7) {
    PartParams p;
    p.location = Vec3(g(rng), g(rng), g(rng));
    p.rotation = Vec3(g(rng), g(rng), g(rng)) * 0.5;
    p.shape = VecX::Zero(7);
    for (int c = 0; c < 7; ++c) p.shape[c] = 0.2 * g(rng);
    p.pose_deform = VecX::Zero(t.pose_basis[part].component_count());
    for (int c = 0; c < p.pose_deform.size(); ++c) p.pose_deform[c] = 0.1 * g(rng);

    // Independent dense arithmetic.
    const int nv = t.parts[part].vertex_count();
    VecX flat(3 * nv);
    for (int v = 0; v < nv; ++v)
      flat.segment<3>(3 * v) = t.parts[part].vertices[v];
    flat += t.shape_basis[part] * p.shape;
    if (p.pose_deform.size() > 0)
      flat += t.pose_basis[part].basis * p.pose_deform;

    const auto local = part_vertices_local(t, part, p);
    for (int v = 0; v < nv; ++v)
      CHECK((local[v] - Vec3(flat.segment<3>(3 * v))).norm() < 1e-12);

    const Mat3 rot = rodrigues_to_matrix(p.rotation);
    const auto global = part_vertices_global(t, part, p);
    for (int v = 0; v < nv; ++v)
      CHECK((global[v] - (rot * local[v] + p.location)).norm() < 1e-12);
  }
}

TEST_CASE("neutral self-registration has zero data terms") {
  const GlossTemplate& t = shared_template();
  const GlossParams neutral = GlossParams::neutral(t);
  GlossEnergy energy(t, t.merged_mesh,
                     template_keypoints(t, t.merged_mesh), GlossWeights{});
  energy.refresh_correspondences(neutral);
  const auto terms = energy.term_values(neutral);
  CHECK(terms.at("E_stitch") == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(terms.at("E_curv") == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(terms.at("E_m2s") == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(terms.at("E_s2m") == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(terms.at("E_kp") == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(terms.at("E_pose") == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(energy.evaluate(neutral, nullptr) == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("detaching a part yields the closed-form stitch energy") {
  const GlossTemplate& t = shared_template();
  GlossParams p = GlossParams::neutral(t);
  const double delta = 0.05;
  const int part = 8;  // head: one interface with the neck plus children
  p.parts[part].location += Vec3(delta, 0, 0);

  GlossWeights w;
  w.k_st = 1.0;
  GlossEnergy energy(t, t.merged_mesh, {}, w);
  energy.refresh_correspondences(GlossParams::neutral(t));
  const auto terms = energy.term_values(p);
  int pair_count = 0;
  for (const PartInterface& itf : t.interfaces)
    if (itf.part_a == part || itf.part_b == part)
      pair_count += static_cast<int>(itf.pairs.size());
  CHECK(terms.at("E_stitch") ==
        doctest::Approx(pair_count * delta * delta).epsilon(1e-9));
}

TEST_CASE("symmetry term vanishes for shared shape coefficients") {
  const GlossTemplate& t = shared_template();
  GlossParams p = GlossParams::neutral(t);
  for (PartParams& part : p.parts) part.shape.setConstant(0.2);
  GlossEnergy energy(t, t.merged_mesh, {}, GlossWeights{});
  CHECK(energy.term_values(p).at("E_sm") == 0.0);
  p.parts[14].shape[1] += 0.1;  // break one limb pair
  CHECK(energy.term_values(p).at("E_sm") > 0.0);
}

TEST_CASE("energy is non-negative for non-negative weights") {
  const GlossTemplate& t = shared_template();
  GlossEnergy energy(t, t.merged_mesh, template_keypoints(t, t.merged_mesh),
                     GlossWeights{});
  for (int trial = 0; trial < 5; ++trial) {
    const GlossParams p = randomized_params(t, 100 + trial, 1.0);
    energy.refresh_correspondences(p);
    CHECK(energy.evaluate(p, nullptr) >= 0.0);
  }
}

TEST_CASE("gloss gradient matches finite differences") {
  const GlossTemplate& t = shared_template();
  SynthSpec spec;
  spec.recipe = family_recipe("generic");
  spec.noise_level = 0.005;
  const SynthAnimal animal = sample_animal(t, spec, 3);

  GlossEnergy energy(t, animal.scan, animal.scan_keypoints, GlossWeights{});
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 3; ++trial) {
    const GlossParams p = randomized_params(t, 55 + trial, 0.6);
    energy.refresh_correspondences(p);
    const double err =
        check_gradient(energy.as_energy_function(), pack_gloss_params(p), 1e-6);
    CHECK(err < 1e-4);
  }
}

TEST_CASE("merged mesh midpoint rule") {
  const GlossTemplate& t = shared_template();
  GlossParams p = GlossParams::neutral(t);
  const int part = 7;  // neck
  const Vec3 delta(0.0, 0.02, 0.0);
  p.parts[part].location += delta;
  const Mesh merged = merge_parts(p, t);
  // A vertex duplicated between neck and torso ends up at the midpoint.
  const PartInterface* itf = nullptr;
  for (const PartInterface& i : t.interfaces)
    if (i.part_a == part && i.part_b == 6) itf = &i;
  REQUIRE(itf != nullptr);
  const auto& [va, vb] = itf->pairs.front();
  const int m = t.parts[part].merged_index[va];
  const Vec3 expected = t.merged_mesh.vertices[m] + 0.5 * delta;
  CHECK((merged.vertices[m] - expected).norm() < 1e-12);
}

TEST_CASE("fit recovers the template from itself") {
  const GlossTemplate& t = shared_template();
  GlossFitConfig config;
  config.solver.max_iterations = 150;
  const GlossFitResult fit = fit_gloss(
      t, t.merged_mesh, template_keypoints(t, t.merged_mesh), config);
  double max_s = 0, max_d = 0, max_r = 0;
  for (const PartParams& p : fit.params.parts) {
    max_s = std::max(max_s, p.shape.cwiseAbs().maxCoeff());
    if (p.pose_deform.size() > 0)
      max_d = std::max(max_d, p.pose_deform.cwiseAbs().maxCoeff());
    max_r = std::max(max_r, p.rotation.cwiseAbs().maxCoeff());
  }
  CHECK(max_s < 1e-3);
  CHECK(max_d < 1e-3);
  CHECK(max_r < 1e-3);
}

TEST_CASE("fit recovers a rigidly rotated template") {
  const GlossTemplate& t = shared_template();
  const Vec3 axis(0, 0, M_PI / 6.0);  // 30 degrees about z
  const Mat3 rot = rodrigues_to_matrix(axis);
  Mesh scan = t.merged_mesh;
  for (Vec3& v : scan.vertices) v = rot * v;
  std::map<std::string, Vec3> kps = template_keypoints(t, scan);

  GlossFitConfig config;
  config.solver.max_iterations = 5000;
  config.correspondence_rounds = 4;
  const GlossFitResult fit = fit_gloss(t, scan, kps, config);
  for (int i = 0; i < fit.params.part_count(); ++i) {
    const Mat3 r = rodrigues_to_matrix(fit.params.parts[i].rotation);
    const double angle_err = matrix_to_rodrigues(r.transpose() * rot).norm();
    CAPTURE(t.parts[i].name);
    // Thin tube-like parts are rotationally soft about their own axis, so
    // their residual twist is bounded loosely; bulky parts must match.
    const PartCategory cat = part_category(t.parts[i].name);
    const bool bulky = cat == PartCategory::Torso || cat == PartCategory::Neck ||
                       cat == PartCategory::Head;
    CHECK(angle_err < (bulky ? 0.08 : 0.35));
  }
  const Mesh fitted = merge_parts(fit.params, t);
  double rmse = 0;
  for (int v = 0; v < fitted.vertex_count(); ++v)
    rmse += (fitted.vertices[v] - scan.vertices[v]).squaredNorm();
  rmse = std::sqrt(rmse / fitted.vertex_count());
  CHECK(rmse < 0.01 * bbox_diagonal(scan));
}

TEST_CASE("fit aligns a synthetic animal") {
  const GlossTemplate& t = shared_template();
  SynthSpec spec;
  spec.recipe = family_recipe("feline");
  spec.noise_level = 0.01;
  const SynthAnimal animal = sample_animal(t, spec, 21);

  GlossFitConfig config;
  const GlossFitResult fit =
      fit_gloss(t, animal.scan, animal.scan_keypoints, config);
  const Mesh fitted = merge_parts(fit.params, t);
  const double dist = scan_to_mesh_distance(animal.scan.vertices, fitted);
  CHECK(dist < 0.05 * bbox_diagonal(animal.scan));
}

TEST_CASE("rigid equivariance of the fitted energy") {
  const GlossTemplate& t = shared_template();
  SynthSpec spec;
  spec.recipe = family_recipe("generic");
  spec.noise_level = 0.005;
  spec.pose_scale = 0.5;
  const SynthAnimal animal = sample_animal(t, spec, 5);

  GlossFitConfig config;
  const GlossFitResult base =
      fit_gloss(t, animal.scan, animal.scan_keypoints, config);

  // Transform scan, keypoints, and the initialization together.
  const Mat3 rot = rodrigues_to_matrix(Vec3(0.1, 0.7, -0.2));
  const Vec3 shift(0.4, -0.2, 0.3);
  Mesh moved = animal.scan;
  for (Vec3& v : moved.vertices) v = rot * v + shift;
  std::map<std::string, Vec3> kps;
  for (const auto& [name, p] : animal.scan_keypoints) kps[name] = rot * p + shift;

  GlossParams init = GlossParams::neutral(t);
  const Vec3 med_shift = vertex_median(animal.scan.vertices) -
                         vertex_median(t.merged_mesh.vertices);
  for (PartParams& p : init.parts) p.location += med_shift;
  GlossParams init_moved = init;
  for (PartParams& p : init_moved.parts) {
    p.location = rot * p.location + shift;
    p.rotation = matrix_to_rodrigues(rot * rodrigues_to_matrix(p.rotation));
  }
  const GlossFitResult base2 =
      fit_gloss(t, animal.scan, animal.scan_keypoints, config, &init);
  const GlossFitResult transformed =
      fit_gloss(t, moved, kps, config, &init_moved);

  const double rel =
      std::abs(transformed.final_energy - base2.final_energy) /
      std::max(1.0, std::max(base2.final_energy, base.final_energy));
  CHECK(rel < 0.1);
}
