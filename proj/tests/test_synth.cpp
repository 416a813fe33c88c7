#include <doctest.h>

#include <random>

#include "smal/geometry/metrics.hpp"
#include "smal/synth/synth.hpp"

using namespace smal;

namespace {
const GlossTemplate& shared_template() {
  static GlossTemplate t = make_template(1.0);
  return t;
}
}  // namespace

TEST_CASE("template has 33 parts and a valid rig") {
  const GlossTemplate& t = shared_template();
  CHECK(t.part_count() == 33);
  CHECK(t.tree.joint_count() == 33);
  CHECK(t.scan_keypoints.size() == 36);
  CHECK(t.image_keypoints.size() == 20);
  CHECK(t.merged_vertex_count() > 300);
  MESSAGE("merged vertices at res 1.0: ", t.merged_vertex_count());
  // validate() ran inside make_template; run again on the value
  CHECK_NOTHROW(t.validate());
}

TEST_CASE("template weights rows sum to one with at most 4 entries") {
  const GlossTemplate& t = shared_template();
  for (const auto& row : t.weights.rows) {
    CHECK(row.size() >= 1);
    CHECK(row.size() <= 4);
    double sum = 0;
    for (const auto& [j, w] : row) {
      CHECK(w >= 0.0);
      sum += w;
    }
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("template is sagittally symmetric") {
  const GlossTemplate& t = shared_template();
  const Mesh mirrored = mirror_sagittal(t.merged_mesh, t.mirror);
  for (int i = 0; i < t.merged_vertex_count(); ++i)
    CHECK((mirrored.vertices[i] - t.merged_mesh.vertices[i]).norm() < 1e-9);
}

TEST_CASE("every part owns at least 4 merged vertices") {
  const GlossTemplate& t = shared_template();
  std::vector<int> owned(t.part_count(), 0);
  for (int p : t.labeling.part_of_vertex) ++owned[p];
  for (int i = 0; i < t.part_count(); ++i) {
    CAPTURE(t.parts[i].name);
    CHECK(owned[i] >= 4);
  }
}

TEST_CASE("neutral interface duplicates coincide and merge to the template") {
  const GlossTemplate& t = shared_template();
  const GlossParams neutral = GlossParams::neutral(t);
  const Mesh merged = merge_parts(neutral, t);
  REQUIRE(merged.vertex_count() == t.merged_vertex_count());
  for (int v = 0; v < merged.vertex_count(); ++v)
    CHECK((merged.vertices[v] - t.merged_mesh.vertices[v]).norm() < 1e-9);
}

TEST_CASE("merged topology is constant across random params") {
  const GlossTemplate& t = shared_template();
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g(0.0, 0.1);
  int expected = -1;
  for (int trial = 0; trial < 20; ++trial) {
    GlossParams p = GlossParams::neutral(t);
    for (PartParams& part : p.parts) {
      part.location += Vec3(g(rng), g(rng), g(rng));
      part.rotation = Vec3(g(rng), g(rng), g(rng));
      for (int c = 0; c < 7; ++c) part.shape[c] = 0.3 * g(rng);
    }
    const Mesh merged = merge_parts(p, t);
    if (expected < 0) expected = merged.vertex_count();
    CHECK(merged.vertex_count() == expected);
    CHECK(merged.faces == t.merged_mesh.faces);
  }
}

TEST_CASE("template build is deterministic") {
  const GlossTemplate a = make_template(1.0);
  const GlossTemplate b = make_template(1.0);
  REQUIRE(a.merged_vertex_count() == b.merged_vertex_count());
  for (int v = 0; v < a.merged_vertex_count(); ++v)
    CHECK(a.merged_mesh.vertices[v] == b.merged_mesh.vertices[v]);
  for (int i = 0; i < a.part_count(); ++i) {
    CHECK(a.pose_basis[i].component_count() == b.pose_basis[i].component_count());
    if (a.pose_basis[i].component_count() > 0)
      CHECK((a.pose_basis[i].basis - b.pose_basis[i].basis).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("joint positions follow the interface centroid rule") {
  const GlossTemplate& t = shared_template();
  const auto joints = t.regress_joints(t.merged_mesh.vertices);
  for (int j = 0; j < t.part_count(); ++j)
    CHECK((joints[j] - t.tree.joint_positions[j]).norm() == 0.0);
}

TEST_CASE("higher resolution yields roughly 3k vertices") {
  const GlossTemplate t = make_template(1.8);
  MESSAGE("merged vertices at res 1.8: ", t.merged_vertex_count());
  CHECK(t.merged_vertex_count() > 1500);
}

TEST_CASE("neutral template has no self intersections") {
  const GlossTemplate& t = shared_template();
  CHECK_FALSE(has_self_intersections(t.merged_mesh, t.labeling, t.tree));
}

TEST_CASE("sampling is deterministic and zero spec reproduces the template") {
  const GlossTemplate& t = shared_template();
  SynthSpec spec;
  spec.recipe = family_recipe("generic");
  spec.recipe.jitter = 0.0;
  spec.pose_scale = 0.0;
  spec.noise_level = 0.0;
  spec.remesh = false;
  const SynthAnimal a = sample_animal(t, spec, 7);
  for (int v = 0; v < t.merged_vertex_count(); ++v)
    CHECK((a.scan.vertices[v] - t.merged_mesh.vertices[v]).norm() < 1e-9);

  SynthSpec spec2;
  spec2.recipe = family_recipe("feline");
  spec2.noise_level = 0.01;
  const SynthAnimal b1 = sample_animal(t, spec2, 42);
  const SynthAnimal b2 = sample_animal(t, spec2, 42);
  REQUIRE(b1.scan.vertex_count() == b2.scan.vertex_count());
  for (int v = 0; v < b1.scan.vertex_count(); ++v)
    CHECK(b1.scan.vertices[v] == b2.scan.vertices[v]);
  CHECK(b1.scan.faces == b2.scan.faces);
}

TEST_CASE("leg length recipe stretches leg keypoint spans") {
  const GlossTemplate& t = shared_template();
  SynthSpec base;
  base.recipe = family_recipe("generic");
  base.recipe.jitter = 0.0;
  base.pose_scale = 0.0;
  base.noise_level = 0.0;
  base.remesh = false;

  SynthSpec longer = base;
  longer.recipe.leg_length = 0.2;

  const SynthAnimal a = sample_animal(t, base, 1);
  const SynthAnimal b = sample_animal(t, longer, 1);
  // Knee-to-ankle span: the lower leg segment, fully covered by the recipe.
  const double da = (a.scan_keypoints.at("left_elbow") -
                     a.scan_keypoints.at("left_front_ankle"))
                        .norm();
  const double db = (b.scan_keypoints.at("left_elbow") -
                     b.scan_keypoints.at("left_front_ankle"))
                        .norm();
  CHECK(db / da == doctest::Approx(1.2).epsilon(0.03));
}

TEST_CASE("sampled scans stay close to the generating parameters") {
  const GlossTemplate& t = shared_template();
  SynthSpec spec;
  spec.recipe = family_recipe("canine");
  spec.noise_level = 0.01;
  const SynthAnimal a = sample_animal(t, spec, 11);
  // Plugging the generating parameters back in reproduces the scan up to
  // noise and remeshing.
  const Mesh model = merge_parts(a.true_params, t);
  std::vector<Vec3> scan_pts = a.scan.vertices;
  const double d = scan_to_mesh_distance(scan_pts, model);
  CHECK(d < spec.noise_level * bbox_diagonal(model) * 2.5);
}

TEST_CASE("family recipes are distinct") {
  for (const std::string& name : family_names()) {
    const FamilyRecipe r = family_recipe(name);
    CHECK(r.name == name);
  }
  CHECK_THROWS_AS(family_recipe("dragon"), Error);
}
