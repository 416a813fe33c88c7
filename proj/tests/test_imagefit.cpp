#include <doctest.h>

#include <filesystem>
#include <random>

#include "smal/imagefit/fit_image.hpp"
#include "smal/optim/robust.hpp"
#include "smal/model/build.hpp"
#include "smal/optim/gradcheck.hpp"
#include "smal/synth/synth.hpp"

using namespace smal;

namespace {

const GlossTemplate& shared_template() {
  static GlossTemplate t = make_template(0.8);
  return t;
}

const SmalModel& shared_model() {
  static SmalModel model = [] {
    const GlossTemplate& t = shared_template();
    std::vector<Registration> regs;
    for (int i = 0; i < 8; ++i) {
      SynthSpec spec;
      spec.recipe = family_recipe(family_names()[i % 5]);
      spec.pose_scale = 0.0;
      spec.noise_level = 0.0;
      spec.detail_scale = 0.0;
      spec.remesh = false;
      const SynthAnimal a = sample_animal(t, spec, 2000 + i);
      Registration reg;
      reg.source_id = a.id;
      reg.stage = "arap";
      reg.vertices = a.scan.vertices;
      reg.part_transforms.assign(t.part_count(), Affine{});
      regs.push_back(std::move(reg));
    }
    return build_smal_model(t, regs, 30, {});
  }();
  return model;
}

Camera test_camera(int size = 256) {
  Camera cam;
  cam.width = size;
  cam.height = size;
  cam.principal = Vec2(size / 2.0, size / 2.0);
  cam.focal = size * 1.1;
  return cam;
}

/// Model posed for the camera: rotated to face it, pushed to positive depth.
Mesh posed_instance(const SmalModel& model, const VecX& beta, VecX theta,
                    double depth, const Camera& cam) {
  theta.head<3>() = Vec3(-M_PI / 2, 0, 0);  // body axis toward the image x
  const Vec3 gamma(0, 0, depth);
  return smal_instance(model, beta, theta, gamma);
}

}  // namespace

TEST_CASE("projection basics") {
  Camera cam;
  cam.focal = 500;
  cam.principal = Vec2(250, 250);
  cam.width = cam.height = 500;
  CHECK((project(Vec3(0, 0, 3), cam) - Vec2(250, 250)).norm() == 0.0);
  CHECK((project(Vec3(1, 0, 2), cam) - Vec2(500, 250)).norm() == 0.0);
  // Doubling f doubles the offset from the principal point.
  Camera cam2 = cam;
  cam2.focal = 1000;
  const Vec2 p1 = project(Vec3(0.3, -0.2, 2), cam) - cam.principal;
  const Vec2 p2 = project(Vec3(0.3, -0.2, 2), cam2) - cam.principal;
  CHECK((p2 - 2 * p1).norm() < 1e-12);
  CHECK_THROWS_AS(project(Vec3(0, 0, -1), cam), Error);
}

TEST_CASE("projection jacobian matches finite differences") {
  Camera cam = test_camera();
  const Vec3 p(0.4, -0.7, 3.2);
  const auto jac = projection_jacobian(p, cam);
  const double eps = 1e-6;
  for (int c = 0; c < 3; ++c) {
    Vec3 pp = p, pm = p;
    pp[c] += eps;
    pm[c] -= eps;
    const Vec2 fd = (project(pp, cam) - project(pm, cam)) / (2 * eps);
    CHECK((fd - jac.col(c)).norm() < 1e-6);
  }
  Camera cp = cam, cm = cam;
  cp.focal += eps;
  cm.focal -= eps;
  const Vec2 fd_f = (project(p, cp) - project(p, cm)) / (2 * eps);
  CHECK((fd_f - projection_focal_derivative(p)).norm() < 1e-9);
}

TEST_CASE("rasterizer covers a facing square") {
  Camera cam = test_camera(128);
  // Unit square at depth 2: extents f/2 = 70.4 px around the center.
  std::vector<Vec3> verts = {{-0.5, -0.5, 2}, {0.5, -0.5, 2}, {0.5, 0.5, 2},
                             {-0.5, 0.5, 2}};
  std::vector<Face> faces = {{0, 1, 2}, {0, 2, 3}};
  const RasterResult r = render_silhouette(verts, faces, cam);
  const double half_px = cam.focal * 0.5 / 2.0;
  const int expect =
      static_cast<int>(std::round(2 * half_px)) * static_cast<int>(std::round(2 * half_px));
  CHECK(std::abs(r.mask.count() - expect) <= 4 * std::round(2 * half_px) + 4);
  // Center pixel covered, corners not.
  CHECK(r.mask.at(64, 64));
  CHECK_FALSE(r.mask.at(2, 2));
  CHECK(r.depth[64 * 128 + 64] == doctest::Approx(2.0));
}

TEST_CASE("rasterizer rejects empty and behind-camera input") {
  Camera cam = test_camera(64);
  std::vector<Vec3> off = {{50, 50, 2}, {51, 50, 2}, {50, 51, 2}};
  std::vector<Face> faces = {{0, 1, 2}};
  CHECK_THROWS_AS(render_silhouette(off, faces, cam), Error);
  std::vector<Vec3> behind = {{0, 0, -2}, {1, 0, -2}, {0, 1, -2}};
  CHECK_THROWS_AS(render_silhouette(behind, faces, cam), Error);
}

TEST_CASE("sphere silhouette area matches the analytic disc") {
  Camera cam = test_camera(256);
  // Icosphere at depth 4 with radius 1 -> projected radius ~ f/sqrt(15).
  Mesh sphere;
  {
    const double t = (1.0 + std::sqrt(5.0)) / 2.0;
    sphere.vertices = {{-1, t, 0}, {1, t, 0},   {-1, -t, 0}, {1, -t, 0},
                       {0, -1, t}, {0, 1, t},   {0, -1, -t}, {0, 1, -t},
                       {t, 0, -1}, {t, 0, 1},   {-t, 0, -1}, {-t, 0, 1}};
    for (Vec3& v : sphere.vertices) v.normalize();
    sphere.faces = {{0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11},
                    {1, 5, 9},  {5, 11, 4}, {11, 10, 2}, {10, 7, 6}, {7, 1, 8},
                    {3, 9, 4},  {3, 4, 2},  {3, 2, 6},   {3, 6, 8},  {3, 8, 9},
                    {4, 9, 5},  {2, 4, 11}, {6, 2, 10},  {8, 6, 7},  {9, 8, 1}};
    for (int s = 0; s < 3; ++s) {
      std::map<std::pair<int, int>, int> mid;
      auto midpoint = [&](int a, int b) {
        auto key = std::minmax(a, b);
        auto it = mid.find(key);
        if (it != mid.end()) return it->second;
        sphere.vertices.push_back(
            (sphere.vertices[a] + sphere.vertices[b]).normalized());
        mid[key] = sphere.vertex_count() - 1;
        return mid[key];
      };
      std::vector<Face> next;
      for (const Face& f : sphere.faces) {
        const int ab = midpoint(f[0], f[1]), bc = midpoint(f[1], f[2]),
                  ca = midpoint(f[2], f[0]);
        next.insert(next.end(),
                    {{f[0], ab, ca}, {f[1], bc, ab}, {f[2], ca, bc}, {ab, bc, ca}});
      }
      sphere.faces = next;
    }
  }
  const double depth = 4.0;
  for (Vec3& v : sphere.vertices) v.z() += depth;
  const RasterResult r = render_silhouette(sphere.vertices, sphere.faces, cam);
  // The silhouette of a sphere at distance d has angular radius
  // asin(1/d); its image radius is f tan(asin(1/d)) = f / sqrt(d^2 - 1).
  const double radius_px = cam.focal / std::sqrt(depth * depth - 1.0);
  const double analytic = M_PI * radius_px * radius_px;
  CHECK(std::abs(r.mask.count() - analytic) < 0.02 * analytic);
}

TEST_CASE("distance transform matches brute force on random masks") {
  std::mt19937_64 rng(19);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    BinaryMask mask;
    mask.width = 64;
    mask.height = 64;
    mask.inside.assign(64 * 64, 0);
    const double density = 0.002 + 0.1 * u(rng);
    int count = 0;
    for (auto& px : mask.inside) {
      px = u(rng) < density ? 1 : 0;
      count += px;
    }
    if (count == 0) mask.inside[rng() % (64 * 64)] = 1;

    const std::vector<double> dt = distance_transform(mask);
    // Brute force oracle.
    std::vector<std::pair<int, int>> sites;
    for (int y = 0; y < 64; ++y)
      for (int x = 0; x < 64; ++x)
        if (mask.at(x, y)) sites.emplace_back(x, y);
    for (int y = 0; y < 64; ++y) {
      for (int x = 0; x < 64; ++x) {
        double best = std::numeric_limits<double>::infinity();
        for (const auto& [sx, sy] : sites) {
          const double d = double(x - sx) * (x - sx) + double(y - sy) * (y - sy);
          best = std::min(best, d);
        }
        CHECK(dt[y * 64 + x] == std::sqrt(best));
      }
    }
  }
}

TEST_CASE("distance transform basics") {
  BinaryMask all;
  all.width = all.height = 8;
  all.inside.assign(64, 1);
  for (double d : distance_transform(all)) CHECK(d == 0.0);

  BinaryMask single;
  single.width = single.height = 16;
  single.inside.assign(256, 0);
  single.inside[5 * 16 + 3] = 1;  // (x=3, y=5)
  const auto dt = distance_transform(single);
  CHECK(dt[5 * 16 + 8] == 5.0);

  BinaryMask empty;
  empty.width = empty.height = 4;
  empty.inside.assign(16, 0);
  CHECK_THROWS_AS(distance_transform(empty), Error);
}

TEST_CASE("pgm round trip") {
  BinaryMask mask;
  mask.width = 33;
  mask.height = 17;
  mask.inside.assign(33 * 17, 0);
  for (size_t i = 0; i < mask.inside.size(); i += 3) mask.inside[i] = 1;
  const auto path = std::filesystem::temp_directory_path() / "smal_mask.pgm";
  write_pgm(path.string(), mask);
  const BinaryMask back = read_pgm(path.string());
  CHECK(back.width == mask.width);
  CHECK(back.height == mask.height);
  CHECK(back.inside == mask.inside);
  std::filesystem::remove(path);
}

TEST_CASE("pose limit energy hinges") {
  VecX lo = VecX::Constant(4, -0.5), hi = VecX::Constant(4, 0.5);
  VecX theta(4);
  theta << 0.0, 0.7, -0.9, 0.2;
  VecX grad = VecX::Zero(4);
  const double e = pose_limit_energy(theta, lo, hi, &grad);
  CHECK(e == doctest::Approx(0.2 + 0.4));
  CHECK(grad[0] == 0.0);
  CHECK(grad[1] == 1.0);
  CHECK(grad[2] == -1.0);
  CHECK(grad[3] == 0.0);
}

TEST_CASE("keypoint term closed form") {
  // rho(25) with sigma 10: 100*25/125 = 20.
  auto [val, der] = geman_mcclure(25.0, 10.0);
  CHECK(val == doctest::Approx(20.0));
}

TEST_CASE("render annotation marks occluded keypoints invisible") {
  const SmalModel& model = shared_model();
  Camera cam = test_camera(256);
  const Mesh mesh = posed_instance(
      model, VecX::Zero(model.shape_space.component_count()),
      VecX::Zero(3 * model.joint_count()), 6.0, cam);
  const ImageObservation obs =
      render_annotation(mesh, model.image_keypoints, cam);
  CHECK_FALSE(obs.silhouette.empty());
  // The animal faces the camera sideways after the root rotation; keypoints
  // on the far side must be missing, near side present.
  int visible = obs.visible_count();
  CHECK(visible >= 6);
  CHECK(visible < static_cast<int>(obs.keypoints.size()));

  // Silhouette equals the plain rasterization of the same mesh.
  const RasterResult r = render_silhouette(mesh.vertices, mesh.faces, cam);
  CHECK(obs.silhouette.inside == r.mask.inside);
}

TEST_CASE("frontal view keypoints are left-right symmetric") {
  const SmalModel& model = shared_model();
  Camera cam = test_camera(256);
  // Face the camera head-on: body axis +y toward camera -> rotate so the
  // head points at -z... the neutral template runs along +y; rotate about x
  // by +pi/2 so +y maps to +z (tail toward camera) then push back.
  VecX theta = VecX::Zero(3 * model.joint_count());
  theta.head<3>() = Vec3(M_PI / 2, 0, 0);
  const Mesh mesh = smal_instance(
      model, VecX::Zero(model.shape_space.component_count()), theta,
      Vec3(0, 0.8, 5.0));
  const ImageObservation obs =
      render_annotation(mesh, model.image_keypoints, cam);
  auto check_pair = [&](const std::string& l, const std::string& r) {
    const auto& lp = obs.keypoints.at(l);
    const auto& rp = obs.keypoints.at(r);
    if (lp && rp) {
      CHECK(std::abs((lp->x() - cam.principal.x()) +
                     (rp->x() - cam.principal.x())) < 1.0);
      CHECK(std::abs(lp->y() - rp->y()) < 1.0);
    }
  };
  check_pair("left_haunch", "right_haunch");
  check_pair("left_rear_paw", "right_rear_paw");
}

TEST_CASE("image fit energy gradient matches finite differences") {
  const SmalModel& model = shared_model();
  Camera cam = test_camera(128);
  VecX theta_true = VecX::Zero(3 * model.joint_count());
  const Mesh mesh = posed_instance(
      model, VecX::Zero(model.shape_space.component_count()), theta_true, 6.0,
      cam);
  const ImageObservation obs =
      render_annotation(mesh, model.image_keypoints, cam);

  ImageFitWeights weights;
  ImageFitEnergy energy(model, obs, cam, weights, 4, nullptr, 0);
  energy.set_use_silhouette(true);

  std::mt19937_64 rng(23);
  std::normal_distribution<double> g(0.0, 1.0);
  for (int trial = 0; trial < 2; ++trial) {
    VecX beta = VecX::Zero(4);
    for (int i = 0; i < 4; ++i) beta[i] = 0.1 * g(rng);
    VecX theta = VecX::Zero(3 * model.joint_count());
    theta.head<3>() = Vec3(-M_PI / 2, 0, 0);
    for (int i = 3; i < theta.size(); ++i) theta[i] = 0.03 * g(rng);
    const Vec3 gamma(0.05 * g(rng), 0.05 * g(rng), 6.0 + 0.2 * g(rng));
    const VecX x = energy.pack(beta, theta, gamma, cam.focal * (1 + 0.05 * g(rng)));
    const double err = check_gradient(energy.as_energy_function(), x, 1e-5);
    CHECK(err < 1e-3);
  }
}

TEST_CASE("render and recover a known configuration") {
  const SmalModel& model = shared_model();
  Camera cam = test_camera(256);
  const int nb = model.shape_space.component_count();
  VecX beta_true = VecX::Zero(nb);
  beta_true[0] = 0.8 * std::sqrt(std::max(model.shape_space.eigenvalues[0], 1e-8));
  VecX theta_true = VecX::Zero(3 * model.joint_count());
  theta_true.head<3>() = Vec3(-M_PI / 2, 0.1, 0.05);
  // bend a leg and the neck a little
  theta_true[3 * 14] = 0.3;
  theta_true[3 * 7] = -0.2;
  const Vec3 gamma_true(0.1, 0.2, 6.0);
  const Mesh mesh = smal_instance(model, beta_true, theta_true, gamma_true);
  const ImageObservation obs =
      render_annotation(mesh, model.image_keypoints, cam);
  REQUIRE(obs.visible_count() >= 6);

  FitImageConfig config;
  config.focal_init = cam.focal;  // rendered with a known camera
  const FitImageResult fit = fit_image(model, obs, config);
  MESSAGE("kp err ", fit.mean_keypoint_error_px, " IoU ", fit.silhouette_iou,
          " secs ", fit.seconds);
  CHECK(fit.mean_keypoint_error_px < 3.0 * 256.0 / 512.0);  // scaled criterion
  CHECK(fit.silhouette_iou > 0.9);
}

TEST_CASE("fixed point: fitting a render from the mean with truth init") {
  const SmalModel& model = shared_model();
  Camera cam = test_camera(192);
  VecX theta = VecX::Zero(3 * model.joint_count());
  theta.head<3>() = Vec3(-M_PI / 2, 0, 0);
  const Vec3 gamma(0, 0, 6.0);
  const VecX beta = VecX::Zero(model.shape_space.component_count());
  const Mesh mesh = smal_instance(model, beta, theta, gamma);
  const ImageObservation obs =
      render_annotation(mesh, model.image_keypoints, cam);

  ImageFitWeights weights;
  ImageFitEnergy energy(model, obs, cam, weights, -1, nullptr, 0);
  const VecX x0 = energy.pack(beta, theta, gamma, cam.focal);
  SolverConfig solver;
  solver.max_iterations = 50;
  const MinimizeResult mr = minimize(energy.as_energy_function(), x0, solver);
  // Already at the data optimum: the fit barely moves.
  VecX beta2, theta2;
  Vec3 gamma2;
  double focal2;
  energy.unpack(mr.x, beta2, theta2, gamma2, focal2);
  CHECK((gamma2 - gamma).norm() < 0.05);
  CHECK(energy.mean_keypoint_error(mr.x) < 1.0);
}

TEST_CASE("pixel-unit equivariance of the staged fit") {
  const SmalModel& model = shared_model();
  Camera cam = test_camera(128);
  VecX theta = VecX::Zero(3 * model.joint_count());
  theta.head<3>() = Vec3(-M_PI / 2, 0, 0);
  const VecX beta = VecX::Zero(model.shape_space.component_count());
  const Mesh mesh = smal_instance(model, beta, theta, Vec3(0, 0, 6.0));
  const ImageObservation obs = render_annotation(mesh, model.image_keypoints, cam);

  FitImageConfig config;
  config.focal_init = cam.focal;
  config.pyramid_levels = 2;
  config.solver.max_iterations = 120;
  const FitImageResult base = fit_image(model, obs, config);

  // Double every pixel quantity. The optimum in 3D must be unchanged.
  ImageObservation scaled;
  scaled.width = obs.width * 2;
  scaled.height = obs.height * 2;
  scaled.silhouette.width = obs.width * 2;
  scaled.silhouette.height = obs.height * 2;
  scaled.silhouette.inside.assign(
      static_cast<size_t>(scaled.width) * scaled.height, 0);
  for (int y = 0; y < scaled.height; ++y)
    for (int x = 0; x < scaled.width; ++x)
      scaled.silhouette.inside[y * scaled.width + x] =
          obs.silhouette.inside[(y / 2) * obs.width + (x / 2)];
  for (const auto& [name, p] : obs.keypoints)
    scaled.keypoints[name] = p ? std::optional<Vec2>(*p * 2.0) : std::nullopt;

  FitImageConfig config2 = config;
  config2.focal_init = cam.focal * 2.0;
  config2.weights.sigma_kp = config.weights.sigma_kp * 2.0;
  config2.weights.sigma_silh = config.weights.sigma_silh * 2.0;
  const FitImageResult doubled = fit_image(model, scaled, config2);

  CHECK((base.gamma - doubled.gamma).norm() < 0.2);
  CHECK(std::abs(doubled.focal / base.focal - 2.0) < 0.2);
}
