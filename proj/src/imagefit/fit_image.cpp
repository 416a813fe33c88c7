#include "smal/imagefit/fit_image.hpp"

#include <chrono>
#include <cmath>

#include "smal/geometry/rotations.hpp"
#include "smal/optim/robust.hpp"

namespace smal {

std::vector<std::string> torso_keypoint_names() {
  return {"left_shoulder", "right_shoulder", "left_haunch", "right_haunch",
          "neck_base"};
}

namespace {

double median_of(std::vector<double> values) {
  if (values.empty()) throw validation_error("median of empty set");
  auto mid = values.begin() + values.size() / 2;
  std::nth_element(values.begin(), mid, values.end());
  return *mid;
}

}  // namespace

FitImageResult fit_image(const SmalModel& model, const ImageObservation& obs,
                         const FitImageConfig& config) {
  const auto t_start = std::chrono::steady_clock::now();
  obs.validate();
  if (obs.visible_count() < 6)
    throw validation_error("need at least 6 visible keypoints, got " +
                           std::to_string(obs.visible_count()));

  const GaussianPrior* family_prior = nullptr;
  if (!config.family.empty()) {
    auto it = model.family_priors.find(config.family);
    if (it == model.family_priors.end())
      throw validation_error("model has no family prior '" + config.family + "'");
    family_prior = &it->second;
  }

  Camera camera;
  camera.width = obs.width;
  camera.height = obs.height;
  camera.principal = Vec2(obs.width / 2.0, obs.height / 2.0);
  camera.focal = config.focal_init > 0 ? config.focal_init
                                       : 1.2 * std::max(obs.width, obs.height);

  const int n_beta = config.n_beta < 0 ? model.shape_space.component_count()
                                       : config.n_beta;
  const int n_joints = model.joint_count();
  FitImageResult result;
  result.beta = VecX::Zero(n_beta);
  result.theta = VecX::Zero(3 * n_joints);
  result.focal = camera.focal;

  // Torso keypoints drive the depth and translation initialization.
  const std::vector<Vec3> mean_neutral = model.neutral_vertices(result.beta);
  std::vector<Vec3> torso3d;
  std::vector<Vec2> torso2d;
  std::vector<std::string> torso_names;
  for (const std::string& name : torso_keypoint_names()) {
    auto obs_it = obs.keypoints.find(name);
    auto map_it = model.image_keypoints.find(name);
    if (obs_it == obs.keypoints.end() || !obs_it->second ||
        map_it == model.image_keypoints.end())
      continue;
    Vec3 p3 = Vec3::Zero();
    for (int v : map_it->second) p3 += mean_neutral[v];
    p3 /= static_cast<double>(map_it->second.size());
    torso3d.push_back(p3);
    torso2d.push_back(*obs_it->second);
    torso_names.push_back(name);
  }
  if (torso3d.size() < 2)
    throw validation_error("need at least 2 visible torso keypoints, got " +
                           std::to_string(torso3d.size()));

  // Similar triangles: depth = f * median 3D spread / median 2D spread.
  std::vector<double> spread3, spread2;
  for (size_t i = 0; i < torso3d.size(); ++i) {
    for (size_t j = i + 1; j < torso3d.size(); ++j) {
      spread3.push_back((torso3d[i] - torso3d[j]).norm());
      spread2.push_back((torso2d[i] - torso2d[j]).norm());
    }
  }
  const double depth =
      camera.focal * median_of(spread3) / std::max(median_of(spread2), 1e-6);
  Vec2 torso_mean2 = Vec2::Zero();
  for (const Vec2& p : torso2d) torso_mean2 += p;
  torso_mean2 /= static_cast<double>(torso2d.size());
  const Vec3 torso_target(
      (torso_mean2.x() - camera.principal.x()) * depth / camera.focal,
      (torso_mean2.y() - camera.principal.y()) * depth / camera.focal, depth);

  // Stage 1: root rotation and translation from torso keypoints only.
  // The keypoint objective over the global rotation is multi-modal, so a
  // small set of canonical orientations is tried and the best kept.
  {
    ImageFitEnergy energy(model, obs, camera, config.weights, n_beta,
                          family_prior, 0);
    energy.set_keypoint_subset(torso_names);
    std::vector<Vec3> hypotheses{Vec3::Zero()};
    for (double pitch : {-M_PI / 2, M_PI / 2}) {
      for (double yaw : {0.0, M_PI / 2, M_PI, -M_PI / 2}) {
        const Mat3 r = rodrigues_to_matrix(Vec3(0, yaw, 0)) *
                       rodrigues_to_matrix(Vec3(pitch, 0, 0));
        hypotheses.push_back(matrix_to_rodrigues(r));
      }
    }
    MinimizeResult best;
    double best_value = std::numeric_limits<double>::infinity();
    Vec3 best_root = Vec3::Zero();
    for (const Vec3& root : hypotheses) {
      VecX theta = result.theta;
      theta.head<3>() = root;
      Vec3 torso_mean3 = Vec3::Zero();
      const Mat3 rot = rodrigues_to_matrix(root);
      for (const Vec3& p : torso3d) torso_mean3 += rot * p;
      torso_mean3 /= static_cast<double>(torso3d.size());
      const Vec3 gamma0 = torso_target - torso_mean3;

      const VecX base = energy.pack(result.beta, theta, gamma0, camera.focal);
      std::vector<int> free;
      for (int c = 0; c < 3; ++c) free.push_back(n_beta + c);  // root rotation
      for (int c = 0; c < 3; ++c) free.push_back(n_beta + 3 * n_joints + c);
      VecX x0(free.size());
      for (size_t i = 0; i < free.size(); ++i) x0[i] = base[free[i]];
      SolverConfig stage_solver = config.solver;
      stage_solver.max_iterations = std::min(config.solver.max_iterations, 120);
      const MinimizeResult mr =
          minimize(restrict_energy(energy.as_energy_function(), base, free),
                   x0, stage_solver);
      if (mr.value < best_value) {
        best_value = mr.value;
        best = mr;
        best_root = root;
      }
    }
    result.stages.push_back(best);
    result.theta.head<3>() = best.x.head<3>();
    result.gamma = best.x.tail<3>();
  }

  // Stages 2..4: full objective without the silhouette, priors decayed.
  for (int stage = 0; stage < config.prior_stages; ++stage) {
    ImageFitEnergy energy(model, obs, camera, config.weights, n_beta,
                          family_prior, 0);
    energy.set_prior_scale(std::pow(config.prior_decay, stage));
    const VecX base =
        energy.pack(result.beta, result.theta, result.gamma, camera.focal);
    std::vector<int> free;
    for (int c = 0; c < n_beta + 3 * n_joints + 3; ++c) free.push_back(c);
    VecX x0(free.size());
    for (size_t i = 0; i < free.size(); ++i) x0[i] = base[free[i]];
    const MinimizeResult mr =
        minimize(restrict_energy(energy.as_energy_function(), base, free), x0,
                 config.solver);
    result.stages.push_back(mr);
    result.beta = mr.x.head(n_beta);
    result.theta = mr.x.segment(n_beta, 3 * n_joints);
    result.gamma = mr.x.tail<3>();
  }

  // Silhouette stages over the pyramid, coarse to fine, focal length free
  // under a translation anchor.
  const Vec3 gamma_anchor = result.gamma;
  // A 10% focal change should cost as much as a 5 px mean keypoint error.
  const GemanMcClure rho_kp_full(config.weights.sigma_kp);
  const double anchor_weight =
      config.weights.k_kp * obs.visible_count() * rho_kp_full.value(25.0) /
      std::max(std::pow(0.1 * gamma_anchor.z(), 2.0), 1e-12);
  for (int level = config.pyramid_levels - 1; level >= 0; --level) {
    ImageFitEnergy energy(model, obs, camera, config.weights, n_beta,
                          family_prior, level);
    energy.set_use_silhouette(true);
    energy.set_prior_scale(
        std::pow(config.prior_decay, std::max(0, config.prior_stages - 1)));
    energy.set_gamma_anchor(gamma_anchor, anchor_weight);
    const VecX x0 =
        energy.pack(result.beta, result.theta, result.gamma, result.focal);
    const MinimizeResult mr =
        minimize(energy.as_energy_function(), x0, config.solver);
    result.stages.push_back(mr);
    VecX beta, theta;
    Vec3 gamma;
    double focal;
    energy.unpack(mr.x, beta, theta, gamma, focal);
    result.beta = beta;
    result.theta = theta;
    result.gamma = gamma;
    result.focal = focal;
  }

  // Final diagnostics at full resolution.
  {
    ImageFitEnergy energy(model, obs, camera, config.weights, n_beta,
                          family_prior, 0);
    energy.set_use_silhouette(true);
    const VecX x =
        energy.pack(result.beta, result.theta, result.gamma, result.focal);
    result.term_values = energy.term_values(x);
    result.mean_keypoint_error_px = energy.mean_keypoint_error(x);
    result.silhouette_iou = energy.silhouette_iou(x);
  }
  result.seconds = std::chrono::duration<double>(
                       std::chrono::steady_clock::now() - t_start)
                       .count();
  return result;
}

}  // namespace smal
