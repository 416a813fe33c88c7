#pragma once

#include "smal/imagefit/distance_transform.hpp"
#include "smal/imagefit/observation.hpp"
#include "smal/model/smal_model.hpp"
#include "smal/optim/energy.hpp"

namespace smal {

struct ImageFitWeights {
  double k_kp = 1.0;
  double k_silh = 1.0;
  double k_beta = 5.0;
  double k_theta = 5.0;
  double k_lim = 100.0;
  double k_deviation = 0.0;  // gamma anchor; set by the schedule
  double sigma_kp = 10.0;    // px at full resolution
  double sigma_silh = 10.0;  // px at full resolution
};

/// Elementwise hinge penalty outside [lower, upper]; subgradient 0 at kinks.
double pose_limit_energy(const VecX& theta, const VecX& lower,
                         const VecX& upper, VecX* grad);

/// Full image objective at one pyramid level over x = [beta; theta; gamma; f].
/// Keypoint and silhouette reprojection with robust kernels, shape and pose
/// priors, limit bounds, and an optional translation anchor. Silhouette
/// geometry (edges, samples, coverage) is rebuilt per evaluation; the
/// nearest-structure assignments inside one evaluation are treated as fixed,
/// which keeps the term piecewise smooth.
class ImageFitEnergy {
 public:
  ImageFitEnergy(const SmalModel& model, const ImageObservation& observation,
                 const Camera& full_camera, ImageFitWeights weights,
                 int n_beta, const GaussianPrior* family_prior, int level);

  void set_use_silhouette(bool use) { use_silhouette_ = use; }
  void set_prior_scale(double s) { prior_scale_ = s; }
  void set_gamma_anchor(const Vec3& gamma0, double weight);
  /// Restricts the keypoint term to a named subset (for the torso stage).
  void set_keypoint_subset(const std::vector<std::string>& names);

  int dimension() const;
  int beta_count() const { return n_beta_; }
  VecX pack(const VecX& beta, const VecX& theta, const Vec3& gamma,
            double focal) const;
  void unpack(const VecX& x, VecX& beta, VecX& theta, Vec3& gamma,
              double& focal) const;

  double evaluate(const VecX& x, VecX* grad);
  EnergyFunction as_energy_function();
  std::map<std::string, double> term_values(const VecX& x);

  /// Mean reprojection error over visible keypoints, in this level's pixels.
  double mean_keypoint_error(const VecX& x);
  /// IoU between the rendered model silhouette and the observation.
  double silhouette_iou(const VecX& x);

  const Camera& camera() const { return camera_; }
  const ImageObservation& observation() const { return observation_; }

 private:
  double evaluate_impl(const VecX& x, VecX* grad,
                       std::map<std::string, double>* terms);

  const SmalModel& model_;
  ImageObservation observation_;
  Camera camera_;
  ImageFitWeights weights_;
  int n_beta_;
  const GaussianPrior* family_prior_;
  double prior_scale_ = 1.0;
  bool use_silhouette_ = false;
  Vec3 gamma_anchor_ = Vec3::Zero();
  bool has_anchor_ = false;
  std::vector<std::string> keypoint_subset_;

  SmalDeformer deformer_;
  MatX pose_precision_;
  VecX beta_inv_variance_;
  MatX family_precision_;
  VecX family_mean_;
  std::vector<double> observed_dt_;   // DT of the observed silhouette
  std::vector<int> observed_inside_;  // pixel indices inside the observation
  double sigma_kp_ = 10.0;
  double sigma_silh_ = 10.0;
  double silh_norm_ = 1.0;
};

}  // namespace smal
