#pragma once

#include "smal/imagefit/energies.hpp"
#include "smal/optim/lbfgs.hpp"

namespace smal {

struct FitImageConfig {
  ImageFitWeights weights;
  int n_beta = -1;        // -1: all shape components
  std::string family;     // empty: generic shape prior
  int prior_stages = 3;
  double prior_decay = 0.25;
  int pyramid_levels = 3;
  double focal_init = -1.0;  // <0: 1.2 x max(width, height)
  SolverConfig solver;

  FitImageConfig() {
    solver.max_iterations = 250;
    solver.gradient_tolerance = 1e-7;
  }
};

struct FitImageResult {
  VecX beta;
  VecX theta;
  Vec3 gamma = Vec3::Zero();
  double focal = 0.0;
  double mean_keypoint_error_px = 0.0;
  double silhouette_iou = 0.0;
  std::map<std::string, double> term_values;
  std::vector<MinimizeResult> stages;
  double seconds = 0.0;
};

/// Staged monocular fit: torso-based depth initialization, root rotation and
/// translation from torso keypoints, three keypoint stages with decaying
/// prior weights, then silhouette refinement over an image pyramid with the
/// focal length freed under a translation anchor.
FitImageResult fit_image(const SmalModel& model, const ImageObservation& obs,
                         const FitImageConfig& config);

/// Keypoint names treated as torso evidence for initialization.
std::vector<std::string> torso_keypoint_names();

}  // namespace smal
