#pragma once

#include "smal/model/smal_model.hpp"
#include "smal/optim/lbfgs.hpp"

namespace smal {

struct SmalFitWeights {
  double k_kp = 50.0;
  double k_m2s = 1.0;
  double k_s2m = 1.0;
  double k_pose = 1.0;
  double k_beta = 0.2;
  double sigma = -1.0;  // robust scale; <0 derives 0.1 x scan bbox diagonal
};

struct SmalFitConfig {
  SmalFitWeights weights;
  SolverConfig solver;
  int correspondence_rounds = 4;
  int n_beta = -1;  // -1: all shape components
  const GaussianPrior* shape_prior = nullptr;  // family prior; null = global

  SmalFitConfig() {
    solver.max_iterations = 800;
    solver.gradient_tolerance = 1e-7;
  }
};

struct SmalFitResult {
  VecX beta;
  VecX theta;
  Vec3 gamma = Vec3::Zero();
  double final_energy = 0.0;
  std::vector<MinimizeResult> rounds;
};

/// Pose/shape prior plus robust bidirectional scan distance over the model
/// surface, with frozen nearest neighbors per solver round.
class SmalScanEnergy {
 public:
  SmalScanEnergy(const SmalModel& model, Mesh scan,
                 std::map<std::string, Vec3> scan_keypoints,
                 const SmalFitConfig& config);

  int dimension() const;
  VecX pack(const VecX& beta, const VecX& theta, const Vec3& gamma) const;
  void unpack(const VecX& x, VecX& beta, VecX& theta, Vec3& gamma) const;

  void refresh_correspondences(const VecX& x);
  double evaluate(const VecX& x, VecX* grad);
  EnergyFunction as_energy_function();

 private:
  const SmalModel& model_;
  Mesh scan_;
  std::map<std::string, Vec3> scan_keypoints_;
  SmalFitWeights weights_;
  int n_beta_;
  MatX pose_precision_;
  VecX beta_inv_variance_;       // global prior
  MatX shape_precision_;         // family prior (when set)
  VecX shape_prior_mean_;
  bool use_family_prior_ = false;
  double sigma_ = 1.0;
  SmalDeformer deformer_;
  std::vector<int> m2s_nn_;
  std::vector<int> s2m_nn_;
};

SmalFitResult fit_smal_to_scan(const SmalModel& model, const Mesh& scan,
                               const std::map<std::string, Vec3>& scan_keypoints,
                               const SmalFitConfig& config,
                               const SmalFitResult* init = nullptr);

}  // namespace smal
