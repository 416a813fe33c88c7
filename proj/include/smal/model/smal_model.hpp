#pragma once

#include <map>
#include <string>

#include "smal/geometry/lbs.hpp"
#include "smal/model/shape_space.hpp"

namespace smal {

inline constexpr double kUnboundedLimit = 1e9;

struct GaussianPrior {
  VecX mean;
  MatX covariance;

  /// Inverse covariance; rows/columns whose variance exceeds the unbounded
  /// sentinel are zeroed (free dimensions).
  MatX precision() const;
};

/// The learned articulated shape model: PCA shape space over neutral-pose
/// vertices plus the rig and priors needed to pose and fit it.
struct SmalModel {
  int version = 1;
  ShapeSpace shape_space;
  std::vector<Face> faces;
  SkinningWeights weights;
  std::vector<int> parent;                    // joint tree, -1 at root
  std::vector<std::vector<int>> joint_rings;  // merged ids averaged per joint
  GaussianPrior pose_prior;                   // over theta (3N)
  VecX pose_limit_min, pose_limit_max;        // 3N
  std::map<std::string, GaussianPrior> family_priors;  // over beta
  std::map<std::string, std::vector<int>> image_keypoints;
  std::map<std::string, int> scan_keypoint_vertices;
  MirrorCorrespondence mirror;

  int joint_count() const { return static_cast<int>(parent.size()); }
  int vertex_count() const { return shape_space.vertex_count(); }

  /// Kinematic tree with joints regressed from the given neutral vertices by
  /// the interface-centroid rule.
  KinematicTree tree_for(const std::vector<Vec3>& neutral_vertices) const;

  std::vector<Vec3> neutral_vertices(const VecX& beta) const;

  void validate() const;
};

Mesh smal_instance(const SmalModel& model, const VecX& beta, const VecX& theta,
                   const Vec3& gamma);

/// Forward pose evaluation with a reverse-mode path back to (beta, theta,
/// gamma); the beta path includes the shape-dependent joints.
class SmalDeformer {
 public:
  explicit SmalDeformer(const SmalModel& model, int n_beta = -1);

  int beta_count() const { return n_beta_; }
  void set_state(const VecX& beta, const VecX& theta, const Vec3& gamma);
  const std::vector<Vec3>& vertices() const { return posed_; }
  const std::vector<Vec3>& neutral() const { return neutral_; }

  void pullback(const std::vector<Vec3>& vertex_grads, VecX& beta_grad,
                VecX& theta_grad, Vec3& gamma_grad) const;

 private:
  const SmalModel& model_;
  int n_beta_;
  VecX theta_;
  std::vector<Vec3> neutral_, posed_;
  KinematicTree tree_;
};

void write_smal_model_json(const std::string& path, const SmalModel& model);
SmalModel read_smal_model_json(const std::string& path);

}  // namespace smal
