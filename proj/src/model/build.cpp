#include "smal/model/build.hpp"

namespace smal {

SmalModel model_skeleton_from_template(const GlossTemplate& tmpl) {
  SmalModel m;
  m.faces = tmpl.merged_mesh.faces;
  m.weights = tmpl.weights;
  m.parent = tmpl.tree.parent;
  m.joint_rings = tmpl.joint_rings;
  m.image_keypoints = tmpl.image_keypoints;
  m.scan_keypoint_vertices = tmpl.scan_keypoint_vertices;
  m.mirror = tmpl.mirror;
  joint_limits_for(tmpl, m.pose_limit_min, m.pose_limit_max);
  return m;
}

VecX mirror_theta(const GlossTemplate& tmpl, const VecX& theta) {
  const int n = tmpl.part_count();
  VecX out = VecX::Zero(3 * n);
  for (int i = 0; i < n; ++i) {
    std::string name = tmpl.parts[i].name;
    if (name.rfind("left_", 0) == 0) {
      name = "right_" + name.substr(5);
    } else if (name.rfind("right_", 0) == 0) {
      name = "left_" + name.substr(6);
    }
    int target = i;
    for (int j = 0; j < n; ++j)
      if (tmpl.parts[j].name == name) {
        target = j;
        break;
      }
    const Vec3 r = theta.segment<3>(3 * i);
    out.segment<3>(3 * target) = Vec3(r.x(), -r.y(), -r.z());
  }
  return out;
}

GaussianPrior build_pose_prior(const GlossTemplate& tmpl,
                               const std::vector<VecX>& thetas,
                               double diagonal_load) {
  if (thetas.empty()) throw validation_error("pose prior needs samples");
  const int dim = 3 * tmpl.part_count();
  std::vector<VecX> samples;
  samples.reserve(2 * thetas.size());
  for (const VecX& t : thetas) {
    samples.push_back(t);
    samples.push_back(mirror_theta(tmpl, t));
  }
  GaussianPrior prior;
  prior.mean = VecX::Zero(dim);
  for (const VecX& s : samples) prior.mean += s;
  prior.mean /= static_cast<double>(samples.size());
  prior.covariance = diagonal_load * MatX::Identity(dim, dim);
  for (const VecX& s : samples) {
    const VecX c = s - prior.mean;
    prior.covariance += c * c.transpose() / static_cast<double>(samples.size());
  }
  // Free global rotation: unbounded variance, and a neutral mean so limits
  // bracket it.
  prior.mean.head<3>().setZero();
  for (int c = 0; c < 3; ++c) {
    prior.covariance.row(c).setZero();
    prior.covariance.col(c).setZero();
    prior.covariance(c, c) = kUnboundedLimit;
  }
  return prior;
}

void joint_limits_for(const GlossTemplate& tmpl, VecX& lower, VecX& upper) {
  const int n = tmpl.part_count();
  lower = VecX::Zero(3 * n);
  upper = VecX::Zero(3 * n);
  lower.head<3>().setConstant(-kUnboundedLimit);
  upper.head<3>().setConstant(kUnboundedLimit);
  for (int i = 1; i < n; ++i) {
    const Vec3 bound = category_rotation_bound(part_category(tmpl.parts[i].name));
    lower.segment<3>(3 * i) = -bound;
    upper.segment<3>(3 * i) = bound;
  }
}

std::vector<Vec3> neutral_shape_sample(const GlossTemplate& tmpl,
                                       const Registration& reg) {
  std::vector<Vec3> neutral = pose_normalize(reg, tmpl.weights);
  neutral = symmetrize(neutral, tmpl.mirror);
  laplacian_smooth_in_place(neutral, vertex_adjacency(tmpl.merged_mesh), 2, 0.5);
  return neutral;
}

SmalModel build_smal_model(const GlossTemplate& tmpl,
                           const std::vector<Registration>& registrations,
                           int component_cap,
                           const std::vector<VecX>& recovered_poses) {
  if (registrations.size() < 2)
    throw validation_error("model building needs at least 2 registrations");
  std::vector<std::vector<Vec3>> samples;
  samples.reserve(registrations.size());
  for (const Registration& reg : registrations)
    samples.push_back(neutral_shape_sample(tmpl, reg));
  const int n_comp =
      std::min(component_cap, static_cast<int>(samples.size()) - 1);

  SmalModel model = model_skeleton_from_template(tmpl);
  model.shape_space = build_shape_space(samples, n_comp);

  std::vector<VecX> pose_samples = scripted_walk_thetas(tmpl);
  pose_samples.insert(pose_samples.end(), recovered_poses.begin(),
                      recovered_poses.end());
  model.pose_prior = build_pose_prior(tmpl, pose_samples);
  model.validate();
  return model;
}

std::map<std::string, GaussianPrior> fit_family_priors(
    const std::map<std::string, std::vector<VecX>>& coefficients_by_family,
    double lambda_reg) {
  std::map<std::string, GaussianPrior> out;
  for (const auto& [family, coeffs] : coefficients_by_family) {
    if (coeffs.empty())
      throw validation_error("family '" + family + "' has no samples");
    const int dim = static_cast<int>(coeffs.front().size());
    const int n = static_cast<int>(coeffs.size());
    GaussianPrior prior;
    prior.mean = VecX::Zero(dim);
    for (const VecX& c : coeffs) prior.mean += c;
    prior.mean /= static_cast<double>(n);
    prior.covariance = MatX::Zero(dim, dim);
    if (n > 1) {
      for (const VecX& c : coeffs) {
        const VecX d = c - prior.mean;
        prior.covariance += d * d.transpose() / (n - 1.0);
      }
    }
    if (n <= dim)
      prior.covariance += lambda_reg * MatX::Identity(dim, dim);
    out[family] = std::move(prior);
  }
  return out;
}

}  // namespace smal
