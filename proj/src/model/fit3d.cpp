#include "smal/model/fit3d.hpp"

#include "smal/geometry/spatial_grid.hpp"
#include "smal/optim/robust.hpp"

namespace smal {

SmalScanEnergy::SmalScanEnergy(const SmalModel& model, Mesh scan,
                               std::map<std::string, Vec3> scan_keypoints,
                               const SmalFitConfig& config)
    : model_(model),
      scan_(std::move(scan)),
      scan_keypoints_(std::move(scan_keypoints)),
      weights_(config.weights),
      n_beta_(config.n_beta < 0 ? model.shape_space.component_count()
                                : config.n_beta),
      deformer_(model, config.n_beta) {
  if (scan_.vertices.empty()) throw validation_error("empty scan");
  pose_precision_ = weights_.k_pose * model_.pose_prior.precision();
  beta_inv_variance_ =
      model_.shape_space.eigenvalues.head(n_beta_).cwiseMax(1e-12).cwiseInverse();
  if (config.shape_prior) {
    use_family_prior_ = true;
    if (config.shape_prior->mean.size() < n_beta_)
      throw validation_error("family prior dimension below beta count");
    shape_prior_mean_ = config.shape_prior->mean.head(n_beta_);
    shape_precision_ =
        config.shape_prior->covariance.topLeftCorner(n_beta_, n_beta_).inverse();
  }
  sigma_ = weights_.sigma > 0 ? weights_.sigma : 0.1 * bbox_diagonal(scan_);
  for (const auto& [name, p] : scan_keypoints_)
    if (!model_.scan_keypoint_vertices.count(name))
      throw validation_error("keypoint '" + name + "' unknown to the model");
  VecX x0 = pack(VecX::Zero(n_beta_), VecX::Zero(3 * model_.joint_count()),
                 Vec3::Zero());
  refresh_correspondences(x0);
}

int SmalScanEnergy::dimension() const {
  return n_beta_ + 3 * model_.joint_count() + 3;
}

VecX SmalScanEnergy::pack(const VecX& beta, const VecX& theta,
                          const Vec3& gamma) const {
  VecX x(dimension());
  x.head(n_beta_) = beta;
  x.segment(n_beta_, 3 * model_.joint_count()) = theta;
  x.tail<3>() = gamma;
  return x;
}

void SmalScanEnergy::unpack(const VecX& x, VecX& beta, VecX& theta,
                            Vec3& gamma) const {
  beta = x.head(n_beta_);
  theta = x.segment(n_beta_, 3 * model_.joint_count());
  gamma = x.tail<3>();
}

void SmalScanEnergy::refresh_correspondences(const VecX& x) {
  VecX beta, theta;
  Vec3 gamma;
  unpack(x, beta, theta, gamma);
  deformer_.set_state(beta, theta, gamma);
  const std::vector<Vec3>& verts = deformer_.vertices();
  PointGrid scan_grid(scan_.vertices);
  m2s_nn_.resize(verts.size());
  for (size_t v = 0; v < verts.size(); ++v)
    m2s_nn_[v] = scan_grid.nearest(verts[v]);
  PointGrid model_grid(verts);
  s2m_nn_.resize(scan_.vertices.size());
  for (size_t s = 0; s < scan_.vertices.size(); ++s)
    s2m_nn_[s] = model_grid.nearest(scan_.vertices[s]);
}

double SmalScanEnergy::evaluate(const VecX& x, VecX* grad) {
  VecX beta, theta;
  Vec3 gamma;
  unpack(x, beta, theta, gamma);
  deformer_.set_state(beta, theta, gamma);
  const std::vector<Vec3>& verts = deformer_.vertices();

  double energy = 0.0;
  std::vector<Vec3> vgrads(verts.size(), Vec3::Zero());

  // Priors.
  const VecX theta_c = theta - model_.pose_prior.mean;
  const VecX pose_g = pose_precision_ * theta_c;
  energy += theta_c.dot(pose_g);
  VecX beta_grad_direct;
  if (use_family_prior_) {
    const VecX beta_c = beta - shape_prior_mean_;
    const VecX g = weights_.k_beta * shape_precision_ * beta_c;
    energy += weights_.k_beta * beta_c.dot(shape_precision_ * beta_c);
    beta_grad_direct = 2.0 * g;
  } else {
    energy +=
        weights_.k_beta * (beta.array().square() * beta_inv_variance_.array()).sum();
    beta_grad_direct =
        weights_.k_beta * 2.0 * (beta.array() * beta_inv_variance_.array()).matrix();
  }

  // Keypoints.
  for (const auto& [name, target] : scan_keypoints_) {
    const int v = model_.scan_keypoint_vertices.at(name);
    const Vec3 d = verts[v] - target;
    energy += weights_.k_kp * d.squaredNorm();
    vgrads[v] += weights_.k_kp * 2.0 * d;
  }

  // Robust bidirectional distances with frozen assignments.
  const GemanMcClure rho(sigma_);
  for (size_t v = 0; v < verts.size(); ++v) {
    const Vec3 d = verts[v] - scan_.vertices[m2s_nn_[v]];
    const double sq = d.squaredNorm();
    energy += weights_.k_m2s * rho.value(sq);
    vgrads[v] += weights_.k_m2s * rho.derivative(sq) * 2.0 * d;
  }
  for (size_t s = 0; s < scan_.vertices.size(); ++s) {
    const Vec3 d = verts[s2m_nn_[s]] - scan_.vertices[s];
    const double sq = d.squaredNorm();
    energy += weights_.k_s2m * rho.value(sq);
    vgrads[s2m_nn_[s]] += weights_.k_s2m * rho.derivative(sq) * 2.0 * d;
  }

  if (grad) {
    VecX beta_grad = VecX::Zero(n_beta_);
    VecX theta_grad = VecX::Zero(3 * model_.joint_count());
    Vec3 gamma_grad = Vec3::Zero();
    deformer_.pullback(vgrads, beta_grad, theta_grad, gamma_grad);
    beta_grad += beta_grad_direct;
    theta_grad += 2.0 * pose_g;
    grad->resize(dimension());
    grad->head(n_beta_) = beta_grad;
    grad->segment(n_beta_, 3 * model_.joint_count()) = theta_grad;
    grad->tail<3>() = gamma_grad;
  }
  return energy;
}

EnergyFunction SmalScanEnergy::as_energy_function() {
  SmalScanEnergy* self = this;
  return make_energy(dimension(), [self](const VecX& x, VecX& g) {
    return self->evaluate(x, &g);
  });
}

SmalFitResult fit_smal_to_scan(const SmalModel& model, const Mesh& scan,
                               const std::map<std::string, Vec3>& scan_keypoints,
                               const SmalFitConfig& config,
                               const SmalFitResult* init) {
  SmalScanEnergy energy(model, scan, scan_keypoints, config);
  SmalFitResult result;
  const int n_beta = config.n_beta < 0 ? model.shape_space.component_count()
                                       : config.n_beta;
  if (init) {
    result = *init;
  } else {
    result.beta = VecX::Zero(n_beta);
    result.theta = VecX::Zero(3 * model.joint_count());
    const Mesh mean_mesh = smal_instance(model, result.beta, result.theta,
                                         Vec3::Zero());
    result.gamma =
        vertex_median(scan.vertices) - vertex_median(mean_mesh.vertices);
  }

  VecX x = energy.pack(result.beta, result.theta, result.gamma);
  for (int round = 0; round < config.correspondence_rounds; ++round) {
    energy.refresh_correspondences(x);
    const MinimizeResult mr =
        minimize(energy.as_energy_function(), x, config.solver);
    x = mr.x;
    result.rounds.push_back(mr);
  }
  energy.refresh_correspondences(x);
  result.final_energy = energy.evaluate(x, nullptr);
  energy.unpack(x, result.beta, result.theta, result.gamma);
  return result;
}

}  // namespace smal
