#include "smal/imagefit/energies.hpp"

#include <cmath>
#include <map>

#include "smal/optim/robust.hpp"

namespace smal {

double pose_limit_energy(const VecX& theta, const VecX& lower,
                         const VecX& upper, VecX* grad) {
  double e = 0.0;
  for (int i = 0; i < theta.size(); ++i) {
    if (theta[i] > upper[i]) {
      e += theta[i] - upper[i];
      if (grad) (*grad)[i] += 1.0;
    } else if (theta[i] < lower[i]) {
      e += lower[i] - theta[i];
      if (grad) (*grad)[i] -= 1.0;
    }
  }
  return e;
}

ImageFitEnergy::ImageFitEnergy(const SmalModel& model,
                               const ImageObservation& observation,
                               const Camera& full_camera,
                               ImageFitWeights weights, int n_beta,
                               const GaussianPrior* family_prior, int level)
    : model_(model),
      observation_(observation.level(level)),
      camera_(full_camera.level(level)),
      weights_(weights),
      n_beta_(n_beta < 0 ? model.shape_space.component_count() : n_beta),
      family_prior_(family_prior),
      deformer_(model, n_beta_) {
  observation_.validate();
  if (observation_.width != camera_.width ||
      observation_.height != camera_.height)
    throw validation_error("camera resolution does not match the observation");
  const double scale = 1.0 / (1 << level);
  sigma_kp_ = weights_.sigma_kp * scale;
  sigma_silh_ = std::max(weights_.sigma_silh * scale, 1.0);

  pose_precision_ = model_.pose_prior.precision();
  beta_inv_variance_ =
      model_.shape_space.eigenvalues.head(n_beta_).cwiseMax(1e-12).cwiseInverse();
  if (family_prior_) {
    if (family_prior_->mean.size() < n_beta_)
      throw validation_error("family prior dimension below beta count");
    family_mean_ = family_prior_->mean.head(n_beta_);
    family_precision_ =
        family_prior_->covariance.topLeftCorner(n_beta_, n_beta_).inverse();
  }

  observed_dt_ = distance_transform(observation_.silhouette);
  for (int i = 0;
       i < observation_.silhouette.width * observation_.silhouette.height; ++i)
    if (observation_.silhouette.inside[i]) observed_inside_.push_back(i);
  // Pixel sums grow with resolution; normalizing by the observed mask area
  // keeps k_silh meaningful across image sizes and pyramid levels.
  silh_norm_ = 1e4 / static_cast<double>(observed_inside_.size());
}

void ImageFitEnergy::set_gamma_anchor(const Vec3& gamma0, double weight) {
  gamma_anchor_ = gamma0;
  weights_.k_deviation = weight;
  has_anchor_ = true;
}

void ImageFitEnergy::set_keypoint_subset(const std::vector<std::string>& names) {
  keypoint_subset_ = names;
}

int ImageFitEnergy::dimension() const {
  return n_beta_ + 3 * model_.joint_count() + 4;
}

VecX ImageFitEnergy::pack(const VecX& beta, const VecX& theta,
                          const Vec3& gamma, double focal) const {
  VecX x(dimension());
  x.head(n_beta_) = beta;
  x.segment(n_beta_, 3 * model_.joint_count()) = theta;
  x.segment<3>(n_beta_ + 3 * model_.joint_count()) = gamma;
  x[dimension() - 1] = focal;
  return x;
}

void ImageFitEnergy::unpack(const VecX& x, VecX& beta, VecX& theta,
                            Vec3& gamma, double& focal) const {
  beta = x.head(n_beta_);
  theta = x.segment(n_beta_, 3 * model_.joint_count());
  gamma = x.segment<3>(n_beta_ + 3 * model_.joint_count());
  focal = x[dimension() - 1];
}

double ImageFitEnergy::evaluate(const VecX& x, VecX* grad) {
  return evaluate_impl(x, grad, nullptr);
}

std::map<std::string, double> ImageFitEnergy::term_values(const VecX& x) {
  std::map<std::string, double> terms;
  evaluate_impl(x, nullptr, &terms);
  return terms;
}

double ImageFitEnergy::evaluate_impl(const VecX& x, VecX* grad,
                                     std::map<std::string, double>* terms) {
  VecX beta, theta;
  Vec3 gamma;
  double focal;
  unpack(x, beta, theta, gamma, focal);
  Camera cam = camera_;
  cam.focal = focal;

  deformer_.set_state(beta, theta, gamma);
  const std::vector<Vec3>& verts = deformer_.vertices();

  if (grad) grad->setZero(dimension());

  // Depth barrier: projections need positive depth; a strayed iterate gets a
  // smooth push back instead of an exception mid line-search.
  const double z_min = 0.05;
  double barrier = 0.0;
  std::vector<Vec3> vgrads(verts.size(), Vec3::Zero());
  for (size_t v = 0; v < verts.size(); ++v) {
    if (verts[v].z() < z_min) {
      const double d = z_min - verts[v].z();
      barrier += 1e6 + 1e4 * d * d;
      vgrads[v].z() -= 2e4 * d;
    }
  }
  if (barrier > 0) {
    if (grad) {
      VecX bg = VecX::Zero(n_beta_);
      VecX tg = VecX::Zero(3 * model_.joint_count());
      Vec3 gg = Vec3::Zero();
      deformer_.pullback(vgrads, bg, tg, gg);
      grad->head(n_beta_) = bg;
      grad->segment(n_beta_, 3 * model_.joint_count()) = tg;
      grad->segment<3>(n_beta_ + 3 * model_.joint_count()) = gg;
    }
    if (terms) (*terms)["barrier"] = barrier;
    return barrier;
  }

  double e_kp = 0, e_silh = 0, e_beta = 0, e_theta = 0, e_lim = 0, e_dev = 0;
  double f_grad = 0.0;
  const GemanMcClure rho_kp(sigma_kp_);

  // Keypoints: robust distance between the observation and the mean of the
  // assigned vertex projections.
  int visible = 0;
  for (const auto& [name, obs_p] : observation_.keypoints) {
    if (!obs_p) continue;
    if (!keypoint_subset_.empty() &&
        std::find(keypoint_subset_.begin(), keypoint_subset_.end(), name) ==
            keypoint_subset_.end())
      continue;
    auto it = model_.image_keypoints.find(name);
    if (it == model_.image_keypoints.end()) continue;
    const auto& vset = it->second;
    ++visible;
    Vec2 mean = Vec2::Zero();
    for (int v : vset) mean += project(verts[v], cam);
    mean /= static_cast<double>(vset.size());
    const Vec2 r = *obs_p - mean;
    const double sq = r.squaredNorm();
    e_kp += rho_kp.value(sq);
    if (grad) {
      const Vec2 dmean = weights_.k_kp * rho_kp.derivative(sq) * 2.0 * (-r) /
                         static_cast<double>(vset.size());
      for (int v : vset) {
        vgrads[v] += projection_jacobian(verts[v], cam).transpose() * dmean;
        f_grad += dmean.dot(projection_focal_derivative(verts[v]));
      }
    }
  }
  if (visible == 0) throw validation_error("no visible keypoints to fit");

  // Silhouette term.
  if (use_silhouette_) {
    // Rasterize the model (empty masks allowed here: coverage deficits are
    // driven by the boundary samples).
    std::vector<Vec2> projected(verts.size());
    for (size_t v = 0; v < verts.size(); ++v) projected[v] = project(verts[v], cam);

    RasterResult raster;
    raster.mask.width = cam.width;
    raster.mask.height = cam.height;
    raster.mask.inside.assign(static_cast<size_t>(cam.width) * cam.height, 0);
    std::vector<double> face_area(model_.faces.size());
    for (size_t fi = 0; fi < model_.faces.size(); ++fi) {
      const Face& f = model_.faces[fi];
      const Vec2 a = projected[f[0]], b = projected[f[1]], c = projected[f[2]];
      face_area[fi] =
          (b - a).x() * (c - a).y() - (b - a).y() * (c - a).x();
      if (std::abs(face_area[fi]) < 1e-12) continue;
      const int x0 = std::max(0, static_cast<int>(std::floor(std::min({a.x(), b.x(), c.x()}) - 0.5)));
      const int x1 = std::min(cam.width - 1, static_cast<int>(std::ceil(std::max({a.x(), b.x(), c.x()}) - 0.5)));
      const int y0 = std::max(0, static_cast<int>(std::floor(std::min({a.y(), b.y(), c.y()}) - 0.5)));
      const int y1 = std::min(cam.height - 1, static_cast<int>(std::ceil(std::max({a.y(), b.y(), c.y()}) - 0.5)));
      for (int y = y0; y <= y1; ++y) {
        for (int xpix = x0; xpix <= x1; ++xpix) {
          const Vec2 p(xpix + 0.5, y + 0.5);
          const double w0 = ((b - p).x() * (c - p).y() - (b - p).y() * (c - p).x()) / face_area[fi];
          const double w1 = ((c - p).x() * (a - p).y() - (c - p).y() * (a - p).x()) / face_area[fi];
          if (w0 < 0 || w1 < 0 || w0 + w1 > 1) continue;
          raster.mask.inside[static_cast<size_t>(y) * cam.width + xpix] = 1;
        }
      }
    }

    // Occluding-contour edges: facing flips across the edge (or an open
    // boundary of a front-facing face).
    std::map<std::pair<int, int>, std::vector<int>> edge_faces;
    for (size_t fi = 0; fi < model_.faces.size(); ++fi) {
      const Face& f = model_.faces[fi];
      for (int k = 0; k < 3; ++k) {
        auto key = std::minmax(f[k], f[(k + 1) % 3]);
        edge_faces[{key.first, key.second}].push_back(static_cast<int>(fi));
      }
    }
    struct BoundarySample {
      Vec2 pos;
      int va, vb;
      double t;
    };
    std::vector<BoundarySample> samples;
    for (const auto& [edge, fs] : edge_faces) {
      bool silhouette_edge = false;
      if (fs.size() == 2) {
        silhouette_edge = (face_area[fs[0]] > 0) != (face_area[fs[1]] > 0);
      } else if (fs.size() == 1) {
        silhouette_edge = true;
      }
      if (!silhouette_edge) continue;
      const Vec2 pa = projected[edge.first], pb = projected[edge.second];
      const double len = (pb - pa).norm();
      const int n = std::clamp(static_cast<int>(std::ceil(len)), 1, 64);
      for (int k = 0; k < n; ++k) {
        const double t = (k + 0.5) / n;
        samples.push_back({pa + t * (pb - pa), edge.first, edge.second, t});
      }
    }

    std::vector<Vec2> sample_grads(samples.size(), Vec2::Zero());

    // Model outside the observation: distance-transform line integral along
    // the contour samples.
    for (size_t s = 0; s < samples.size(); ++s) {
      Vec2 g;
      const double d = sample_field(observed_dt_, observation_.width,
                                    observation_.height, samples[s].pos, &g);
      e_silh += silh_norm_ * d;
      if (grad) sample_grads[s] += weights_.k_silh * silh_norm_ * g;
    }

    // Observation coverage: every observed-inside pixel not covered by the
    // model pulls its nearest contour sample.
    if (!samples.empty()) {
      // Bucket samples on the pixel grid for nearest queries.
      const int gw = cam.width, gh = cam.height;
      std::vector<std::vector<int>> buckets(static_cast<size_t>(gw) * gh);
      for (size_t s = 0; s < samples.size(); ++s) {
        const int bx = std::clamp(static_cast<int>(samples[s].pos.x()), 0, gw - 1);
        const int by = std::clamp(static_cast<int>(samples[s].pos.y()), 0, gh - 1);
        buckets[static_cast<size_t>(by) * gw + bx].push_back(static_cast<int>(s));
      }
      const GemanMcClure rho_silh(sigma_silh_);
      for (int idx : observed_inside_) {
        if (raster.mask.inside[idx]) continue;  // covered: zero distance
        const int px = idx % gw, py = idx / gw;
        const Vec2 p(px + 0.5, py + 0.5);
        // Expanding ring search.
        int best = -1;
        double best_d = std::numeric_limits<double>::infinity();
        for (int radius = 0; radius < std::max(gw, gh); ++radius) {
          if (best >= 0 && (radius - 1.0) * (radius - 1.0) > best_d) break;
          const int bx0 = std::max(0, px - radius), bx1 = std::min(gw - 1, px + radius);
          const int by0 = std::max(0, py - radius), by1 = std::min(gh - 1, py + radius);
          for (int by = by0; by <= by1; ++by) {
            for (int bx = bx0; bx <= bx1; ++bx) {
              if (radius > 0 && bx != bx0 && bx != bx1 && by != by0 && by != by1)
                continue;
              for (int s : buckets[static_cast<size_t>(by) * gw + bx]) {
                const double d = (samples[s].pos - p).squaredNorm();
                if (d < best_d) {
                  best_d = d;
                  best = s;
                }
              }
            }
          }
        }
        e_silh += silh_norm_ * rho_silh.value(best_d);
        if (grad && best >= 0)
          sample_grads[best] += weights_.k_silh * silh_norm_ *
                                rho_silh.derivative(best_d) * 2.0 *
                                (samples[best].pos - p);
      }
    }

    if (grad) {
      // Samples interpolate the endpoint projections, so the chain rule uses
      // each endpoint's own projection Jacobian.
      for (size_t s = 0; s < samples.size(); ++s) {
        if (sample_grads[s].isZero()) continue;
        const BoundarySample& bs = samples[s];
        vgrads[bs.va] += projection_jacobian(verts[bs.va], cam).transpose() *
                         ((1.0 - bs.t) * sample_grads[s]);
        vgrads[bs.vb] += projection_jacobian(verts[bs.vb], cam).transpose() *
                         (bs.t * sample_grads[s]);
        f_grad += sample_grads[s].dot(
            (1.0 - bs.t) * projection_focal_derivative(verts[bs.va]) +
            bs.t * projection_focal_derivative(verts[bs.vb]));
      }
    }
  }

  // Priors.
  if (family_prior_) {
    const VecX c = beta - family_mean_;
    const VecX g = family_precision_ * c;
    e_beta = c.dot(g);
    if (grad)
      grad->head(n_beta_) += weights_.k_beta * prior_scale_ * 2.0 * g;
  } else {
    e_beta = (beta.array().square() * beta_inv_variance_.array()).sum();
    if (grad)
      grad->head(n_beta_) += weights_.k_beta * prior_scale_ * 2.0 *
                             (beta.array() * beta_inv_variance_.array()).matrix();
  }
  const VecX theta_c = theta - model_.pose_prior.mean;
  const VecX pose_g = pose_precision_ * theta_c;
  e_theta = theta_c.dot(pose_g);
  VecX lim_grad = VecX::Zero(theta.size());
  e_lim = pose_limit_energy(theta, model_.pose_limit_min, model_.pose_limit_max,
                            grad ? &lim_grad : nullptr);
  if (has_anchor_) e_dev = (gamma - gamma_anchor_).squaredNorm();

  if (grad) {
    VecX bg = VecX::Zero(n_beta_);
    VecX tg = VecX::Zero(3 * model_.joint_count());
    Vec3 gg = Vec3::Zero();
    deformer_.pullback(vgrads, bg, tg, gg);
    grad->head(n_beta_) += bg;
    grad->segment(n_beta_, 3 * model_.joint_count()) +=
        tg + weights_.k_theta * prior_scale_ * 2.0 * pose_g +
        weights_.k_lim * lim_grad;
    grad->segment<3>(n_beta_ + 3 * model_.joint_count()) +=
        gg + (has_anchor_
                  ? (weights_.k_deviation * 2.0 * (gamma - gamma_anchor_)).eval()
                  : Vec3::Zero().eval());
    (*grad)[dimension() - 1] += f_grad;
  }

  if (terms) {
    (*terms)["E_kp"] = e_kp;
    (*terms)["E_silh"] = e_silh;
    (*terms)["E_beta"] = e_beta;
    (*terms)["E_theta"] = e_theta;
    (*terms)["E_lim"] = e_lim;
    (*terms)["E_dev"] = e_dev;
  }
  return weights_.k_kp * e_kp + weights_.k_silh * e_silh +
         weights_.k_beta * prior_scale_ * e_beta +
         weights_.k_theta * prior_scale_ * e_theta + weights_.k_lim * e_lim +
         weights_.k_deviation * e_dev;
}

EnergyFunction ImageFitEnergy::as_energy_function() {
  ImageFitEnergy* self = this;
  return make_energy(dimension(), [self](const VecX& x, VecX& g) {
    return self->evaluate(x, &g);
  });
}

double ImageFitEnergy::mean_keypoint_error(const VecX& x) {
  VecX beta, theta;
  Vec3 gamma;
  double focal;
  unpack(x, beta, theta, gamma, focal);
  Camera cam = camera_;
  cam.focal = focal;
  deformer_.set_state(beta, theta, gamma);
  const std::vector<Vec3>& verts = deformer_.vertices();
  double total = 0;
  int count = 0;
  for (const auto& [name, obs_p] : observation_.keypoints) {
    if (!obs_p) continue;
    auto it = model_.image_keypoints.find(name);
    if (it == model_.image_keypoints.end()) continue;
    Vec2 mean = Vec2::Zero();
    for (int v : it->second) mean += project(verts[v], cam);
    mean /= static_cast<double>(it->second.size());
    total += (*obs_p - mean).norm();
    ++count;
  }
  return count ? total / count : 0.0;
}

double ImageFitEnergy::silhouette_iou(const VecX& x) {
  VecX beta, theta;
  Vec3 gamma;
  double focal;
  unpack(x, beta, theta, gamma, focal);
  Camera cam = camera_;
  cam.focal = focal;
  deformer_.set_state(beta, theta, gamma);
  const RasterResult raster =
      render_silhouette(deformer_.vertices(), model_.faces, cam);
  return raster.mask.iou(observation_.silhouette);
}

}  // namespace smal
