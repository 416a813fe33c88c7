#include "smal/model/smal_model.hpp"

#include <Eigen/Eigenvalues>
#include <fstream>

#include <json.hpp>

namespace smal {

MatX GaussianPrior::precision() const {
  const int n = static_cast<int>(mean.size());
  // Free dimensions (unbounded variance) are dropped before inversion.
  std::vector<int> active;
  for (int i = 0; i < n; ++i)
    if (covariance(i, i) < 0.5 * kUnboundedLimit) active.push_back(i);
  MatX sub(active.size(), active.size());
  for (size_t r = 0; r < active.size(); ++r)
    for (size_t c = 0; c < active.size(); ++c)
      sub(r, c) = covariance(active[r], active[c]);
  const MatX sub_inv = sub.inverse();
  MatX out = MatX::Zero(n, n);
  for (size_t r = 0; r < active.size(); ++r)
    for (size_t c = 0; c < active.size(); ++c)
      out(active[r], active[c]) = sub_inv(r, c);
  return out;
}

KinematicTree SmalModel::tree_for(
    const std::vector<Vec3>& neutral_vertices) const {
  KinematicTree tree;
  tree.parent = parent;
  tree.joint_positions.resize(joint_count());
  for (int j = 0; j < joint_count(); ++j) {
    Vec3 acc = Vec3::Zero();
    for (int v : joint_rings[j]) acc += neutral_vertices[v];
    tree.joint_positions[j] = acc / static_cast<double>(joint_rings[j].size());
  }
  return tree;
}

std::vector<Vec3> SmalModel::neutral_vertices(const VecX& beta) const {
  return unflatten_vertices(shape_space.reconstruct(beta));
}

void SmalModel::validate() const {
  if (version < 1) throw validation_error("model version missing");
  const int v = vertex_count();
  const int n = joint_count();
  if (static_cast<int>(weights.rows.size()) != v)
    throw validation_error("model weights do not match vertex count");
  validate_weights(weights, n);
  if (static_cast<int>(joint_rings.size()) != n)
    throw validation_error("model joint rings do not match joint count");
  for (const auto& ring : joint_rings)
    if (ring.empty()) throw validation_error("empty joint ring");
  if (pose_limit_min.size() != 3 * n || pose_limit_max.size() != 3 * n)
    throw validation_error("pose limit size mismatch");
  if (pose_prior.mean.size() != 3 * n)
    throw validation_error("pose prior size mismatch");
  for (int i = 0; i < 3 * n; ++i) {
    if (pose_limit_min[i] > pose_prior.mean[i] ||
        pose_prior.mean[i] > pose_limit_max[i])
      throw validation_error("pose limits do not bracket the prior mean");
  }
  // Basis orthonormality and eigenvalue ordering.
  const MatX gram =
      shape_space.basis.transpose() * shape_space.basis -
      MatX::Identity(shape_space.component_count(), shape_space.component_count());
  if (shape_space.component_count() > 0 && gram.cwiseAbs().maxCoeff() > 1e-9)
    throw validation_error("shape basis is not orthonormal");
  for (int c = 1; c < shape_space.component_count(); ++c)
    if (shape_space.eigenvalues[c] > shape_space.eigenvalues[c - 1] + 1e-12)
      throw validation_error("eigenvalues not sorted descending");
  for (const auto& [name, prior] : family_priors) {
    const MatX& cov = prior.covariance;
    if ((cov - cov.transpose()).cwiseAbs().maxCoeff() > 1e-9)
      throw validation_error("family covariance not symmetric: " + name);
    Eigen::SelfAdjointEigenSolver<MatX> eig(cov);
    if (eig.eigenvalues().minCoeff() < -1e-9)
      throw validation_error("family covariance not PSD: " + name);
  }
}

Mesh smal_instance(const SmalModel& model, const VecX& beta, const VecX& theta,
                   const Vec3& gamma) {
  SmalDeformer deformer(model, static_cast<int>(beta.size()));
  deformer.set_state(beta, theta, gamma);
  Mesh out;
  out.vertices = deformer.vertices();
  out.faces = model.faces;
  return out;
}

SmalDeformer::SmalDeformer(const SmalModel& model, int n_beta)
    : model_(model),
      n_beta_(n_beta < 0 ? model.shape_space.component_count() : n_beta) {
  if (n_beta_ > model.shape_space.component_count())
    throw validation_error("beta dimension exceeds the shape space");
}

void SmalDeformer::set_state(const VecX& beta, const VecX& theta,
                             const Vec3& gamma) {
  if (beta.size() != n_beta_) throw validation_error("beta size mismatch");
  neutral_ = model_.neutral_vertices(beta);
  tree_ = model_.tree_for(neutral_);
  theta_ = theta;
  posed_ = apply_blended(
      part_transforms(tree_, forward_kinematics(tree_, theta, gamma)),
      model_.weights, neutral_);
}

void SmalDeformer::pullback(const std::vector<Vec3>& vertex_grads,
                            VecX& beta_grad, VecX& theta_grad,
                            Vec3& gamma_grad) const {
  const LbsGradients lbs = lbs_pullback(tree_, theta_, model_.weights,
                                        neutral_, vertex_grads);
  theta_grad += lbs.theta;
  gamma_grad += lbs.gamma;
  // Neutral-vertex gradients: direct path plus the joint-regressor path.
  VecX flat = flatten_vertices(lbs.neutral);
  for (int j = 0; j < model_.joint_count(); ++j) {
    const auto& ring = model_.joint_rings[j];
    const Vec3 share = lbs.joints[j] / static_cast<double>(ring.size());
    for (int v : ring) flat.segment<3>(3 * v) += share;
  }
  beta_grad += model_.shape_space.basis.leftCols(n_beta_).transpose() * flat;
}

namespace {

nlohmann::json vecx_json(const VecX& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

VecX vecx_from(const nlohmann::json& j) {
  const auto vals = j.get<std::vector<double>>();
  return Eigen::Map<const VecX>(vals.data(), vals.size());
}

nlohmann::json matx_json(const MatX& m) {
  nlohmann::json j;
  j["rows"] = m.rows();
  j["cols"] = m.cols();
  std::vector<double> vals;
  vals.reserve(m.size());
  for (int r = 0; r < m.rows(); ++r)
    for (int c = 0; c < m.cols(); ++c) vals.push_back(m(r, c));
  j["data"] = std::move(vals);  // row-major
  return j;
}

MatX matx_from(const nlohmann::json& j) {
  const int rows = j.at("rows").get<int>();
  const int cols = j.at("cols").get<int>();
  const auto vals = j.at("data").get<std::vector<double>>();
  if (static_cast<int>(vals.size()) != rows * cols)
    throw io_error("matrix payload size mismatch");
  MatX m(rows, cols);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) m(r, c) = vals[r * cols + c];
  return m;
}

nlohmann::json prior_json(const GaussianPrior& p) {
  nlohmann::json j;
  j["mean"] = vecx_json(p.mean);
  j["covariance"] = matx_json(p.covariance);
  return j;
}

GaussianPrior prior_from(const nlohmann::json& j) {
  GaussianPrior p;
  p.mean = vecx_from(j.at("mean"));
  p.covariance = matx_from(j.at("covariance"));
  return p;
}

}  // namespace

void write_smal_model_json(const std::string& path, const SmalModel& model) {
  nlohmann::json j;
  j["version"] = model.version;
  j["mean_shape"] = vecx_json(model.shape_space.mean_shape);
  j["basis"] = matx_json(model.shape_space.basis);
  j["eigenvalues"] = vecx_json(model.shape_space.eigenvalues);
  nlohmann::json faces = nlohmann::json::array();
  for (const Face& f : model.faces) faces.push_back({f[0], f[1], f[2]});
  j["faces"] = std::move(faces);
  nlohmann::json weights = nlohmann::json::array();
  for (const auto& row : model.weights.rows) {
    nlohmann::json jr = nlohmann::json::array();
    for (const auto& [idx, val] : row)
      jr.push_back({{"index", idx}, {"value", val}});
    weights.push_back(std::move(jr));
  }
  j["blend_weights"] = std::move(weights);
  j["tree"] = {{"parent", model.parent}, {"joint_rings", model.joint_rings}};
  j["pose_prior"] = prior_json(model.pose_prior);
  j["pose_limits"] = {{"min", vecx_json(model.pose_limit_min)},
                      {"max", vecx_json(model.pose_limit_max)}};
  nlohmann::json families;
  for (const auto& [name, prior] : model.family_priors)
    families[name] = prior_json(prior);
  j["families"] = std::move(families);
  j["image_keypoints"] = model.image_keypoints;
  j["scan_keypoints"] = model.scan_keypoint_vertices;
  j["mirror"] = model.mirror.pair_of;

  std::ofstream out(path);
  if (!out) throw io_error("cannot write model file: " + path);
  out << j.dump() << '\n';
}

SmalModel read_smal_model_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot open model file: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw io_error("model JSON parse error in " + path + ": " + e.what());
  }
  if (!j.contains("version")) throw io_error("model file missing version");
  SmalModel m;
  m.version = j.at("version").get<int>();
  m.shape_space.mean_shape = vecx_from(j.at("mean_shape"));
  m.shape_space.basis = matx_from(j.at("basis"));
  m.shape_space.eigenvalues = vecx_from(j.at("eigenvalues"));
  for (const auto& f : j.at("faces"))
    m.faces.push_back({f.at(0).get<int>(), f.at(1).get<int>(), f.at(2).get<int>()});
  for (const auto& row : j.at("blend_weights")) {
    std::vector<std::pair<int, double>> entries;
    for (const auto& e : row)
      entries.emplace_back(e.at("index").get<int>(), e.at("value").get<double>());
    m.weights.rows.push_back(std::move(entries));
  }
  m.parent = j.at("tree").at("parent").get<std::vector<int>>();
  m.joint_rings =
      j.at("tree").at("joint_rings").get<std::vector<std::vector<int>>>();
  m.pose_prior = prior_from(j.at("pose_prior"));
  m.pose_limit_min = vecx_from(j.at("pose_limits").at("min"));
  m.pose_limit_max = vecx_from(j.at("pose_limits").at("max"));
  for (const auto& [name, prior] : j.at("families").items())
    m.family_priors[name] = prior_from(prior);
  m.image_keypoints =
      j.at("image_keypoints").get<std::map<std::string, std::vector<int>>>();
  m.scan_keypoint_vertices =
      j.at("scan_keypoints").get<std::map<std::string, int>>();
  m.mirror.pair_of = j.at("mirror").get<std::vector<int>>();
  m.validate();
  return m;
}

}  // namespace smal
