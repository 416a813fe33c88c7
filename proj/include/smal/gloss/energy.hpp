#pragma once

#include <map>
#include <string>

#include "smal/gloss/params.hpp"
#include "smal/optim/energy.hpp"

namespace smal {

/// Energy weights. Negative robust scales mean "derive from the template":
/// 0.1 x bounding-box diagonal.
struct GlossWeights {
  double k_sm = 10.0;
  double k_s = 1.0;
  double k_d = 1.0;
  double k_st = 100.0;
  double k_kp = 50.0;
  double k_m2s = 1.0;
  double k_s2m = 1.0;
  double k_c = 5.0;
  double k_tail = 1.0;
  double sigma_m2s = -1.0;
  double sigma_s2m = -1.0;

  void validate() const;
};

/// The part-based registration energy: priors on shape/pose-deformation
/// coefficients, symmetry coupling, interface stitching, robust bidirectional
/// scan distances, keypoint matching, interface curvature preservation, and
/// the tail pose prior. Nearest-neighbor assignments are frozen between
/// explicit refresh calls so the energy stays smooth for the solver.
class GlossEnergy {
 public:
  GlossEnergy(const GlossTemplate& tmpl, Mesh scan,
              std::map<std::string, Vec3> scan_keypoints, GlossWeights weights);

  int dimension() const { return gloss_param_dimension(tmpl_); }

  void refresh_correspondences(const GlossParams& params);

  /// Value and (optionally) the gradient over all part parameters.
  double evaluate(const GlossParams& params, GlossParams* grad) const;

  /// Individual term values (unweighted by their k factors).
  std::map<std::string, double> term_values(const GlossParams& params) const;

  /// Flat-vector adapter for the generic minimizer.
  EnergyFunction as_energy_function() const;

  const GlossTemplate& templ() const { return tmpl_; }
  const Mesh& scan() const { return scan_; }
  const GlossWeights& weights() const { return weights_; }

 private:
  struct Workspace;
  double evaluate_impl(const GlossParams& params, GlossParams* grad,
                       std::map<std::string, double>* terms) const;

  const GlossTemplate& tmpl_;
  Mesh scan_;
  std::map<std::string, Vec3> scan_keypoints_;
  GlossWeights weights_;
  double sigma_m2s_ = 1.0;
  double sigma_s2m_ = 1.0;

  // Template-side constants.
  std::vector<std::vector<Vec3>> template_local_normals_;
  std::vector<std::vector<double>> template_normal_gaps_;  // per interface pair

  // Frozen correspondences.
  std::vector<std::vector<int>> m2s_nearest_;          // per part, per vertex
  std::vector<PartVertexRef> s2m_nearest_;             // per scan vertex
};

/// One-shot evaluation: correspondences refreshed at `params`, then a single
/// energy/gradient evaluation with them held fixed.
double gloss_energy(const GlossTemplate& tmpl, const GlossParams& params,
                    const Mesh& scan,
                    const std::map<std::string, Vec3>& scan_keypoints,
                    const GlossWeights& weights, GlossParams* grad = nullptr);

}  // namespace smal
