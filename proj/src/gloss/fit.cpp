#include "smal/gloss/fit.hpp"

namespace smal {

GlossFitResult fit_gloss(const GlossTemplate& tmpl, const Mesh& scan,
                         const std::map<std::string, Vec3>& scan_keypoints,
                         const GlossFitConfig& config,
                         const GlossParams* init) {
  GlossParams params;
  if (init) {
    params = *init;
  } else {
    params = GlossParams::neutral(tmpl);
    const Vec3 shift = vertex_median(scan.vertices) -
                       vertex_median(tmpl.merged_mesh.vertices);
    for (PartParams& p : params.parts) p.location += shift;
  }

  GlossEnergy energy(tmpl, scan, scan_keypoints, config.weights);
  GlossFitResult result;
  for (int round = 0; round < config.correspondence_rounds; ++round) {
    energy.refresh_correspondences(params);
    const MinimizeResult mr = minimize(energy.as_energy_function(),
                                       pack_gloss_params(params), config.solver);
    params = unpack_gloss_params(tmpl, mr.x);
    result.rounds.push_back(mr);
  }
  energy.refresh_correspondences(params);
  result.final_energy = energy.evaluate(params, nullptr);
  result.term_values = energy.term_values(params);
  result.params = std::move(params);
  return result;
}

}  // namespace smal
