#pragma once

#include "smal/gloss/energy.hpp"
#include "smal/optim/lbfgs.hpp"

namespace smal {

struct GlossFitConfig {
  GlossWeights weights;
  SolverConfig solver;
  int correspondence_rounds = 3;

  GlossFitConfig() {
    solver.max_iterations = 1500;
    solver.gradient_tolerance = 1e-6;
  }
};

struct GlossFitResult {
  GlossParams params;
  double final_energy = 0.0;
  std::map<std::string, double> term_values;
  std::vector<MinimizeResult> rounds;
};

/// Registers the part model to a scan: neutral initialization aligned by
/// vertex medians, then alternating correspondence refreshes and smooth
/// minimization.
GlossFitResult fit_gloss(const GlossTemplate& tmpl, const Mesh& scan,
                         const std::map<std::string, Vec3>& scan_keypoints,
                         const GlossFitConfig& config,
                         const GlossParams* init = nullptr);

}  // namespace smal
