#pragma once

#include "smal/arap/arap.hpp"
#include "smal/model/build.hpp"
#include "smal/model/fit3d.hpp"

namespace smal {

struct ScanTarget {
  std::string id;
  std::string family;
  Mesh scan;
  std::map<std::string, Vec3> keypoints;
};

struct CoregConfig {
  int rounds = 4;
  double coupling_weight = 0.02;  // k_o, calibrated on the synthetic suite
  int shape_component_cap = 30;
  SmalFitConfig fit;
  ArapDataWeights arap_data;
  double arap_weight = 0.15;
  int jobs = 1;
};

struct CoregistrationResult {
  SmalModel model;
  std::vector<Registration> registrations;  // final round
  std::vector<SmalFitResult> fits;          // final round
  std::vector<double> round_metrics;        // mean scan-to-mesh per round
};

/// Alternates model fitting, coupled model-free refinement, and model
/// rebuilding (rebuilds need at least two scans). The per-round metric is the
/// mean scan-to-mesh distance of the refined registrations.
CoregistrationResult coregister(const GlossTemplate& tmpl,
                                const std::vector<ScanTarget>& scans,
                                const std::vector<Registration>& initial,
                                const SmalModel& initial_model,
                                const CoregConfig& config);

}  // namespace smal
