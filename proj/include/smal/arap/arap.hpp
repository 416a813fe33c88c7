#pragma once

#include <map>
#include <string>
#include <vector>

#include "smal/geometry/mesh.hpp"

namespace smal {

struct ArapDataWeights {
  double k_kp = 50.0;
  double k_m2s = 1.0;
  double k_s2m = 1.0;
  double sigma = -1.0;  // robust scale; <0 derives 0.1 x scan bbox diagonal
};

/// Model-free refinement problem: move `initial_vertices` (template topology,
/// also the rigidity rest shape) toward the scan under as-rigid-as-possible
/// regularization, optionally coupled to a model fit v0 by an L1 term.
struct ArapProblem {
  std::vector<Vec3> initial_vertices;
  std::vector<Face> faces;               // template topology
  Mesh scan;
  std::map<std::string, Vec3> scan_keypoints;
  std::map<std::string, int> keypoint_vertices;  // name -> vertex index
  ArapDataWeights data;
  double arap_weight = 0.15;  // calibrated on the synthetic suite
  std::vector<Vec3> coupling_target;  // empty = no coupling
  double coupling_weight = 0.0;       // k_o
  int max_iterations = 50;
  double relative_tolerance = 1e-5;
  int correspondence_refresh_period = 5;
};

struct ArapResult {
  std::vector<Vec3> vertices;
  std::vector<double> energy_trace;  // total energy after each iteration
  int iterations = 0;
};

/// Rigidity energy with explicit per-cell rotations:
/// sum_i sum_{j in N(i)} || (v_i - v_j) - R_i (r_i - r_j) ||^2 (uniform
/// weights). Optionally accumulates d/dv into `grad`.
double arap_energy(const std::vector<Vec3>& vertices,
                   const std::vector<Mat3>& rotations,
                   const std::vector<Vec3>& rest,
                   const std::vector<std::vector<int>>& adjacency,
                   std::vector<Vec3>* grad = nullptr);

/// Optimal per-cell rotations for the current vertices (SVD per cell).
std::vector<Mat3> fit_cell_rotations(const std::vector<Vec3>& vertices,
                                     const std::vector<Vec3>& rest,
                                     const std::vector<std::vector<int>>& adjacency);

/// Alternating local/global refinement. Monotonically non-increasing energy;
/// stops on relative decrease below tolerance or the iteration budget.
ArapResult refine(const ArapProblem& problem);

}  // namespace smal
