// Scratch probe for fit convergence (not registered with ctest).
#include <chrono>
#include <cstdio>

#include "smal/geometry/metrics.hpp"
#include "smal/geometry/rotations.hpp"
#include "smal/gloss/fit.hpp"
#include "smal/synth/synth.hpp"

using namespace smal;

int main(int argc, char** argv) {
  const int iters = argc > 1 ? std::atoi(argv[1]) : 300;
  const int rounds = argc > 2 ? std::atoi(argv[2]) : 3;
  const GlossTemplate t = make_template(0.8);
  std::printf("template V=%d dim=%d\n", t.merged_vertex_count(),
              gloss_param_dimension(t));

  const Vec3 axis(0, 0, M_PI / 6.0);
  const Mat3 rot = rodrigues_to_matrix(axis);
  Mesh scan = t.merged_mesh;
  for (Vec3& v : scan.vertices) v = rot * v;
  std::map<std::string, Vec3> kps;
  for (const auto& [name, m] : t.scan_keypoint_vertices)
    kps[name] = scan.vertices[m];

  GlossFitConfig config;
  config.solver.max_iterations = iters;
  config.correspondence_rounds = rounds;
  const auto start = std::chrono::steady_clock::now();
  const GlossFitResult fit = fit_gloss(t, scan, kps, config);
  const double secs = std::chrono::duration<double>(
                          std::chrono::steady_clock::now() - start)
                          .count();

  double max_rot_err = 0;
  for (int i = 0; i < fit.params.part_count(); ++i) {
    const PartParams& p = fit.params.parts[i];
    const double err =
        (rodrigues_to_matrix(p.rotation) - rot).cwiseAbs().maxCoeff();
    if (err > 0.05)
      std::printf("  part %2d %-18s rot_err=%.3f\n", i,
                  t.parts[i].name.c_str(), err);
    max_rot_err = std::max(max_rot_err, err);
  }
  const Mesh fitted = merge_parts(fit.params, t);
  double rmse = 0;
  for (int v = 0; v < fitted.vertex_count(); ++v)
    rmse += (fitted.vertices[v] - scan.vertices[v]).squaredNorm();
  rmse = std::sqrt(rmse / fitted.vertex_count());
  std::printf("time=%.1fs energy=%.4f max_rot_err=%.4f rmse=%.5f (bbox %.3f)\n",
              secs, fit.final_energy, max_rot_err, rmse,
              bbox_diagonal(scan));
  for (const auto& [k, v] : fit.term_values)
    std::printf("  %s = %.6f\n", k.c_str(), v);
  for (const auto& r : fit.rounds)
    std::printf("  round: iters=%d value=%.5f stop=%s\n", r.iterations,
                r.value, r.stop_reason.c_str());
  return 0;
}
