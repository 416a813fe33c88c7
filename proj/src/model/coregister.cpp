#include "smal/model/coregister.hpp"

#include <atomic>
#include <future>

#include "smal/geometry/metrics.hpp"

namespace smal {

namespace {

// Index-ordered parallel map; results are independent of the thread count.
template <typename Fn>
void parallel_for(int count, int jobs, Fn&& fn) {
  if (jobs <= 1) {
    for (int i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::future<void>> workers;
  for (int w = 0; w < std::min(jobs, count); ++w)
    workers.push_back(std::async(std::launch::async, [&]() {
      for (int i = next.fetch_add(1); i < count; i = next.fetch_add(1)) fn(i);
    }));
  for (auto& w : workers) w.get();
}

}  // namespace

CoregistrationResult coregister(const GlossTemplate& tmpl,
                                const std::vector<ScanTarget>& scans,
                                const std::vector<Registration>& initial,
                                const SmalModel& initial_model,
                                const CoregConfig& config) {
  if (scans.size() != initial.size())
    throw validation_error("one initial registration per scan required");
  if (scans.empty()) throw validation_error("no scans to co-register");

  CoregistrationResult result;
  result.model = initial_model;
  result.registrations = initial;

  const int n_scans = static_cast<int>(scans.size());
  for (int round = 0; round < config.rounds; ++round) {
    std::vector<SmalFitResult> fits(n_scans);
    std::vector<Registration> regs(n_scans);
    std::vector<std::string> failure(n_scans);

    parallel_for(n_scans, config.jobs, [&](int s) {
      try {
        SmalFitConfig fit_config = config.fit;
        fit_config.n_beta = result.model.shape_space.component_count();
        fits[s] = fit_smal_to_scan(result.model, scans[s].scan,
                                   scans[s].keypoints, fit_config);
        const Mesh instance = smal_instance(result.model, fits[s].beta,
                                            fits[s].theta, fits[s].gamma);

        // The model-free registration keeps evolving across rounds; the
        // round's model fit enters only through the coupling term.
        ArapProblem problem;
        problem.initial_vertices = result.registrations[s].vertices;
        problem.faces = instance.faces;
        problem.scan = scans[s].scan;
        problem.scan_keypoints = scans[s].keypoints;
        problem.keypoint_vertices = result.model.scan_keypoint_vertices;
        problem.data = config.arap_data;
        problem.arap_weight = config.arap_weight;
        problem.coupling_target = instance.vertices;
        problem.coupling_weight = config.coupling_weight;
        const ArapResult refined = refine(problem);

        Registration reg;
        reg.source_id = scans[s].id;
        reg.stage = config.coupling_weight > 0 ? "coupled" : "arap";
        reg.vertices = refined.vertices;
        const KinematicTree tree =
            result.model.tree_for(result.model.neutral_vertices(fits[s].beta));
        reg.part_transforms = part_transforms(
            tree, forward_kinematics(tree, fits[s].theta, fits[s].gamma));
        regs[s] = std::move(reg);
      } catch (const std::exception& e) {
        failure[s] = e.what();
      }
    });
    for (int s = 0; s < n_scans; ++s)
      if (!failure[s].empty())
        throw solver_error("co-registration round " + std::to_string(round) +
                           ", scan '" + scans[s].id + "': " + failure[s]);

    double metric = 0.0;
    for (int s = 0; s < n_scans; ++s) {
      Mesh reg_mesh;
      reg_mesh.vertices = regs[s].vertices;
      reg_mesh.faces = tmpl.merged_mesh.faces;
      metric += scan_to_mesh_distance(scans[s].scan.vertices, reg_mesh);
    }
    metric /= n_scans;
    result.round_metrics.push_back(metric);

    if (n_scans >= 2) {
      std::vector<VecX> recovered;
      recovered.reserve(fits.size());
      for (const SmalFitResult& f : fits) recovered.push_back(f.theta);
      result.model = build_smal_model(tmpl, regs, config.shape_component_cap,
                                      recovered);
    }
    result.registrations = std::move(regs);
    result.fits = std::move(fits);
  }

  // Family priors over the final shape coefficients.
  std::map<std::string, std::vector<VecX>> by_family;
  for (int s = 0; s < n_scans; ++s) {
    const VecX beta = result.model.shape_space.project(
        flatten_vertices(neutral_shape_sample(tmpl, result.registrations[s])));
    by_family[scans[s].family].push_back(beta);
  }
  const double lambda_reg = 1e-3 * result.model.shape_space.eigenvalues.mean();
  result.model.family_priors = fit_family_priors(by_family, lambda_reg);
  result.model.validate();
  return result;
}

}  // namespace smal
