#pragma once

#include <string>
#include <vector>

#include "smal/optim/energy.hpp"

namespace smal {

struct SolverConfig {
  int max_iterations = 500;
  double gradient_tolerance = 1e-8;
  double step_tolerance = 1e-12;
  int memory = 10;
  double armijo_c1 = 1e-4;
  double backtrack_factor = 0.5;
  int max_line_search_steps = 40;

  void validate() const {
    if (max_iterations < 0 || gradient_tolerance <= 0 || step_tolerance <= 0 ||
        memory < 1 || armijo_c1 <= 0 || armijo_c1 >= 1 ||
        backtrack_factor <= 0 || backtrack_factor >= 1 ||
        max_line_search_steps < 1)
      throw validation_error("invalid solver configuration");
  }
};

struct IterationRecord {
  int iter = 0;
  double value = 0.0;
  double grad_norm = 0.0;
  double step_norm = 0.0;
};

struct MinimizeResult {
  VecX x;
  double value = 0.0;
  int iterations = 0;
  std::vector<IterationRecord> log;
  std::string stop_reason;
};

/// Limited-memory quasi-Newton descent with backtracking Armijo line search.
/// Guarantees value(x*) <= value(x0); throws solver_error on non-finite
/// evaluations, reporting the offending iterate.
MinimizeResult minimize(const EnergyFunction& f, const VecX& x0,
                        const SolverConfig& config);

/// Serializes the iteration log as JSON-lines.
std::string iteration_log_jsonl(const std::vector<IterationRecord>& log);

}  // namespace smal
