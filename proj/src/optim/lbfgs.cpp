#include "smal/optim/lbfgs.hpp"

#include <cmath>
#include <cstdio>
#include <deque>
#include <sstream>

namespace smal {

namespace {

void check_finite(double value, const VecX& grad, const VecX& x) {
  if (std::isfinite(value) && grad.allFinite()) return;
  std::ostringstream os;
  os << "non-finite energy evaluation (value=" << value << ") at iterate [";
  const int show = std::min<int>(8, static_cast<int>(x.size()));
  for (int i = 0; i < show; ++i) os << (i ? ", " : "") << x[i];
  if (x.size() > show) os << ", ...";
  os << "]";
  throw solver_error(os.str());
}

}  // namespace

MinimizeResult minimize(const EnergyFunction& f, const VecX& x0,
                        const SolverConfig& config) {
  config.validate();
  if (f.dimension != x0.size())
    throw validation_error("initial point does not match energy dimension");

  MinimizeResult res;
  res.x = x0;
  VecX grad(f.dimension);
  double value = f.evaluate(res.x, grad);
  check_finite(value, grad, res.x);
  res.value = value;
  res.log.push_back({0, value, grad.norm(), 0.0});

  if (grad.norm() <= config.gradient_tolerance) {
    res.stop_reason = "gradient tolerance at start";
    return res;
  }

  std::deque<VecX> s_hist, y_hist;
  std::deque<double> rho_hist;
  VecX x_prev = res.x, grad_prev = grad;

  for (int iter = 1; iter <= config.max_iterations; ++iter) {
    // Two-loop recursion.
    VecX q = grad;
    const int m = static_cast<int>(s_hist.size());
    std::vector<double> alpha(m);
    for (int i = m - 1; i >= 0; --i) {
      alpha[i] = rho_hist[i] * s_hist[i].dot(q);
      q -= alpha[i] * y_hist[i];
    }
    if (m > 0) {
      const double gamma =
          s_hist.back().dot(y_hist.back()) / y_hist.back().squaredNorm();
      q *= gamma;
    }
    for (int i = 0; i < m; ++i) {
      const double beta = rho_hist[i] * y_hist[i].dot(q);
      q += (alpha[i] - beta) * s_hist[i];
    }
    VecX direction = -q;
    double dir_dot_grad = direction.dot(grad);
    if (dir_dot_grad >= 0) {
      // Not a descent direction; restart from steepest descent.
      direction = -grad;
      dir_dot_grad = -grad.squaredNorm();
      s_hist.clear();
      y_hist.clear();
      rho_hist.clear();
    }

    double step = (m == 0) ? std::min(1.0, 1.0 / grad.norm()) : 1.0;
    VecX x_new = res.x;
    VecX grad_new(f.dimension);
    double value_new = value;
    bool accepted = false;
    for (int ls = 0; ls < config.max_line_search_steps; ++ls) {
      x_new = res.x + step * direction;
      value_new = f.evaluate(x_new, grad_new);
      check_finite(value_new, grad_new, x_new);
      if (value_new <= value + config.armijo_c1 * step * dir_dot_grad) {
        accepted = true;
        break;
      }
      step *= config.backtrack_factor;
    }
    if (!accepted) {
      res.stop_reason = "line search failed to decrease";
      break;
    }

    const double step_norm = (x_new - res.x).norm();
    const VecX s = x_new - res.x;
    const VecX y = grad_new - grad;
    const double sy = s.dot(y);
    if (sy > 1e-10 * s.norm() * y.norm()) {
      s_hist.push_back(s);
      y_hist.push_back(y);
      rho_hist.push_back(1.0 / sy);
      if (static_cast<int>(s_hist.size()) > config.memory) {
        s_hist.pop_front();
        y_hist.pop_front();
        rho_hist.pop_front();
      }
    }

    res.x = x_new;
    value = value_new;
    grad = grad_new;
    res.iterations = iter;
    res.log.push_back({iter, value, grad.norm(), step_norm});

    if (grad.norm() <= config.gradient_tolerance) {
      res.stop_reason = "gradient tolerance";
      break;
    }
    if (step_norm <= config.step_tolerance) {
      res.stop_reason = "step tolerance";
      break;
    }
  }
  if (res.stop_reason.empty()) res.stop_reason = "iteration budget";
  res.value = value;
  return res;
}

std::string iteration_log_jsonl(const std::vector<IterationRecord>& log) {
  std::string out;
  char buf[192];
  for (const IterationRecord& r : log) {
    std::snprintf(buf, sizeof(buf),
                  "{\"iter\": %d, \"value\": %.17g, \"grad_norm\": %.17g, "
                  "\"step_norm\": %.17g}\n",
                  r.iter, r.value, r.grad_norm, r.step_norm);
    out += buf;
  }
  return out;
}

}  // namespace smal
