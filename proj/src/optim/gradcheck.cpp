#include "smal/optim/gradcheck.hpp"

#include <cmath>

namespace smal {

double check_gradient(const EnergyFunction& f, const VecX& x, double eps) {
  if (eps <= 0.0) throw validation_error("gradient check step must be > 0");
  VecX analytic(f.dimension);
  const double base = f.evaluate(x, analytic);
  if (!std::isfinite(base) || !analytic.allFinite())
    throw solver_error("non-finite evaluation during gradient check");

  double max_rel = 0.0;
  VecX probe = x;
  VecX scratch(f.dimension);
  for (int i = 0; i < f.dimension; ++i) {
    probe[i] = x[i] + eps;
    const double plus = f.evaluate(probe, scratch);
    probe[i] = x[i] - eps;
    const double minus = f.evaluate(probe, scratch);
    probe[i] = x[i];
    if (!std::isfinite(plus) || !std::isfinite(minus))
      throw solver_error("non-finite evaluation during gradient check");
    const double numeric = (plus - minus) / (2.0 * eps);
    const double rel = std::abs(numeric - analytic[i]) /
                       std::max(1.0, std::abs(analytic[i]));
    max_rel = std::max(max_rel, rel);
  }
  return max_rel;
}

}  // namespace smal
